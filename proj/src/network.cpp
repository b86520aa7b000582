#include "rdrnet/network.hpp"

#include <cmath>
#include <random>
#include <unordered_set>

#include "bn_calibration.hpp"

namespace rdrnet {

const char* structure_name(Structure s) { return s == Structure::Train ? "train" : "deploy"; }

namespace {

template <class T>
BNParams<T> default_bn(std::size_t c) {
  return {std::vector<T>(c, T(1)), std::vector<T>(c, T(0)), std::vector<T>(c, T(0)), std::vector<T>(c, T(1)),
          T(1e-5)};
}

template <class T>
ConvWeights<T> zero_weights(const ConvSpec& spec, bool bias) {
  return {Tensor4<T>(spec.weight_dims()), bias ? std::vector<T>(spec.out_channels, T(0)) : std::vector<T>{}};
}

// conv + BN in train structure, folded conv with bias in deploy structure.
template <class T>
ConvLayer<T> make_layer(const ConvSpec& spec, Structure s) {
  if (s == Structure::Deploy) return {spec, zero_weights<T>(spec, true), std::nullopt};
  return {spec, zero_weights<T>(spec, false), default_bn<T>(spec.out_channels)};
}

template <class T>
ConvBnParams<T> make_conv_bn(const ConvSpec& spec) {
  return {spec, zero_weights<T>(spec, false), default_bn<T>(spec.out_channels)};
}

template <class T>
RepBlock<T> make_rb(std::size_t in, std::size_t out, std::size_t stride, const RbOptions& opt, Structure s) {
  const ConvSpec main = conv3x3(in, out, stride);
  if (s == Structure::Deploy) return {FusedConv<T>{main, zero_weights<T>(main, true)}};
  RBParams<T> p;
  p.conv3 = make_conv_bn<T>(main);
  if (opt.pointwise_path) {
    for (std::size_t j = 0; j < opt.pointwise_convs; ++j)
      p.pointwise.push_back(make_conv_bn<T>(j == 0 ? conv1x1(in, out, stride) : conv1x1(out, out)));
  }
  p.residual = opt.residual && stride == 1 && in == out;
  if (p.residual && opt.residual_bn) p.residual_bn = default_bn<T>(in);
  p.check();
  return {std::move(p)};
}

template <class T>
std::vector<RepBlock<T>> make_rb_stage(std::size_t in, std::size_t out, std::size_t first_stride, std::size_t count,
                                       const RbOptions& opt, Structure s) {
  std::vector<RepBlock<T>> blocks;
  for (std::size_t i = 0; i < count; ++i) blocks.push_back(make_rb<T>(i == 0 ? in : out, out, i == 0 ? first_stride : 1, opt, s));
  return blocks;
}

template <class T>
std::vector<Bottleneck<T>> make_bb_stage(std::size_t in, std::size_t out, std::size_t first_stride, std::size_t count,
                                         Structure s) {
  std::vector<Bottleneck<T>> blocks;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t cin = i == 0 ? in : out;
    const std::size_t stride = i == 0 ? first_stride : 1;
    const std::size_t mid = out / 2;
    Bottleneck<T> b{make_layer<T>(conv1x1(cin, mid), s), make_layer<T>(conv3x3(mid, mid, stride), s),
                    make_layer<T>(conv1x1(mid, out), s), std::nullopt};
    if (stride != 1 || cin != out) b.project = make_layer<T>(conv1x1(cin, out, stride), s);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

template <class T>
SegHead<T> make_head(std::size_t in, std::size_t mid, std::size_t classes, Structure s) {
  const ConvSpec cls = conv1x1(mid, classes);
  return {make_layer<T>(conv3x3(in, mid), s), ConvLayer<T>{cls, zero_weights<T>(cls, true), std::nullopt}};
}

}  // namespace

template <class T>
Network<T> make_skeleton(const NetworkDef& def, Structure s) {
  def.validate();
  Network<T> net;
  net.def = def;
  net.structure = s;
  const RbOptions& o = def.rb;
  net.stage1 = make_rb_stage<T>(def.input_channels, def.stage1.width, 2, def.stage1.blocks, o, s);
  net.stage2 = make_rb_stage<T>(def.stage1.width, def.stage2.width, 2, def.stage2.blocks, o, s);
  net.stage3 = make_rb_stage<T>(def.stage2.width, def.stage3.width, 2, def.stage3.blocks, o, s);

  const std::size_t s4 = def.stage4.semantic_width, d4 = def.stage4.detail_width;
  const std::size_t s5 = def.stage5.semantic_width, d5 = def.stage5.detail_width;
  const std::size_t s6 = def.stage6.semantic_width, d6 = def.stage6.detail_width;
  net.stage4_semantic = make_rb_stage<T>(def.stage3.width, s4, 2, def.stage4.semantic_blocks, o, s);
  net.stage4_detail = make_rb_stage<T>(def.stage3.width, d4, 1, def.stage4.detail_blocks, o, s);
  if (def.enable_fusion1)
    net.fusion1 = BilateralFusion<T>{make_layer<T>(conv1x1(s4, d4), s), 2, {make_layer<T>(conv3x3(d4, s4, 2), s)}};
  net.stage5_semantic = make_rb_stage<T>(s4, s5, 2, def.stage5.semantic_blocks, o, s);
  net.stage5_detail = make_rb_stage<T>(d4, d5, 1, def.stage5.detail_blocks, o, s);
  if (def.enable_fusion2)
    net.fusion2 = BilateralFusion<T>{
        make_layer<T>(conv1x1(s5, d5), s), 4,
        {make_layer<T>(conv3x3(d5, s5 / 2, 2), s), make_layer<T>(conv3x3(s5 / 2, s5, 2), s)}};
  net.stage6_semantic = make_bb_stage<T>(s5, s6, 2, def.stage6.semantic_blocks, s);
  net.stage6_detail = make_bb_stage<T>(d5, d6, 1, def.stage6.detail_blocks, s);

  if (def.enable_rppm) {
    const std::size_t b = def.rppm_branch_width;
    PyramidPooling<T> r;
    r.scale0 = make_layer<T>(conv1x1(s6, b), s);
    for (auto& p : r.pooled) p = make_layer<T>(conv1x1(s6, b), s);
    const ConvSpec g = conv3x3(4 * b, 4 * b, 1, 4);
    if (s == Structure::Train)
      r.grouped = GroupedPair<T>{make_conv_bn<T>(g), make_conv_bn<T>(g)};
    else
      r.grouped = FusedConv<T>{g, zero_weights<T>(g, true)};
    r.compress = make_layer<T>(conv1x1(5 * b, d6), s);
    r.shortcut = make_layer<T>(conv1x1(s6, d6), s);
    net.rppm = std::move(r);
  } else {
    net.context_proj = make_layer<T>(conv1x1(s6, d6), s);
  }
  net.head = make_head<T>(d6, def.head_channels, def.num_classes, s);
  if (def.aux_head && s == Structure::Train) net.aux_head = make_head<T>(d4, def.head_channels, def.num_classes, s);
  return net;
}

// ---------------------------------------------------------------------------

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void randomize(Network<double>& net, std::uint64_t seed, bool calibrated) {
  std::mt19937_64 rng(seed);
  for_each_slot(net, [&](const std::string& name, std::span<double> v, const slots::Shape& dims) {
    const auto fill = [&](auto&& dist) {
      for (auto& x : v) x = dist(rng);
    };
    if (ends_with(name, ".weight")) {
      const double fan_in = static_cast<double>(dims[1] * dims[2] * dims[3]);
      fill(std::normal_distribution<double>(0.0, std::sqrt(1.0 / fan_in)));
    } else if (ends_with(name, ".bias")) {
      fill(std::uniform_real_distribution<double>(-0.1, 0.1));
    } else if (ends_with(name, ".gamma")) {
      fill(std::uniform_real_distribution<double>(0.5, 1.0));
    } else if (ends_with(name, ".beta")) {
      fill(std::uniform_real_distribution<double>(-0.2, 0.2));
    } else if (ends_with(name, ".mean")) {
      if (calibrated) std::fill(v.begin(), v.end(), 0.0);
      else fill(std::uniform_real_distribution<double>(-0.1, 0.1));
    } else if (ends_with(name, ".var")) {
      if (calibrated) std::fill(v.begin(), v.end(), 1.0);
      else fill(std::uniform_real_distribution<double>(0.5, 1.5));
    } else if (ends_with(name, ".eps")) {
      std::fill(v.begin(), v.end(), 1e-5);
    }
  });
}

}  // namespace

template <class T>
Network<T> build_random(const NetworkDef& def, const RandomInit& init) {
  Network<double> net = make_skeleton<double>(def, Structure::Train);
  randomize(net, init.seed, init.calibrate_bn);
  if (init.calibrate_bn) {
    Tensor4<double> x({2, def.input_channels, init.calibration_height, init.calibration_width});
    std::mt19937_64 rng(init.seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : x.data()) v = normal(rng);
    detail::ScopedBnCalibration<double> scope;
    forward(net, x, net.aux_head.has_value());
  }
  if constexpr (std::is_same_v<T, double>) {
    return net;
  } else {
    return build_from_store<T>(def, export_weights(net).cast(dtype_of<T>::value));
  }
}

Structure detect_structure(const WeightStore& store) {
  for (const auto& [name, rec] : store.entries())
    if (name.find(".fused.") != std::string::npos) return Structure::Deploy;
  return Structure::Train;
}

template <class T>
Network<T> build_from_store(const NetworkDef& def, const WeightStore& store) {
  Network<T> net = make_skeleton<T>(def, detect_structure(store));
  std::size_t matched = 0;
  std::unordered_set<std::string> seen;
  for_each_slot(net, [&](const std::string& name, std::span<T> v, const slots::Shape& dims) {
    const TensorRecord& rec = store.at(name);
    if (rec.dims != dims) {
      std::string want, got;
      for (auto d : dims) want += std::to_string(d) + " ";
      for (auto d : rec.dims) got += std::to_string(d) + " ";
      throw DimensionError(name, "stored shape [ " + got + "] does not match slot shape [ " + want + "]");
    }
    const auto values = rec.values<T>();
    std::copy(values.begin(), values.end(), v.begin());
    seen.insert(name);
    ++matched;
  });
  if (matched != store.size()) {
    for (const auto& [name, rec] : store.entries())
      if (!seen.count(name))
        throw ContractError("tensor '" + name + "' does not belong to any slot of " + def.variant + " (" +
                            structure_name(net.structure) + " structure)");
  }
  return net;
}

template <class T>
WeightStore export_weights(const Network<T>& net) {
  WeightStore store;
  for_each_slot(const_cast<Network<T>&>(net), [&](const std::string& name, std::span<T> v, const slots::Shape& dims) {
    store.put_values<T>(name, dims, std::span<const T>(v.data(), v.size()));
  });
  return store;
}

// ---------------------------------------------------------------------------

namespace {

template <class Fn>
auto in_stage(const char* stage, Fn&& body) {
  try {
    return body();
  } catch (const DimensionError& e) {
    throw DimensionError(std::string(stage) + "." + e.axis(), std::string("in ") + stage + ": " + e.what());
  }
}

template <class T>
Tensor4<T> run_rbs(const std::vector<RepBlock<T>>& blocks, Tensor4<T> x) {
  for (const auto& b : blocks) x = b.forward(x);
  return x;
}

template <class T>
Tensor4<T> run_bbs(const std::vector<Bottleneck<T>>& blocks, Tensor4<T> x) {
  for (const auto& b : blocks) x = b.forward(x);
  return x;
}

void check_input(const NetworkDef& def, const Dims& d) {
  if (d.n == 0) throw DimensionError("input.batch", "batch must be non-empty");
  if (d.c != def.input_channels) throw DimensionError("input.channels", def.input_channels, d.c, "network input");
  if (d.h == 0 || d.h % kInputMultiple != 0)
    throw DimensionError("input.height", "height " + std::to_string(d.h) + " is not a positive multiple of 64");
  if (d.w == 0 || d.w % kInputMultiple != 0)
    throw DimensionError("input.width", "width " + std::to_string(d.w) + " is not a positive multiple of 64");
}

}  // namespace

template <class T>
ForwardResult<T> forward(const Network<T>& net, const Tensor4<T>& x, bool want_aux, ForwardTrace* trace) {
  check_input(net.def, x.dims());
  if (want_aux && !net.aux_head)
    throw ContractError(std::string("aux logits requested but the ") + structure_name(net.structure) +
                        " network has no aux head");
  const auto record = [&](const char* name, const Tensor4<T>& t) {
    if (trace) trace->push_back({name, t.dims()});
  };

  Tensor4<T> y = in_stage("stage1", [&] { return run_rbs(net.stage1, x); });
  record("stage1", y);
  y = in_stage("stage2", [&] { return run_rbs(net.stage2, y); });
  record("stage2", y);
  y = in_stage("stage3", [&] { return run_rbs(net.stage3, y); });
  record("stage3", y);

  Tensor4<T> xs = in_stage("stage4.semantic", [&] { return run_rbs(net.stage4_semantic, y); });
  Tensor4<T> xd = in_stage("stage4.detail", [&] { return run_rbs(net.stage4_detail, y); });
  if (net.fusion1) std::tie(xs, xd) = in_stage("fusion1", [&] { return net.fusion1->forward(xs, xd); });
  record("stage4.semantic", xs);
  record("stage4.detail", xd);

  ForwardResult<T> out;
  if (want_aux)
    out.aux_logits = in_stage("aux_head", [&] { return net.aux_head->forward(xd, x.dims().h, x.dims().w); });

  xs = in_stage("stage5.semantic", [&] { return run_rbs(net.stage5_semantic, xs); });
  xd = in_stage("stage5.detail", [&] { return run_rbs(net.stage5_detail, xd); });
  if (net.fusion2) std::tie(xs, xd) = in_stage("fusion2", [&] { return net.fusion2->forward(xs, xd); });
  record("stage5.semantic", xs);
  record("stage5.detail", xd);

  xs = in_stage("stage6.semantic", [&] { return run_bbs(net.stage6_semantic, xs); });
  xd = in_stage("stage6.detail", [&] { return run_bbs(net.stage6_detail, xd); });
  record("stage6.semantic", xs);
  record("stage6.detail", xd);

  Tensor4<T> ctx = in_stage("rppm", [&] { return net.rppm ? net.rppm->forward(xs) : net.context_proj->forward(xs); });
  record("rppm", ctx);
  Tensor4<T> merged = in_stage("merge", [&] {
    Tensor4<T> up = bilinear_upsample(ctx, 8);
    if (!(up.dims() == xd.dims()))
      throw DimensionError("context", "upsampled context " + to_string(up.dims()) + " vs detail " + to_string(xd.dims()));
    return add(up, xd);
  });
  out.logits = in_stage("head", [&] { return net.head.forward(merged, x.dims().h, x.dims().w); });
  record("head", out.logits);
  return out;
}

template <class T>
Network<T> reparameterize_network(const Network<T>& net) {
  Network<T> d;
  d.def = net.def;
  d.structure = Structure::Deploy;
  const auto rbs = [](const std::vector<RepBlock<T>>& in) {
    std::vector<RepBlock<T>> out;
    for (const auto& b : in) out.push_back(b.reparameterized());
    return out;
  };
  const auto bbs = [](const std::vector<Bottleneck<T>>& in) {
    std::vector<Bottleneck<T>> out;
    for (const auto& b : in) out.push_back(b.folded());
    return out;
  };
  d.stage1 = rbs(net.stage1);
  d.stage2 = rbs(net.stage2);
  d.stage3 = rbs(net.stage3);
  d.stage4_semantic = rbs(net.stage4_semantic);
  d.stage4_detail = rbs(net.stage4_detail);
  if (net.fusion1) d.fusion1 = net.fusion1->folded();
  d.stage5_semantic = rbs(net.stage5_semantic);
  d.stage5_detail = rbs(net.stage5_detail);
  if (net.fusion2) d.fusion2 = net.fusion2->folded();
  d.stage6_semantic = bbs(net.stage6_semantic);
  d.stage6_detail = bbs(net.stage6_detail);
  if (net.rppm) d.rppm = net.rppm->reparameterized();
  if (net.context_proj) d.context_proj = net.context_proj->folded();
  d.head = net.head.folded();
  return d;
}

template <class T>
ForwardTrace infer_stage_shapes(const Network<T>& net, const Dims& input) {
  check_input(net.def, input);
  ForwardTrace t;
  const auto rbs = [](const std::vector<RepBlock<T>>& blocks, Dims d) {
    for (const auto& b : blocks) d = b.output_dims(d);
    return d;
  };
  const auto bbs = [](const std::vector<Bottleneck<T>>& blocks, Dims d) {
    for (const auto& b : blocks) d = b.output_dims(d);
    return d;
  };
  Dims d = rbs(net.stage1, input);
  t.push_back({"stage1", d});
  d = rbs(net.stage2, d);
  t.push_back({"stage2", d});
  d = rbs(net.stage3, d);
  t.push_back({"stage3", d});
  Dims s = rbs(net.stage4_semantic, d), x = rbs(net.stage4_detail, d);
  t.push_back({"stage4.semantic", s});
  t.push_back({"stage4.detail", x});
  s = rbs(net.stage5_semantic, s);
  x = rbs(net.stage5_detail, x);
  t.push_back({"stage5.semantic", s});
  t.push_back({"stage5.detail", x});
  s = bbs(net.stage6_semantic, s);
  x = bbs(net.stage6_detail, x);
  t.push_back({"stage6.semantic", s});
  t.push_back({"stage6.detail", x});
  const Dims ctx = net.rppm ? net.rppm->output_dims(s) : net.context_proj->output_dims(s);
  t.push_back({"rppm", ctx});
  t.push_back({"head", {input.n, net.def.num_classes, input.h, input.w}});
  return t;
}

template <class T>
std::size_t bn_record_count(const Network<T>& net) {
  std::size_t n = 0;
  for (const auto* v : {&net.stage1, &net.stage2, &net.stage3, &net.stage4_semantic, &net.stage4_detail,
                        &net.stage5_semantic, &net.stage5_detail})
    for (const auto& b : *v) n += b.bn_count();
  for (const auto* f : {&net.fusion1, &net.fusion2})
    if (*f) n += (*f)->bn_count();
  for (const auto* v : {&net.stage6_semantic, &net.stage6_detail})
    for (const auto& b : *v) n += b.bn_count();
  if (net.rppm) n += net.rppm->bn_count();
  if (net.context_proj) n += net.context_proj->bn_count();
  n += net.head.bn_count();
  if (net.aux_head) n += net.aux_head->bn_count();
  return n;
}

template <class T>
std::size_t param_count(const Network<T>& net) {
  std::size_t n = 0;
  for (const auto* v : {&net.stage1, &net.stage2, &net.stage3, &net.stage4_semantic, &net.stage4_detail,
                        &net.stage5_semantic, &net.stage5_detail})
    for (const auto& b : *v) n += b.param_count();
  for (const auto* f : {&net.fusion1, &net.fusion2})
    if (*f) n += (*f)->param_count();
  for (const auto* v : {&net.stage6_semantic, &net.stage6_detail})
    for (const auto& b : *v) n += b.param_count();
  if (net.rppm) n += net.rppm->param_count();
  if (net.context_proj) n += net.context_proj->param_count();
  n += net.head.param_count();
  if (net.aux_head) n += net.aux_head->param_count();
  return n;
}

#define RDRNET_INSTANTIATE(T)                                                                               \
  template Network<T> make_skeleton<T>(const NetworkDef&, Structure);                                       \
  template Network<T> build_random<T>(const NetworkDef&, const RandomInit&);                                \
  template Network<T> build_from_store<T>(const NetworkDef&, const WeightStore&);                           \
  template WeightStore export_weights<T>(const Network<T>&);                                                \
  template ForwardResult<T> forward<T>(const Network<T>&, const Tensor4<T>&, bool, ForwardTrace*);          \
  template Network<T> reparameterize_network<T>(const Network<T>&);                                         \
  template ForwardTrace infer_stage_shapes<T>(const Network<T>&, const Dims&);                              \
  template std::size_t bn_record_count<T>(const Network<T>&);                                               \
  template std::size_t param_count<T>(const Network<T>&);

RDRNET_INSTANTIATE(float)
RDRNET_INSTANTIATE(double)
#undef RDRNET_INSTANTIATE

}  // namespace rdrnet
