#include "rdrnet/accounting.hpp"

#include <cstdio>
#include <sstream>

namespace rdrnet {

std::size_t CostReport::params() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.params;
  return n;
}

std::uint64_t CostReport::macs() const {
  std::uint64_t n = 0;
  for (const auto& r : rows) n += r.macs;
  return n;
}

std::uint64_t CostReport::elementwise() const {
  std::uint64_t n = 0;
  for (const auto& r : rows) n += r.elementwise;
  return n;
}

namespace {

template <class T>
class Counter {
 public:
  explicit Counter(CostRow& row) : row_(row) {}

  Dims conv(const ConvSpec& spec, bool bias, bool bn, const Dims& in) {
    const Dims out = spec.output_dims(in);
    row_.macs += static_cast<std::uint64_t>(out.count()) * (spec.in_channels / spec.groups) * spec.kernel * spec.kernel;
    if (bias) row_.elementwise += out.count();
    if (bn) row_.elementwise += 2 * out.count();
    return out;
  }
  Dims layer(const ConvLayer<T>& l, const Dims& in) {
    row_.params += l.param_count();
    return conv(l.spec, l.weights.has_bias(), l.bn.has_value(), in);
  }
  void ew(std::size_t count, std::size_t per = 1) { row_.elementwise += static_cast<std::uint64_t>(count) * per; }

  Dims rb(const RepBlock<T>& b, const Dims& in) {
    row_.params += b.param_count();
    if (const auto* f = std::get_if<FusedConv<T>>(&b.form)) {
      const Dims out = conv(f->spec, true, false, in);
      ew(out.count());  // ReLU
      return out;
    }
    const auto& p = std::get<RBParams<T>>(b.form);
    const Dims out = conv(p.conv3.spec, p.conv3.weights.has_bias(), true, in);
    if (!p.pointwise.empty()) {
      Dims t = in;
      for (const auto& pw : p.pointwise) t = conv(pw.spec, pw.weights.has_bias(), true, t);
      ew(out.count());
    }
    if (p.residual) ew(out.count(), p.residual_bn ? 3 : 1);
    ew(out.count());
    return out;
  }
  Dims bb(const Bottleneck<T>& b, const Dims& in) {
    Dims r = layer(b.reduce, in);
    ew(r.count());
    Dims m = layer(b.middle, r);
    ew(m.count());
    const Dims out = layer(b.expand, m);
    if (b.project) layer(*b.project, in);
    ew(out.count(), 2);  // add + ReLU
    return out;
  }
  void fusion(const BilateralFusion<T>& f, const Dims& s, const Dims& d) {
    Dims t = d;
    for (std::size_t i = 0; i < f.d2s.size(); ++i) {
      if (i > 0) ew(t.count());
      t = layer(f.d2s[i], t);
    }
    const Dims c = layer(f.s2d, s);
    ew(c.n * c.c * c.h * f.up_factor * c.w * f.up_factor, 4);
    ew(s.count(), 2);
    ew(d.count(), 2);
  }
  Dims rppm(const PyramidPooling<T>& p, const Dims& in) {
    const Dims s0 = layer(p.scale0, in);
    ew(s0.count());
    for (std::size_t i = 0; i < 4; ++i) {
      Dims pooled;
      if (i < kRppmWindows.size()) {
        const auto [k, s] = kRppmWindows[i];
        const ConvSpec window{in.c, in.c, k, s, k / 2, in.c};
        pooled = window.output_dims(in);
        ew(pooled.count(), k * k);
      } else {
        pooled = {in.n, in.c, 1, 1};
        ew(in.count());
      }
      const Dims b = layer(p.pooled[i], pooled);
      ew(b.count());          // ReLU
      ew(s0.count(), 4 + 1);  // bilinear resize + add
    }
    const Dims cat{in.n, 4 * s0.c, s0.h, s0.w};
    Dims g;
    if (const auto* pair = std::get_if<GroupedPair<T>>(&p.grouped)) {
      for (const auto* c : {&pair->a, &pair->b}) {
        row_.params += c->spec.weight_count() + c->weights.bias.size() + 2 * c->bn.channels();
        g = conv(c->spec, c->weights.has_bias(), true, cat);
      }
      ew(g.count(), 2);
    } else {
      const auto& f = std::get<FusedConv<T>>(p.grouped);
      row_.params += f.param_count();
      g = conv(f.spec, true, false, cat);
      ew(g.count());
    }
    const Dims out = layer(p.compress, {in.n, s0.c + g.c, s0.h, s0.w});
    layer(p.shortcut, in);
    ew(out.count());
    return out;
  }
  void head(const SegHead<T>& h, const Dims& in, std::size_t oh, std::size_t ow) {
    const Dims m = layer(h.conv3, in);
    ew(m.count());
    const Dims l = layer(h.classifier, m);
    ew(l.n * l.c * oh * ow, 4);
  }

 private:
  CostRow& row_;
};

}  // namespace

template <class T>
CostReport count_flops(const Network<T>& net, std::size_t height, std::size_t width) {
  CostReport rep;
  rep.variant = net.def.variant;
  rep.structure = net.structure;
  rep.input = {1, net.def.input_channels, height, width};
  const ForwardTrace shapes = infer_stage_shapes(net, rep.input);
  const auto shape = [&](const char* name) {
    for (const auto& s : shapes)
      if (s.name == name) return s.dims;
    throw ContractError(std::string("missing stage shape ") + name);
  };
  const auto row = [&](const char* name) -> Counter<T> {
    rep.rows.push_back({name, 0, 0, 0});
    return Counter<T>(rep.rows.back());
  };
  const auto rbs = [](Counter<T>& c, const std::vector<RepBlock<T>>& blocks, Dims d) {
    for (const auto& b : blocks) d = c.rb(b, d);
    return d;
  };
  const auto bbs = [](Counter<T>& c, const std::vector<Bottleneck<T>>& blocks, Dims d) {
    for (const auto& b : blocks) d = c.bb(b, d);
    return d;
  };
  // rep.rows may reallocate, so every Counter is used before the next row() call.
  {
    auto c = row("stage1");
    rbs(c, net.stage1, rep.input);
  }
  {
    auto c = row("stage2");
    rbs(c, net.stage2, shape("stage1"));
  }
  {
    auto c = row("stage3");
    rbs(c, net.stage3, shape("stage2"));
  }
  {
    auto c = row("stage4");
    rbs(c, net.stage4_semantic, shape("stage3"));
    rbs(c, net.stage4_detail, shape("stage3"));
  }
  if (net.fusion1) {
    auto c = row("fusion1");
    c.fusion(*net.fusion1, shape("stage4.semantic"), shape("stage4.detail"));
  }
  {
    auto c = row("stage5");
    rbs(c, net.stage5_semantic, shape("stage4.semantic"));
    rbs(c, net.stage5_detail, shape("stage4.detail"));
  }
  if (net.fusion2) {
    auto c = row("fusion2");
    c.fusion(*net.fusion2, shape("stage5.semantic"), shape("stage5.detail"));
  }
  {
    auto c = row("stage6");
    bbs(c, net.stage6_semantic, shape("stage5.semantic"));
    bbs(c, net.stage6_detail, shape("stage5.detail"));
  }
  if (net.rppm) {
    auto c = row("rppm");
    c.rppm(*net.rppm, shape("stage6.semantic"));
  } else {
    auto c = row("context_proj");
    c.layer(*net.context_proj, shape("stage6.semantic"));
  }
  {
    auto c = row("merge");
    c.ew(shape("stage6.detail").count(), 4 + 1);
  }
  {
    auto c = row("head");
    c.head(net.head, shape("stage6.detail"), height, width);
  }
  if (net.aux_head) {
    auto c = row("aux_head");
    c.head(*net.aux_head, shape("stage4.detail"), height, width);
  }
  return rep;
}

template CostReport count_flops<float>(const Network<float>&, std::size_t, std::size_t);
template CostReport count_flops<double>(const Network<double>&, std::size_t, std::size_t);

std::string format_report(const CostReport& r) {
  std::ostringstream os;
  char buf[256];
  os << "## " << r.variant << " (" << structure_name(r.structure) << " structure, input " << r.input.h << "x"
     << r.input.w << ")\n\n";
  os << "| part | params | conv MACs (G) | elementwise ops (G) |\n|---|---:|---:|---:|\n";
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "| %s | %zu | %.3f | %.3f |\n", row.name.c_str(), row.params,
                  static_cast<double>(row.macs) / 1e9, static_cast<double>(row.elementwise) / 1e9);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "| **total** | %zu | %.3f | %.3f |\n\n", r.params(), static_cast<double>(r.macs()) / 1e9,
                static_cast<double>(r.elementwise()) / 1e9);
  os << buf;
  std::snprintf(buf, sizeof buf, "- params: %.3f M\n- GFLOPs (1 per MAC): %.2f\n- arithmetic ops (2 per MAC + elementwise): %.2f G\n",
                static_cast<double>(r.params()) / 1e6, r.gflops(), r.arith_gops());
  os << buf;
  return os.str();
}

}  // namespace rdrnet
