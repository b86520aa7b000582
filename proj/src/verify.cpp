#include "rdrnet/verify.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "rdrnet/metrics.hpp"

namespace rdrnet {
namespace {

template <class T>
double max_abs_diff(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (!(a.dims() == b.dims())) throw DimensionError("verify", "outputs differ in shape");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
  return m;
}

template <class T>
Tensor4<T> random_input(const Dims& d, std::mt19937_64& rng) {
  Tensor4<T> x(d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : x.data()) v = static_cast<T>(normal(rng));
  return x;
}

template <class T>
void bump(std::vector<T>& bias) {
  for (auto& b : bias) b += T(1);
}

template <class T>
void bump(ConvLayer<T>& l) {
  bump(l.weights.bias);
}

// Walks the paired train/deploy networks block by block.
template <class T>
struct BlockWalker {
  const Network<T>& tr;
  const Network<T>& dp;
  std::mt19937_64& rng;
  std::vector<BlockDiff>& out;

  void check(const std::string& name, const Dims& in, const std::function<Tensor4<T>(const Network<T>&, const Tensor4<T>&)>& f) {
    const Tensor4<T> x = random_input<T>(in, rng);
    out.push_back({name, in, max_abs_diff(f(tr, x), f(dp, x))});
  }

  Dims rbs(const std::string& prefix, std::vector<RepBlock<T>> Network<T>::*member, Dims d) {
    for (std::size_t i = 0; i < (tr.*member).size(); ++i) {
      check(prefix + ".block" + std::to_string(i), d,
            [&](const Network<T>& n, const Tensor4<T>& x) { return (n.*member)[i].forward(x); });
      d = (tr.*member)[i].output_dims(d);
    }
    return d;
  }

  Dims bbs(const std::string& prefix, std::vector<Bottleneck<T>> Network<T>::*member, Dims d) {
    for (std::size_t i = 0; i < (tr.*member).size(); ++i) {
      check(prefix + ".block" + std::to_string(i), d,
            [&](const Network<T>& n, const Tensor4<T>& x) { return (n.*member)[i].forward(x); });
      d = (tr.*member)[i].output_dims(d);
    }
    return d;
  }

  void fusion(const std::string& name, std::optional<BilateralFusion<T>> Network<T>::*member, const Dims& s, const Dims& d) {
    if (!(tr.*member)) return;
    const Tensor4<T> xs = random_input<T>(s, rng);
    const Tensor4<T> xd = random_input<T>(d, rng);
    const auto a = (tr.*member)->forward(xs, xd);
    const auto b = (dp.*member)->forward(xs, xd);
    out.push_back({name, s, std::max(max_abs_diff(a.first, b.first), max_abs_diff(a.second, b.second))});
  }
};

}  // namespace

template <class T>
void inject_fault(Network<T>& net, const std::string& block) {
  const auto rb_list = [&](const std::string& prefix, std::vector<RepBlock<T>>& v) -> bool {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (prefix + ".block" + std::to_string(i) != block) continue;
      if (auto* f = std::get_if<FusedConv<T>>(&v[i].form)) bump(f->weights.bias);
      else bump(std::get<RBParams<T>>(v[i].form).conv3.bn.beta);
      return true;
    }
    return false;
  };
  const auto bb_list = [&](const std::string& prefix, std::vector<Bottleneck<T>>& v) -> bool {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (prefix + ".block" + std::to_string(i) != block) continue;
      if (v[i].expand.bn) bump(v[i].expand.bn->beta);
      else bump(v[i].expand);
      return true;
    }
    return false;
  };
  if (rb_list("stage1", net.stage1) || rb_list("stage2", net.stage2) || rb_list("stage3", net.stage3) ||
      rb_list("stage4.semantic", net.stage4_semantic) || rb_list("stage4.detail", net.stage4_detail) ||
      rb_list("stage5.semantic", net.stage5_semantic) || rb_list("stage5.detail", net.stage5_detail) ||
      bb_list("stage6.semantic", net.stage6_semantic) || bb_list("stage6.detail", net.stage6_detail))
    return;
  if (block == "rppm" && net.rppm) {
    if (auto* f = std::get_if<FusedConv<T>>(&net.rppm->grouped)) bump(f->weights.bias);
    else bump(std::get<GroupedPair<T>>(net.rppm->grouped).a.bn.beta);
    return;
  }
  if (block == "head") {
    bump(net.head.classifier);
    return;
  }
  throw ContractError("no block named '" + block + "' to inject a fault into");
}

template <class T>
VerifyReport verify_network(const Network<T>& train, const VerifyOptions& o) {
  if (train.structure != Structure::Train) throw ContractError("verify needs a train-structure network");
  Network<T> deploy = reparameterize_network(train);
  if (o.inject_fault) inject_fault(deploy, *o.inject_fault);

  VerifyReport r;
  r.variant = train.def.variant;
  r.precision = sizeof(T) == 4 ? "f32" : "f64";
  r.tolerance = o.tolerance > 0 ? o.tolerance : (sizeof(T) == 4 ? kTolF32 : kTolF64);
  r.trials = o.trials;

  std::mt19937_64 rng(o.seed ^ 0x5851f42d4c957f2dull);
  const Dims input{1, train.def.input_channels, o.height, o.width};
  const ForwardTrace shapes = infer_stage_shapes(train, input);
  const auto shape = [&](const char* name) {
    for (const auto& s : shapes)
      if (s.name == name) return s.dims;
    throw ContractError(name);
  };

  BlockWalker<T> w{train, deploy, rng, r.blocks};
  Dims d = w.rbs("stage1", &Network<T>::stage1, input);
  d = w.rbs("stage2", &Network<T>::stage2, d);
  d = w.rbs("stage3", &Network<T>::stage3, d);
  w.rbs("stage4.semantic", &Network<T>::stage4_semantic, d);
  w.rbs("stage4.detail", &Network<T>::stage4_detail, d);
  w.fusion("fusion1", &Network<T>::fusion1, shape("stage4.semantic"), shape("stage4.detail"));
  w.rbs("stage5.semantic", &Network<T>::stage5_semantic, shape("stage4.semantic"));
  w.rbs("stage5.detail", &Network<T>::stage5_detail, shape("stage4.detail"));
  w.fusion("fusion2", &Network<T>::fusion2, shape("stage5.semantic"), shape("stage5.detail"));
  w.bbs("stage6.semantic", &Network<T>::stage6_semantic, shape("stage5.semantic"));
  w.bbs("stage6.detail", &Network<T>::stage6_detail, shape("stage5.detail"));
  if (train.rppm)
    w.check("rppm", shape("stage6.semantic"), [](const Network<T>& n, const Tensor4<T>& x) { return n.rppm->forward(x); });
  else
    w.check("context_proj", shape("stage6.semantic"),
            [](const Network<T>& n, const Tensor4<T>& x) { return n.context_proj->forward(x); });
  w.check("head", shape("stage6.detail"),
          [&](const Network<T>& n, const Tensor4<T>& x) { return n.head.forward(x, o.height, o.width); });

  for (std::size_t t = 0; t < o.trials; ++t) {
    const Tensor4<T> x = random_input<T>(input, rng);
    const Tensor4<T> a = forward(train, x).logits;
    const Tensor4<T> b = forward(deploy, x).logits;
    r.end_to_end = std::max(r.end_to_end, max_abs_diff(a, b));
    const LabelMap la = argmax(a), lb = argmax(b);
    r.argmax_total += la.size();
    for (std::size_t i = 0; i < la.size(); ++i) r.argmax_mismatch += la.data[i] != lb.data[i];
  }

  double worst = -1.0;
  for (const auto& b : r.blocks) {
    if (b.max_abs > r.tolerance && b.max_abs > worst) {
      worst = b.max_abs;
      r.failing_block = b.name;
    }
  }
  if (r.failing_block.empty() && !(r.end_to_end <= r.tolerance)) r.failing_block = "end_to_end";
  r.passed = r.failing_block.empty();
  return r;
}

template <class T>
VerifyReport verify_equivalence(const NetworkDef& def, const VerifyOptions& o) {
  return verify_network(build_random<T>(def, {o.seed}), o);
}

template VerifyReport verify_network<float>(const Network<float>&, const VerifyOptions&);
template VerifyReport verify_network<double>(const Network<double>&, const VerifyOptions&);
template VerifyReport verify_equivalence<float>(const NetworkDef&, const VerifyOptions&);
template VerifyReport verify_equivalence<double>(const NetworkDef&, const VerifyOptions&);
template void inject_fault<float>(Network<float>&, const std::string&);
template void inject_fault<double>(Network<double>&, const std::string&);

std::string format_verify(const VerifyReport& r) {
  std::ostringstream os;
  char buf[256];
  os << "variant " << r.variant << ", precision " << r.precision << "\n";
  for (const auto& b : r.blocks) {
    std::snprintf(buf, sizeof buf, "  %-26s %-22s max_abs %.3e%s\n", b.name.c_str(), to_string(b.input).c_str(),
                  b.max_abs, b.max_abs > r.tolerance ? "  OVER TOLERANCE" : "");
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "end-to-end over %zu inputs: max_abs %.3e (tolerance %.1e), argmax agreement %.6f\n",
                r.trials, r.end_to_end, r.tolerance,
                r.argmax_total ? 1.0 - static_cast<double>(r.argmax_mismatch) / static_cast<double>(r.argmax_total) : 1.0);
  os << buf;
  if (r.passed) os << "result: PASS\n";
  else os << "result: FAIL (" << r.failing_block << ")\n";
  return os.str();
}

}  // namespace rdrnet
