#include "rdrnet/blocks.hpp"

#include "bn_calibration.hpp"

namespace rdrnet {

using detail::apply_bn;

template <class T>
Tensor4<T> ConvLayer<T>::forward(const Tensor4<T>& x) const {
  Tensor4<T> y = conv2d(x, spec, weights);
  return bn ? apply_bn(y, *bn) : y;
}

template <class T>
ConvLayer<T> ConvLayer<T>::folded() const {
  if (!bn) return *this;
  return to_layer(reparam::fuse_conv_bn(spec, weights, *bn));
}

template <class T>
std::size_t ConvLayer<T>::param_count() const {
  return spec.weight_count() + weights.bias.size() + (bn ? 2 * bn->channels() : 0);
}

// ---------------------------------------------------------------------------

template <class T>
Tensor4<T> rb_forward_train(const Tensor4<T>& x, const RBParams<T>& p) {
  const auto conv_bn = [](const Tensor4<T>& in, const ConvBnParams<T>& c) {
    return apply_bn(conv2d(in, c.spec, c.weights), c.bn);
  };
  Tensor4<T> sum = conv_bn(x, p.conv3);
  if (!p.pointwise.empty()) {
    Tensor4<T> t = conv_bn(x, p.pointwise.front());
    for (std::size_t i = 1; i < p.pointwise.size(); ++i) t = conv_bn(t, p.pointwise[i]);
    sum = add(sum, t);
  }
  if (p.residual) return add_relu(sum, p.residual_bn ? apply_bn(x, *p.residual_bn) : x);
  return relu(sum);
}

template <class T>
Tensor4<T> rb_forward_deploy(const Tensor4<T>& x, const FusedConv<T>& fused) {
  return relu(conv2d(x, fused.spec, fused.weights));
}

template <class T>
const ConvSpec& RepBlock<T>::spec() const {
  if (const auto* f = std::get_if<FusedConv<T>>(&form)) return f->spec;
  return std::get<RBParams<T>>(form).conv3.spec;
}

template <class T>
Tensor4<T> RepBlock<T>::forward(const Tensor4<T>& x) const {
  if (const auto* f = std::get_if<FusedConv<T>>(&form)) return rb_forward_deploy(x, *f);
  return rb_forward_train(x, std::get<RBParams<T>>(form));
}

template <class T>
RepBlock<T> RepBlock<T>::reparameterized() const {
  if (is_deploy()) return *this;
  return {reparam::reparameterize_rb(std::get<RBParams<T>>(form))};
}

template <class T>
std::size_t RepBlock<T>::param_count() const {
  if (const auto* f = std::get_if<FusedConv<T>>(&form)) return f->param_count();
  const auto& p = std::get<RBParams<T>>(form);
  const auto count = [](const ConvBnParams<T>& c) {
    return c.spec.weight_count() + c.weights.bias.size() + 2 * c.bn.channels();
  };
  std::size_t total = count(p.conv3);
  for (const auto& pw : p.pointwise) total += count(pw);
  if (p.residual_bn) total += 2 * p.residual_bn->channels();
  return total;
}

template <class T>
std::size_t RepBlock<T>::bn_count() const {
  if (is_deploy()) return 0;
  const auto& p = std::get<RBParams<T>>(form);
  return 1 + p.pointwise.size() + (p.residual_bn ? 1 : 0);
}

// ---------------------------------------------------------------------------

template <class T>
Tensor4<T> Bottleneck<T>::forward(const Tensor4<T>& x) const {
  const Tensor4<T> r = relu(reduce.forward(x));
  const Tensor4<T> m = relu(middle.forward(r));
  const Tensor4<T> e = expand.forward(m);
  if (project) return add_relu(e, project->forward(x));
  return add_relu(e, x);
}

template <class T>
Dims Bottleneck<T>::output_dims(const Dims& in) const {
  const Dims out = expand.output_dims(middle.output_dims(reduce.output_dims(in)));
  const Dims sc = project ? project->output_dims(in) : in;
  if (!(sc == out)) throw DimensionError("bottleneck.shortcut", "shortcut " + to_string(sc) + " vs main " + to_string(out));
  return out;
}

template <class T>
Bottleneck<T> Bottleneck<T>::folded() const {
  Bottleneck out{reduce.folded(), middle.folded(), expand.folded(), std::nullopt};
  if (project) out.project = project->folded();
  return out;
}

template <class T>
std::size_t Bottleneck<T>::param_count() const {
  return reduce.param_count() + middle.param_count() + expand.param_count() + (project ? project->param_count() : 0);
}

template <class T>
std::size_t Bottleneck<T>::bn_count() const {
  return reduce.bn_count() + middle.bn_count() + expand.bn_count() + (project ? project->bn_count() : 0);
}

// ---------------------------------------------------------------------------

template <class T>
std::pair<Tensor4<T>, Tensor4<T>> BilateralFusion<T>::forward(const Tensor4<T>& xs, const Tensor4<T>& xd) const {
  if (d2s.empty()) throw ContractError("bilateral fusion needs at least one detail-to-semantic conv");
  Tensor4<T> down = d2s.front().forward(xd);
  for (std::size_t i = 1; i < d2s.size(); ++i) down = d2s[i].forward(relu(down));
  if (!(down.dims() == xs.dims()))
    throw DimensionError("fusion.semantic_scale", "detail-to-semantic output " + to_string(down.dims()) +
                                                      " does not match semantic features " + to_string(xs.dims()));
  Tensor4<T> up = bilinear_upsample(s2d.forward(xs), up_factor);
  if (!(up.dims() == xd.dims()))
    throw DimensionError("fusion.detail_scale", "semantic-to-detail output " + to_string(up.dims()) +
                                                    " does not match detail features " + to_string(xd.dims()));
  return {add_relu(xs, down), add_relu(xd, up)};
}

template <class T>
BilateralFusion<T> BilateralFusion<T>::folded() const {
  BilateralFusion out{s2d.folded(), up_factor, {}};
  for (const auto& c : d2s) out.d2s.push_back(c.folded());
  return out;
}

template <class T>
std::size_t BilateralFusion<T>::param_count() const {
  std::size_t total = s2d.param_count();
  for (const auto& c : d2s) total += c.param_count();
  return total;
}

template <class T>
std::size_t BilateralFusion<T>::bn_count() const {
  std::size_t total = s2d.bn_count();
  for (const auto& c : d2s) total += c.bn_count();
  return total;
}

// ---------------------------------------------------------------------------

template <class T>
Tensor4<T> PyramidPooling<T>::forward(const Tensor4<T>& x) const {
  const Tensor4<T> s0 = relu(scale0.forward(x));
  const std::size_t h = s0.dims().h, w = s0.dims().w;

  std::array<Tensor4<T>, 4> levels;
  for (std::size_t i = 0; i < 4; ++i) {
    const Tensor4<T> pooled_x = i < kRppmWindows.size()
                                    ? avg_pool(x, kRppmWindows[i].kernel, kRppmWindows[i].stride,
                                               kRppmWindows[i].kernel / 2)
                                    : global_avg_pool(x);
    levels[i] = add(bilinear_resize(relu(pooled[i].forward(pooled_x)), h, w), s0);
  }
  const Tensor4<T>* level_ptrs[4] = {&levels[0], &levels[1], &levels[2], &levels[3]};
  const Tensor4<T> cat = concat_channels<T>(level_ptrs);

  Tensor4<T> g;
  if (const auto* pair = std::get_if<GroupedPair<T>>(&grouped)) {
    const Tensor4<T> ya = apply_bn(conv2d(cat, pair->a.spec, pair->a.weights), pair->a.bn);
    const Tensor4<T> yb = apply_bn(conv2d(cat, pair->b.spec, pair->b.weights), pair->b.bn);
    g = add_relu(ya, yb);
  } else {
    const auto& f = std::get<FusedConv<T>>(grouped);
    g = relu(conv2d(cat, f.spec, f.weights));
  }
  const Tensor4<T>* tail[2] = {&s0, &g};
  return add(compress.forward(concat_channels<T>(tail)), shortcut.forward(x));
}

template <class T>
Dims PyramidPooling<T>::output_dims(const Dims& in) const {
  const Dims s0 = scale0.output_dims(in);
  const Dims out = compress.output_dims({in.n, compress.spec.in_channels, s0.h, s0.w});
  const Dims sc = shortcut.output_dims(in);
  if (!(sc == out)) throw DimensionError("rppm.shortcut", "shortcut " + to_string(sc) + " vs " + to_string(out));
  return out;
}

template <class T>
PyramidPooling<T> PyramidPooling<T>::reparameterized() const {
  PyramidPooling out;
  out.scale0 = scale0.folded();
  for (std::size_t i = 0; i < 4; ++i) out.pooled[i] = pooled[i].folded();
  if (const auto* pair = std::get_if<GroupedPair<T>>(&grouped))
    out.grouped = reparam::reparameterize_rppm_pair(pair->a.spec, pair->a.weights, pair->a.bn, pair->b.weights,
                                                    pair->b.bn);
  else
    out.grouped = grouped;
  out.compress = compress.folded();
  out.shortcut = shortcut.folded();
  return out;
}

template <class T>
std::size_t PyramidPooling<T>::param_count() const {
  std::size_t total = scale0.param_count() + compress.param_count() + shortcut.param_count();
  for (const auto& p : pooled) total += p.param_count();
  if (const auto* pair = std::get_if<GroupedPair<T>>(&grouped)) {
    for (const auto* c : {&pair->a, &pair->b})
      total += c->spec.weight_count() + c->weights.bias.size() + 2 * c->bn.channels();
  } else {
    total += std::get<FusedConv<T>>(grouped).param_count();
  }
  return total;
}

template <class T>
std::size_t PyramidPooling<T>::bn_count() const {
  std::size_t total = scale0.bn_count() + compress.bn_count() + shortcut.bn_count();
  for (const auto& p : pooled) total += p.bn_count();
  if (mode() == RppmMode::Train) total += 2;
  return total;
}

template <class T>
Tensor4<T> rppm_forward(const Tensor4<T>& x, const PyramidPooling<T>& p, RppmMode mode) {
  if (p.mode() != mode)
    throw ContractError(std::string("rppm_forward: parameters are in ") +
                        (p.mode() == RppmMode::Train ? "train" : "deploy") + " form");
  return p.forward(x);
}

// ---------------------------------------------------------------------------

template <class T>
Tensor4<T> SegHead<T>::forward(const Tensor4<T>& x, std::size_t out_h, std::size_t out_w) const {
  return bilinear_resize(classifier.forward(relu(conv3.forward(x))), out_h, out_w);
}

#define RDRNET_INSTANTIATE(T)                                                               \
  template struct ConvLayer<T>;                                                             \
  template struct RepBlock<T>;                                                              \
  template struct Bottleneck<T>;                                                            \
  template struct BilateralFusion<T>;                                                       \
  template struct PyramidPooling<T>;                                                        \
  template struct SegHead<T>;                                                               \
  template Tensor4<T> rb_forward_train(const Tensor4<T>&, const RBParams<T>&);              \
  template Tensor4<T> rb_forward_deploy(const Tensor4<T>&, const FusedConv<T>&);            \
  template Tensor4<T> rppm_forward(const Tensor4<T>&, const PyramidPooling<T>&, RppmMode);

RDRNET_INSTANTIATE(float)
RDRNET_INSTANTIATE(double)
#undef RDRNET_INSTANTIATE

}  // namespace rdrnet
