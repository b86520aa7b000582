#include "rdrnet/reparam.hpp"

#include <cmath>

namespace rdrnet {

template <class T>
void RBParams<T>::check() const {
  const ConvSpec& s = conv3.spec;
  if (s.kernel != 3 || s.padding != 1 || s.groups != 1)
    throw ContractError("RB main path must be a dense 3x3 conv with padding 1: " + to_string(s));
  if (s.stride != 1 && s.stride != 2) throw ContractError("RB stride must be 1 or 2");
  if (residual && (s.stride != 1 || s.in_channels != s.out_channels))
    throw ContractError("RB residual path requires stride 1 and in == out");
  if (!residual && residual_bn)
    throw ContractError("RB residual BN present without a residual path");
  for (std::size_t i = 0; i < pointwise.size(); ++i) {
    const ConvSpec& p = pointwise[i].spec;
    if (p.kernel != 1 || p.padding != 0 || p.groups != 1)
      throw ContractError("RB pointwise conv must be 1x1 without padding");
    const std::size_t want_stride = i == 0 ? s.stride : 1;
    if (p.stride != want_stride)
      throw ContractError("RB pointwise conv " + std::to_string(i) + " has stride " + std::to_string(p.stride) +
                          ", expected " + std::to_string(want_stride));
    const std::size_t want_in = i == 0 ? s.in_channels : pointwise[i - 1].spec.out_channels;
    if (p.in_channels != want_in) throw DimensionError("pointwise.in_channels", want_in, p.in_channels);
  }
  if (!pointwise.empty() && pointwise.back().spec.out_channels != s.out_channels)
    throw DimensionError("pointwise.out_channels", s.out_channels, pointwise.back().spec.out_channels);
}

namespace reparam {

template <class T>
FusedConv<T> fuse_conv_bn(const ConvSpec& spec, const ConvWeights<T>& w, const BNParams<T>& bn) {
  spec.validate();
  w.check(spec);
  if (bn.channels() != spec.out_channels)
    throw DimensionError("bn.channels", spec.out_channels, bn.channels(), "fuse_conv_bn");
  bn.check(spec.out_channels);

  FusedConv<T> out{spec, {Tensor4<T>(spec.weight_dims()), std::vector<T>(spec.out_channels)}};
  const std::size_t per_oc = spec.weight_count() / spec.out_channels;
  const auto src = w.weight.data();
  auto dst = out.weights.weight.data();
  for (std::size_t oc = 0; oc < spec.out_channels; ++oc) {
    const T t = bn.gamma[oc] / std::sqrt(bn.var[oc] + bn.eps);
    for (std::size_t i = 0; i < per_oc; ++i) dst[oc * per_oc + i] = t * src[oc * per_oc + i];
    const T b = w.has_bias() ? w.bias[oc] : T(0);
    out.weights.bias[oc] = (b - bn.mean[oc]) * t + bn.beta[oc];
  }
  return out;
}

template <class T>
FusedConv<T> merge_serial_1x1(const ConvSpec& spec1, const ConvWeights<T>& w1, const ConvSpec& spec2,
                              const ConvWeights<T>& w2) {
  spec1.validate();
  spec2.validate();
  w1.check(spec1);
  w2.check(spec2);
  if (spec1.kernel != 1 || spec2.kernel != 1) throw ContractError("merge_serial_1x1 needs two 1x1 convs");
  if (spec1.groups != 1 || spec2.groups != 1) throw ContractError("merge_serial_1x1 needs dense convs");
  if (spec2.stride != 1)
    throw ContractError("merge_serial_1x1: second conv must have stride 1, got " + std::to_string(spec2.stride));
  if (spec2.padding != 0) throw ContractError("merge_serial_1x1: second conv must not pad");
  if (spec1.out_channels != spec2.in_channels)
    throw DimensionError("channels", spec1.out_channels, spec2.in_channels, "merge_serial_1x1");

  const std::size_t in = spec1.in_channels, mid = spec1.out_channels, out = spec2.out_channels;
  ConvSpec spec = spec1;
  spec.out_channels = out;
  FusedConv<T> merged{spec, {Tensor4<T>(spec.weight_dims()), std::vector<T>(out)}};
  const auto a = w1.weight.data();
  const auto b = w2.weight.data();
  auto m = merged.weights.weight.data();
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t i = 0; i < in; ++i) {
      T acc = T(0);
      for (std::size_t k = 0; k < mid; ++k) acc += b[o * mid + k] * a[k * in + i];
      m[o * in + i] = acc;
    }
    T bias = T(0);
    if (w1.has_bias())
      for (std::size_t k = 0; k < mid; ++k) bias += b[o * mid + k] * w1.bias[k];
    merged.weights.bias[o] = bias + (w2.has_bias() ? w2.bias[o] : T(0));
  }
  return merged;
}

template <class T>
FusedConv<T> embed_1x1_into_3x3(const ConvSpec& spec, const ConvWeights<T>& w) {
  spec.validate();
  w.check(spec);
  if (spec.kernel != 1) throw ContractError("embed_1x1_into_3x3 needs a 1x1 conv, got " + to_string(spec));
  ConvSpec s3 = spec;
  s3.kernel = 3;
  s3.padding = spec.padding + 1;
  FusedConv<T> out{s3, {Tensor4<T>(s3.weight_dims()), std::vector<T>(spec.out_channels, T(0))}};
  const auto src = w.weight.data();
  auto dst = out.weights.weight.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i * 9 + 4] = src[i];
  if (w.has_bias()) out.weights.bias = w.bias;
  return out;
}

template <class T>
FusedConv<T> identity_to_conv(std::size_t channels_in, std::size_t channels_out) {
  if (channels_in == 0 || channels_in > channels_out)
    throw ContractError("identity_to_conv requires 0 < channels_in <= channels_out");
  const ConvSpec spec = conv1x1(channels_in, channels_out);
  FusedConv<T> out{spec, {Tensor4<T>(spec.weight_dims()), std::vector<T>(channels_out, T(0))}};
  for (std::size_t i = 0; i < channels_in; ++i) out.weights.weight.at(i, i, 0, 0) = T(1);
  return out;
}

template <class T>
FusedConv<T> sum_parallel(std::span<const FusedConv<T>> branches) {
  if (branches.empty()) throw ContractError("sum_parallel of zero branches");
  const ConvSpec& spec = branches.front().spec;
  FusedConv<T> out{spec, {Tensor4<T>(spec.weight_dims()), std::vector<T>(spec.out_channels, T(0))}};
  auto dst = out.weights.weight.data();
  for (const auto& br : branches) {
    if (!(br.spec == spec))
      throw ContractError("sum_parallel spec mismatch: " + to_string(br.spec) + " vs " + to_string(spec));
    br.weights.check(spec);
    const auto src = br.weights.weight.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
    if (br.weights.has_bias())
      for (std::size_t o = 0; o < spec.out_channels; ++o) out.weights.bias[o] += br.weights.bias[o];
  }
  return out;
}

template <class T>
FusedConv<T> reparameterize_rb(const RBParams<T>& rb) {
  rb.check();
  std::vector<FusedConv<T>> branches;
  branches.push_back(fuse_conv_bn(rb.conv3.spec, rb.conv3.weights, rb.conv3.bn));

  if (!rb.pointwise.empty()) {
    const auto& first = rb.pointwise.front();
    FusedConv<T> chain = fuse_conv_bn(first.spec, first.weights, first.bn);
    for (std::size_t i = 1; i < rb.pointwise.size(); ++i) {
      const auto& pw = rb.pointwise[i];
      const FusedConv<T> next = fuse_conv_bn(pw.spec, pw.weights, pw.bn);
      chain = merge_serial_1x1(chain.spec, chain.weights, next.spec, next.weights);
    }
    branches.push_back(embed_1x1_into_3x3(chain.spec, chain.weights));
  }

  if (rb.residual) {
    const std::size_t c = rb.conv3.spec.in_channels;
    FusedConv<T> id = identity_to_conv<T>(c, rb.conv3.spec.out_channels);
    if (rb.residual_bn) id = fuse_conv_bn(id.spec, id.weights, *rb.residual_bn);
    branches.push_back(embed_1x1_into_3x3(id.spec, id.weights));
  }
  return sum_parallel<T>(branches);
}

template <class T>
FusedConv<T> reparameterize_rppm_pair(const ConvSpec& spec, const ConvWeights<T>& w_a, const BNParams<T>& bn_a,
                                      const ConvWeights<T>& w_b, const BNParams<T>& bn_b) {
  const FusedConv<T> pair[2] = {fuse_conv_bn(spec, w_a, bn_a), fuse_conv_bn(spec, w_b, bn_b)};
  return sum_parallel<T>(pair);
}

#define RDRNET_INSTANTIATE(T)                                                                                  \
  template FusedConv<T> fuse_conv_bn(const ConvSpec&, const ConvWeights<T>&, const BNParams<T>&);               \
  template FusedConv<T> merge_serial_1x1(const ConvSpec&, const ConvWeights<T>&, const ConvSpec&,               \
                                         const ConvWeights<T>&);                                                \
  template FusedConv<T> embed_1x1_into_3x3(const ConvSpec&, const ConvWeights<T>&);                             \
  template FusedConv<T> identity_to_conv(std::size_t, std::size_t);                                             \
  template FusedConv<T> sum_parallel(std::span<const FusedConv<T>>);                                            \
  template FusedConv<T> reparameterize_rb(const RBParams<T>&);                                                  \
  template FusedConv<T> reparameterize_rppm_pair(const ConvSpec&, const ConvWeights<T>&, const BNParams<T>&,    \
                                                 const ConvWeights<T>&, const BNParams<T>&);

RDRNET_INSTANTIATE(float)
RDRNET_INSTANTIATE(double)
#undef RDRNET_INSTANTIATE

}  // namespace reparam

template struct RBParams<float>;
template struct RBParams<double>;

}  // namespace rdrnet
