#include "rdrnet/tensor.hpp"

#include <cmath>

namespace rdrnet {

std::size_t dtype_size(DType dtype) { return dtype == DType::F32 ? 4 : 8; }

const char* dtype_name(DType dtype) { return dtype == DType::F32 ? "f32" : "f64"; }

std::string to_string(const Dims& d) {
  return "(" + std::to_string(d.n) + ", " + std::to_string(d.c) + ", " + std::to_string(d.h) + ", " +
         std::to_string(d.w) + ")";
}

void ConvSpec::validate() const {
  if (in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 || groups == 0)
    throw ContractError("conv spec has a zero field: " + to_string(*this));
  if (in_channels % groups != 0 || out_channels % groups != 0)
    throw ContractError("channels not divisible by groups: " + to_string(*this));
}

std::size_t ConvSpec::output_size(std::size_t in, const char* axis) const {
  if (in + 2 * padding < kernel)
    throw DimensionError(axis, "input size " + std::to_string(in) + " too small for kernel " +
                                   std::to_string(kernel) + " with padding " + std::to_string(padding));
  return (in + 2 * padding - kernel) / stride + 1;
}

Dims ConvSpec::output_dims(const Dims& in) const {
  if (in.c != in_channels) throw DimensionError("channels", in_channels, in.c, "conv2d");
  return {in.n, out_channels, output_size(in.h, "height"), output_size(in.w, "width")};
}

std::string to_string(const ConvSpec& s) {
  return "conv(" + std::to_string(s.in_channels) + "->" + std::to_string(s.out_channels) +
         ", k=" + std::to_string(s.kernel) + ", s=" + std::to_string(s.stride) +
         ", p=" + std::to_string(s.padding) + ", g=" + std::to_string(s.groups) + ")";
}

ConvSpec conv3x3(std::size_t in, std::size_t out, std::size_t stride, std::size_t groups) {
  return {in, out, 3, stride, 1, groups};
}

ConvSpec conv1x1(std::size_t in, std::size_t out, std::size_t stride) {
  return {in, out, 1, stride, 0, 1};
}

template <class T>
void ConvWeights<T>::check(const ConvSpec& spec) const {
  const Dims want = spec.weight_dims();
  const Dims& got = weight.dims();
  if (got.n != want.n) throw DimensionError("weight.out_channels", want.n, got.n);
  if (got.c != want.c) throw DimensionError("weight.in_channels_per_group", want.c, got.c);
  if (got.h != want.h) throw DimensionError("weight.kernel_h", want.h, got.h);
  if (got.w != want.w) throw DimensionError("weight.kernel_w", want.w, got.w);
  if (has_bias() && bias.size() != spec.out_channels)
    throw DimensionError("bias", spec.out_channels, bias.size());
}

template <class T>
void BNParams<T>::check(std::size_t c) const {
  if (gamma.size() != c) throw DimensionError("bn.gamma", c, gamma.size());
  if (beta.size() != c) throw DimensionError("bn.beta", c, beta.size());
  if (mean.size() != c) throw DimensionError("bn.mean", c, mean.size());
  if (var.size() != c) throw DimensionError("bn.var", c, var.size());
  if (!(eps >= T(0))) throw ContractError("bn eps must be non-negative");
  for (std::size_t i = 0; i < c; ++i) {
    if (!(var[i] >= T(0)))
      throw ContractError("bn var is negative at channel " + std::to_string(i));
    if (!(var[i] + eps > T(0)))
      throw ContractError("bn var + eps is zero at channel " + std::to_string(i));
  }
}

template <class T>
BNParams<T> BNParams<T>::identity(std::size_t channels, T eps) {
  BNParams bn;
  bn.gamma.assign(channels, T(1));
  bn.beta.assign(channels, T(0));
  bn.mean.assign(channels, T(0));
  bn.var.assign(channels, T(1) - eps);
  bn.eps = eps;
  return bn;
}

template struct ConvWeights<float>;
template struct ConvWeights<double>;
template struct BNParams<float>;
template struct BNParams<double>;

}  // namespace rdrnet
