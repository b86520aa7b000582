#pragma once

#include <cstddef>
#include <span>

#include "rdrnet/tensor.hpp"

namespace rdrnet {

// Direct cross-correlation with zero padding, grouped. Accumulates taps in
// (input channel, ky, kx) order per output element, then adds bias.
template <class T>
Tensor4<T> conv2d(const Tensor4<T>& x, const ConvSpec& spec, const ConvWeights<T>& w);

// y = (x - mean) * gamma / sqrt(var + eps) + beta, per channel.
template <class T>
Tensor4<T> batchnorm(const Tensor4<T>& x, const BNParams<T>& bn);

template <class T>
Tensor4<T> relu(const Tensor4<T>& x);

template <class T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b);

// relu(a + b) in one pass.
template <class T>
Tensor4<T> add_relu(const Tensor4<T>& a, const Tensor4<T>& b);

// Half-pixel-center bilinear resize (corners not aligned), edge-clamped.
template <class T>
Tensor4<T> bilinear_resize(const Tensor4<T>& x, std::size_t out_h, std::size_t out_w);

template <class T>
Tensor4<T> bilinear_upsample(const Tensor4<T>& x, std::size_t factor);

// Zero-padded average pooling; divisor is always kernel*kernel.
template <class T>
Tensor4<T> avg_pool(const Tensor4<T>& x, std::size_t kernel, std::size_t stride, std::size_t padding);

template <class T>
Tensor4<T> global_avg_pool(const Tensor4<T>& x);

template <class T>
Tensor4<T> concat_channels(std::span<const Tensor4<T>* const> parts);

}  // namespace rdrnet
