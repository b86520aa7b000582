#pragma once

#include <cstddef>

#include "rdrnet/tensor.hpp"

// Internal kernel entry points. Every SIMD kernel must produce bit-identical output
// to its scalar counterpart for finite inputs.
namespace rdrnet::kernels {

template <class T>
struct ConvArgs {
  const T* x;
  Dims x_dims;
  const T* weight;  // (out, in/groups, k, k)
  const T* bias;    // nullptr when absent
  ConvSpec spec;
  T* y;
  Dims y_dims;
};

// Per-channel affine form of an inference batchnorm: y = (x - mean) * scale + beta.
template <class T>
struct BnArgs {
  const T* x;
  Dims dims;
  const T* mean;
  const T* scale;
  const T* beta;
  T* y;
};

template <class T>
void conv2d_scalar(const ConvArgs<T>& a);
template <class T>
void batchnorm_scalar(const BnArgs<T>& a);
template <class T>
void add_scalar(const T* a, const T* b, T* y, std::size_t n);
template <class T>
void add_relu_scalar(const T* a, const T* b, T* y, std::size_t n);
template <class T>
void relu_scalar(const T* x, T* y, std::size_t n);

#if defined(RDRNET_HAVE_AVX2)
template <class T>
void conv2d_avx2(const ConvArgs<T>& a);
template <class T>
void batchnorm_avx2(const BnArgs<T>& a);
template <class T>
void add_avx2(const T* a, const T* b, T* y, std::size_t n);
template <class T>
void add_relu_avx2(const T* a, const T* b, T* y, std::size_t n);
template <class T>
void relu_avx2(const T* x, T* y, std::size_t n);
#endif

}  // namespace rdrnet::kernels
