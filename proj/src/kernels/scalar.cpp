#include <algorithm>

#include "kernels/kernels.hpp"
#include "rdrnet/dispatch.hpp"

namespace rdrnet::kernels {

template <class T>
void conv2d_scalar(const ConvArgs<T>& a) {
  const ConvSpec& s = a.spec;
  const std::size_t H = a.x_dims.h, W = a.x_dims.w;
  const std::size_t Ho = a.y_dims.h, Wo = a.y_dims.w;
  const std::size_t cin_g = s.in_channels / s.groups;
  const std::size_t cout_g = s.out_channels / s.groups;
  const std::size_t k = s.kernel;
  const long pad = static_cast<long>(s.padding);
  const long tasks = static_cast<long>(a.x_dims.n * s.out_channels);

#pragma omp parallel for schedule(static) num_threads(num_threads())
  for (long task = 0; task < tasks; ++task) {
    const std::size_t n = static_cast<std::size_t>(task) / s.out_channels;
    const std::size_t oc = static_cast<std::size_t>(task) % s.out_channels;
    const std::size_t g = oc / cout_g;
    const T* wk = a.weight + oc * cin_g * k * k;
    T* out = a.y + (n * s.out_channels + oc) * Ho * Wo;
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        T acc = T(0);
        for (std::size_t ic = 0; ic < cin_g; ++ic) {
          const T* in = a.x + (n * s.in_channels + g * cin_g + ic) * H * W;
          const T* wc = wk + ic * k * k;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const long iy = static_cast<long>(oy * s.stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long ix = static_cast<long>(ox * s.stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<long>(W)) continue;
              acc += wc[ky * k + kx] * in[iy * static_cast<long>(W) + ix];
            }
          }
        }
        out[oy * Wo + ox] = a.bias ? acc + a.bias[oc] : acc;
      }
    }
  }
}

template <class T>
void batchnorm_scalar(const BnArgs<T>& a) {
  const std::size_t plane = a.dims.plane();
  for (std::size_t n = 0; n < a.dims.n; ++n) {
    for (std::size_t c = 0; c < a.dims.c; ++c) {
      const std::size_t base = (n * a.dims.c + c) * plane;
      const T m = a.mean[c], sc = a.scale[c], b = a.beta[c];
      for (std::size_t i = 0; i < plane; ++i) a.y[base + i] = (a.x[base + i] - m) * sc + b;
    }
  }
}

template <class T>
void add_scalar(const T* a, const T* b, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

template <class T>
void add_relu_scalar(const T* a, const T* b, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const T v = a[i] + b[i];
    y[i] = v > T(0) ? v : T(0);
  }
}

template <class T>
void relu_scalar(const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

#define RDRNET_INSTANTIATE(T)                                             \
  template void conv2d_scalar<T>(const ConvArgs<T>&);                     \
  template void batchnorm_scalar<T>(const BnArgs<T>&);                    \
  template void add_scalar<T>(const T*, const T*, T*, std::size_t);       \
  template void add_relu_scalar<T>(const T*, const T*, T*, std::size_t);  \
  template void relu_scalar<T>(const T*, T*, std::size_t);

RDRNET_INSTANTIATE(float)
RDRNET_INSTANTIATE(double)
#undef RDRNET_INSTANTIATE

}  // namespace rdrnet::kernels
