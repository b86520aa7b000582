// Compiled with -mavx2 only (no FMA): mul and add stay separate so every output
// element sees exactly the rounding sequence of the scalar loop nest.
#include <immintrin.h>

#include <algorithm>
#include <vector>

#include "kernels/kernels.hpp"
#include "rdrnet/dispatch.hpp"

namespace rdrnet::kernels {
namespace {

template <class T>
struct Vec;

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr std::size_t lanes = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static reg bcast(const float* p) { return _mm256_broadcast_ss(p); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg max0(reg a) { return _mm256_max_ps(a, _mm256_setzero_ps()); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static void store_n(float* p, reg v, std::size_t n) {
    const __m256i idx = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
    const __m256i mask = _mm256_cmpgt_epi32(_mm256_set1_epi32(static_cast<int>(n)), idx);
    _mm256_maskstore_ps(p, mask, v);
  }
};

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr std::size_t lanes = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static reg bcast(const double* p) { return _mm256_broadcast_sd(p); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg max0(reg a) { return _mm256_max_pd(a, _mm256_setzero_pd()); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static void store_n(double* p, reg v, std::size_t n) {
    const __m256i idx = _mm256_setr_epi64x(0, 1, 2, 3);
    const __m256i mask = _mm256_cmpgt_epi64(_mm256_set1_epi64x(static_cast<long long>(n)), idx);
    _mm256_maskstore_pd(p, mask, v);
  }
};

// Output-channel block held in registers by the conv micro-kernel.
constexpr std::size_t kOcBlock = 8;

}  // namespace

// Input is copied once into a zero-padded, stride-phase-split buffer so that the
// taps for consecutive output columns are contiguous for every (ky, kx):
// padded column c lives at phase (c % stride), index (c / stride).
template <class T>
void conv2d_avx2(const ConvArgs<T>& a) {
  using V = Vec<T>;
  using reg = typename V::reg;
  constexpr std::size_t L = V::lanes;

  const ConvSpec& s = a.spec;
  const std::size_t N = a.x_dims.n, C = a.x_dims.c, H = a.x_dims.h, W = a.x_dims.w;
  const std::size_t Ho = a.y_dims.h, Wo = a.y_dims.w;
  const std::size_t k = s.kernel, st = s.stride, p = s.padding;
  const std::size_t cin_g = s.in_channels / s.groups;
  const std::size_t cout_g = s.out_channels / s.groups;

  const std::size_t Hp = H + 2 * p;
  const std::size_t Wq = (W + 2 * p + st - 1) / st;
  const std::size_t row_stride = st * Wq;
  const std::size_t plane_stride = Hp * row_stride;

  // Slack lets tail vectors read past the last row; those lanes are never stored.
  std::vector<T> xp(N * C * plane_stride + L + k, T(0));
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const T* src = a.x + nc * H * W;
    T* dst = xp.data() + nc * plane_stride;
    for (std::size_t y = 0; y < H; ++y) {
      T* drow = dst + (y + p) * row_stride;
      for (std::size_t x = 0; x < W; ++x) {
        const std::size_t col = x + p;
        drow[(col % st) * Wq + col / st] = src[y * W + x];
      }
    }
  }

  // Weights repacked per output-channel block as [ic][ky][kx][kOcBlock], zero-filled
  // past the group's last output channel.
  const std::size_t n_blocks = (cout_g + kOcBlock - 1) / kOcBlock;
  const std::size_t taps = cin_g * k * k;
  std::vector<T> wp(s.groups * n_blocks * taps * kOcBlock, T(0));
  for (std::size_t g = 0; g < s.groups; ++g) {
    for (std::size_t b = 0; b < n_blocks; ++b) {
      T* dst = wp.data() + (g * n_blocks + b) * taps * kOcBlock;
      for (std::size_t j = 0; j < kOcBlock && b * kOcBlock + j < cout_g; ++j) {
        const std::size_t oc = g * cout_g + b * kOcBlock + j;
        const T* src = a.weight + oc * taps;
        for (std::size_t t = 0; t < taps; ++t) dst[t * kOcBlock + j] = src[t];
      }
    }
  }

  const long tasks = static_cast<long>(N * s.groups * n_blocks);
#pragma omp parallel for schedule(static) num_threads(num_threads())
  for (long task = 0; task < tasks; ++task) {
    const std::size_t n = static_cast<std::size_t>(task) / (s.groups * n_blocks);
    const std::size_t g = (static_cast<std::size_t>(task) / n_blocks) % s.groups;
    const std::size_t b = static_cast<std::size_t>(task) % n_blocks;
    const std::size_t oc0 = g * cout_g + b * kOcBlock;
    const std::size_t valid = std::min(kOcBlock, cout_g - b * kOcBlock);
    const T* wblk = wp.data() + (g * n_blocks + b) * taps * kOcBlock;
    const T* xbase = xp.data() + (n * C + g * cin_g) * plane_stride;

    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox0 = 0; ox0 < Wo; ox0 += L) {
        reg acc[kOcBlock];
#pragma GCC unroll 8
        for (std::size_t j = 0; j < kOcBlock; ++j) acc[j] = V::zero();

        const T* wptr = wblk;
        for (std::size_t ic = 0; ic < cin_g; ++ic) {
          const T* plane = xbase + ic * plane_stride;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const T* row = plane + (oy * st + ky) * row_stride + ox0;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const reg xv = V::load(row + (kx % st) * Wq + kx / st);
#pragma GCC unroll 8
              for (std::size_t j = 0; j < kOcBlock; ++j)
                acc[j] = V::add(acc[j], V::mul(V::bcast(wptr + j), xv));
              wptr += kOcBlock;
            }
          }
        }

        const std::size_t nx = std::min(L, Wo - ox0);
        for (std::size_t j = 0; j < valid; ++j) {
          const std::size_t oc = oc0 + j;
          const reg v = a.bias ? V::add(acc[j], V::set1(a.bias[oc])) : acc[j];
          T* out = a.y + ((n * s.out_channels + oc) * Ho + oy) * Wo + ox0;
          if (nx == L)
            V::store(out, v);
          else
            V::store_n(out, v, nx);
        }
      }
    }
  }
}

template <class T>
void batchnorm_avx2(const BnArgs<T>& a) {
  using V = Vec<T>;
  constexpr std::size_t L = V::lanes;
  const std::size_t plane = a.dims.plane();
  for (std::size_t n = 0; n < a.dims.n; ++n) {
    for (std::size_t c = 0; c < a.dims.c; ++c) {
      const std::size_t base = (n * a.dims.c + c) * plane;
      const T* x = a.x + base;
      T* y = a.y + base;
      const auto m = V::set1(a.mean[c]), sc = V::set1(a.scale[c]), bt = V::set1(a.beta[c]);
      std::size_t i = 0;
      for (; i + L <= plane; i += L) V::store(y + i, V::add(V::mul(V::sub(V::load(x + i), m), sc), bt));
      for (; i < plane; ++i) y[i] = (x[i] - a.mean[c]) * a.scale[c] + a.beta[c];
    }
  }
}

template <class T>
void add_avx2(const T* a, const T* b, T* y, std::size_t n) {
  using V = Vec<T>;
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes) V::store(y + i, V::add(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

template <class T>
void add_relu_avx2(const T* a, const T* b, T* y, std::size_t n) {
  using V = Vec<T>;
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes)
    V::store(y + i, V::max0(V::add(V::load(a + i), V::load(b + i))));
  for (; i < n; ++i) {
    const T v = a[i] + b[i];
    y[i] = v > T(0) ? v : T(0);
  }
}

template <class T>
void relu_avx2(const T* x, T* y, std::size_t n) {
  using V = Vec<T>;
  std::size_t i = 0;
  for (; i + V::lanes <= n; i += V::lanes) V::store(y + i, V::max0(V::load(x + i)));
  for (; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

#define RDRNET_INSTANTIATE(T)                                           \
  template void conv2d_avx2<T>(const ConvArgs<T>&);                     \
  template void batchnorm_avx2<T>(const BnArgs<T>&);                    \
  template void add_avx2<T>(const T*, const T*, T*, std::size_t);       \
  template void add_relu_avx2<T>(const T*, const T*, T*, std::size_t);  \
  template void relu_avx2<T>(const T*, T*, std::size_t);

RDRNET_INSTANTIATE(float)
RDRNET_INSTANTIATE(double)
#undef RDRNET_INSTANTIATE

}  // namespace rdrnet::kernels
