#include "rdrnet/ops.hpp"

#include <algorithm>
#include <cmath>

#include "kernels/kernels.hpp"
#include "rdrnet/dispatch.hpp"

namespace rdrnet {
namespace {

void require_same_dims(const Dims& a, const Dims& b, const char* op) {
  if (a.n != b.n) throw DimensionError("batch", a.n, b.n, op);
  if (a.c != b.c) throw DimensionError("channels", a.c, b.c, op);
  if (a.h != b.h) throw DimensionError("height", a.h, b.h, op);
  if (a.w != b.w) throw DimensionError("width", a.w, b.w, op);
}

bool use_avx2() {
#if defined(RDRNET_HAVE_AVX2)
  return active_isa() == Isa::Avx2;
#else
  return false;
#endif
}

}  // namespace

template <class T>
Tensor4<T> conv2d(const Tensor4<T>& x, const ConvSpec& spec, const ConvWeights<T>& w) {
  spec.validate();
  w.check(spec);
  const Dims out_dims = spec.output_dims(x.dims());
  Tensor4<T> y(out_dims);
  if (y.empty()) return y;
  const kernels::ConvArgs<T> args{x.data().data(), x.dims(), w.weight.data().data(),
                                  w.has_bias() ? w.bias.data() : nullptr, spec,
                                  y.data().data(), out_dims};
#if defined(RDRNET_HAVE_AVX2)
  if (use_avx2()) {
    kernels::conv2d_avx2(args);
    return y;
  }
#endif
  kernels::conv2d_scalar(args);
  return y;
}

template <class T>
Tensor4<T> batchnorm(const Tensor4<T>& x, const BNParams<T>& bn) {
  if (x.dims().c != bn.channels()) throw DimensionError("channels", bn.channels(), x.dims().c, "batchnorm");
  bn.check(x.dims().c);
  std::vector<T> scale(bn.channels());
  for (std::size_t c = 0; c < scale.size(); ++c) scale[c] = bn.gamma[c] / std::sqrt(bn.var[c] + bn.eps);
  Tensor4<T> y(x.dims());
  const kernels::BnArgs<T> args{x.data().data(), x.dims(), bn.mean.data(), scale.data(), bn.beta.data(),
                                y.data().data()};
#if defined(RDRNET_HAVE_AVX2)
  if (use_avx2()) {
    kernels::batchnorm_avx2(args);
    return y;
  }
#endif
  kernels::batchnorm_scalar(args);
  return y;
}

template <class T>
Tensor4<T> relu(const Tensor4<T>& x) {
  Tensor4<T> y(x.dims());
#if defined(RDRNET_HAVE_AVX2)
  if (use_avx2()) {
    kernels::relu_avx2(x.data().data(), y.data().data(), x.size());
    return y;
  }
#endif
  kernels::relu_scalar(x.data().data(), y.data().data(), x.size());
  return y;
}

template <class T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b) {
  require_same_dims(a.dims(), b.dims(), "add");
  Tensor4<T> y(a.dims());
#if defined(RDRNET_HAVE_AVX2)
  if (use_avx2()) {
    kernels::add_avx2(a.data().data(), b.data().data(), y.data().data(), a.size());
    return y;
  }
#endif
  kernels::add_scalar(a.data().data(), b.data().data(), y.data().data(), a.size());
  return y;
}

template <class T>
Tensor4<T> add_relu(const Tensor4<T>& a, const Tensor4<T>& b) {
  require_same_dims(a.dims(), b.dims(), "add_relu");
  Tensor4<T> y(a.dims());
#if defined(RDRNET_HAVE_AVX2)
  if (use_avx2()) {
    kernels::add_relu_avx2(a.data().data(), b.data().data(), y.data().data(), a.size());
    return y;
  }
#endif
  kernels::add_relu_scalar(a.data().data(), b.data().data(), y.data().data(), a.size());
  return y;
}

namespace {

struct Tap {
  std::size_t i0, i1;
  double l0, l1;
};

// Source index/weights per destination index, half-pixel centers, clamped at 0.
std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = scale * (static_cast<double>(d) + 0.5) - 0.5;
    if (src < 0) src = 0;
    const std::size_t i0 = std::min(static_cast<std::size_t>(src), in - 1);
    const std::size_t i1 = i0 + 1 < in ? i0 + 1 : i0;
    const double l1 = src - static_cast<double>(i0);
    taps[d] = {i0, i1, 1.0 - l1, l1};
  }
  return taps;
}

}  // namespace

template <class T>
Tensor4<T> bilinear_resize(const Tensor4<T>& x, std::size_t out_h, std::size_t out_w) {
  const Dims& d = x.dims();
  if (d.h == 0 || d.w == 0) throw DimensionError("spatial", "cannot resize an empty plane");
  if (out_h == 0 || out_w == 0) throw DimensionError("spatial", "resize target must be positive");
  const auto ty = bilinear_taps(d.h, out_h);
  const auto tx = bilinear_taps(d.w, out_w);
  Tensor4<T> y({d.n, d.c, out_h, out_w});
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t c = 0; c < d.c; ++c) {
      const T* in = x.plane(n, c);
      T* out = y.plane(n, c);
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        const Tap& a = ty[oy];
        const T h0 = static_cast<T>(a.l0), h1 = static_cast<T>(a.l1);
        const T* r0 = in + a.i0 * d.w;
        const T* r1 = in + a.i1 * d.w;
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const Tap& b = tx[ox];
          const T w0 = static_cast<T>(b.l0), w1 = static_cast<T>(b.l1);
          out[oy * out_w + ox] = h0 * (w0 * r0[b.i0] + w1 * r0[b.i1]) + h1 * (w0 * r1[b.i0] + w1 * r1[b.i1]);
        }
      }
    }
  }
  return y;
}

template <class T>
Tensor4<T> bilinear_upsample(const Tensor4<T>& x, std::size_t factor) {
  if (factor < 1) throw ContractError("upsample factor must be >= 1");
  return bilinear_resize(x, x.dims().h * factor, x.dims().w * factor);
}

template <class T>
Tensor4<T> avg_pool(const Tensor4<T>& x, std::size_t kernel, std::size_t stride, std::size_t padding) {
  if (kernel == 0 || stride == 0) throw ContractError("avg_pool kernel and stride must be positive");
  const Dims& d = x.dims();
  const ConvSpec shape{d.c, d.c, kernel, stride, padding, 1};
  const std::size_t Ho = shape.output_size(d.h, "height");
  const std::size_t Wo = shape.output_size(d.w, "width");
  const T inv = T(1) / static_cast<T>(kernel * kernel);
  Tensor4<T> y({d.n, d.c, Ho, Wo});
  const long pad = static_cast<long>(padding);
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t c = 0; c < d.c; ++c) {
      const T* in = x.plane(n, c);
      T* out = y.plane(n, c);
      for (std::size_t oy = 0; oy < Ho; ++oy) {
        const long y0 = static_cast<long>(oy * stride) - pad;
        const long ys = std::max(0L, y0), ye = std::min(static_cast<long>(d.h), y0 + static_cast<long>(kernel));
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          const long x0 = static_cast<long>(ox * stride) - pad;
          const long xs = std::max(0L, x0), xe = std::min(static_cast<long>(d.w), x0 + static_cast<long>(kernel));
          T sum = T(0);
          for (long iy = ys; iy < ye; ++iy)
            for (long ix = xs; ix < xe; ++ix) sum += in[iy * static_cast<long>(d.w) + ix];
          out[oy * Wo + ox] = sum * inv;
        }
      }
    }
  }
  return y;
}

template <class T>
Tensor4<T> global_avg_pool(const Tensor4<T>& x) {
  const Dims& d = x.dims();
  if (d.plane() == 0) throw DimensionError("spatial", "global pooling of an empty plane");
  Tensor4<T> y({d.n, d.c, 1, 1});
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t c = 0; c < d.c; ++c) {
      const T* in = x.plane(n, c);
      T sum = T(0);
      for (std::size_t i = 0; i < d.plane(); ++i) sum += in[i];
      y.at(n, c, 0, 0) = sum / static_cast<T>(d.plane());
    }
  }
  return y;
}

template <class T>
Tensor4<T> concat_channels(std::span<const Tensor4<T>* const> parts) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  const Dims first = parts[0]->dims();
  std::size_t channels = 0;
  for (const auto* p : parts) {
    const Dims& d = p->dims();
    if (d.n != first.n) throw DimensionError("batch", first.n, d.n, "concat");
    if (d.h != first.h) throw DimensionError("height", first.h, d.h, "concat");
    if (d.w != first.w) throw DimensionError("width", first.w, d.w, "concat");
    channels += d.c;
  }
  Tensor4<T> y({first.n, channels, first.h, first.w});
  const std::size_t plane = first.plane();
  for (std::size_t n = 0; n < first.n; ++n) {
    std::size_t c0 = 0;
    for (const auto* p : parts) {
      const std::size_t cnt = p->dims().c * plane;
      std::copy_n(p->plane(n, 0), cnt, y.plane(n, c0));
      c0 += p->dims().c;
    }
  }
  return y;
}

#define RDRNET_INSTANTIATE(T)                                                                   \
  template Tensor4<T> conv2d(const Tensor4<T>&, const ConvSpec&, const ConvWeights<T>&);        \
  template Tensor4<T> batchnorm(const Tensor4<T>&, const BNParams<T>&);                         \
  template Tensor4<T> relu(const Tensor4<T>&);                                                  \
  template Tensor4<T> add(const Tensor4<T>&, const Tensor4<T>&);                                \
  template Tensor4<T> add_relu(const Tensor4<T>&, const Tensor4<T>&);                           \
  template Tensor4<T> bilinear_resize(const Tensor4<T>&, std::size_t, std::size_t);             \
  template Tensor4<T> bilinear_upsample(const Tensor4<T>&, std::size_t);                        \
  template Tensor4<T> avg_pool(const Tensor4<T>&, std::size_t, std::size_t, std::size_t);       \
  template Tensor4<T> global_avg_pool(const Tensor4<T>&);                                       \
  template Tensor4<T> concat_channels(std::span<const Tensor4<T>* const>);

RDRNET_INSTANTIATE(float)
RDRNET_INSTANTIATE(double)
#undef RDRNET_INSTANTIATE

}  // namespace rdrnet
