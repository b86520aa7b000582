#pragma once

#include <algorithm>

#include "rdrnet/ops.hpp"

// Hook used while constructing random-weight networks: before a BN is applied its
// running statistics are replaced by the statistics of the tensor it receives, so
// activations stay unit-scale through arbitrary depth. Thread-local, off by default.
namespace rdrnet::detail {

template <class T>
struct BnCalibration {
  static inline thread_local bool active = false;
};

template <class T>
Tensor4<T> apply_bn(const Tensor4<T>& y, const BNParams<T>& bn) {
  if (BnCalibration<T>::active) {
    // The calibrating caller owns the (non-const) network being initialized.
    auto& mut = const_cast<BNParams<T>&>(bn);
    const Dims& d = y.dims();
    const std::size_t count = d.n * d.plane();
    for (std::size_t c = 0; c < d.c && c < mut.channels(); ++c) {
      double sum = 0, sq = 0;
      for (std::size_t n = 0; n < d.n; ++n) {
        const T* p = y.plane(n, c);
        for (std::size_t i = 0; i < d.plane(); ++i) {
          sum += p[i];
          sq += static_cast<double>(p[i]) * p[i];
        }
      }
      const double mean = sum / static_cast<double>(count);
      const double var = std::max(sq / static_cast<double>(count) - mean * mean, 0.0);
      mut.mean[c] = static_cast<T>(mean);
      mut.var[c] = static_cast<T>(var + 1e-3);
    }
  }
  return batchnorm(y, bn);
}

template <class T>
class ScopedBnCalibration {
 public:
  ScopedBnCalibration() { BnCalibration<T>::active = true; }
  ~ScopedBnCalibration() { BnCalibration<T>::active = false; }
  ScopedBnCalibration(const ScopedBnCalibration&) = delete;
  ScopedBnCalibration& operator=(const ScopedBnCalibration&) = delete;
};

}  // namespace rdrnet::detail
