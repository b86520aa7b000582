#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rdrnet/error.hpp"

namespace rdrnet {

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

template <class T>
struct dtype_of;
template <>
struct dtype_of<float> {
  static constexpr DType value = DType::F32;
};
template <>
struct dtype_of<double> {
  static constexpr DType value = DType::F64;
};

std::size_t dtype_size(DType dtype);
const char* dtype_name(DType dtype);

struct Dims {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t count() const noexcept { return n * c * h * w; }
  std::size_t plane() const noexcept { return h * w; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& d);

// Dense NCHW array. Operations never mutate their inputs; mutable access exists
// for producers filling a freshly allocated tensor.
template <class T>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  explicit Tensor4(Dims dims, T fill = T(0)) : dims_(dims), data_(dims.count(), fill) {}
  Tensor4(Dims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != dims_.count())
      throw DimensionError("data", dims_.count(), data_.size(), "Tensor4 construction");
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  const std::vector<T>& vec() const& noexcept { return data_; }
  std::vector<T> vec() && noexcept { return std::move(data_); }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return ((n * dims_.c + c) * dims_.h + y) * dims_.w + x;
  }
  T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[offset(n, c, y, x)];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[offset(n, c, y, x)];
  }
  const T* plane(std::size_t n, std::size_t c) const noexcept {
    return data_.data() + offset(n, c, 0, 0);
  }
  T* plane(std::size_t n, std::size_t c) noexcept { return data_.data() + offset(n, c, 0, 0); }

  template <class U>
  Tensor4<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor4<U>(dims_, std::move(out));
  }

 private:
  Dims dims_{};
  std::vector<T> data_;
};

struct ConvSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
  std::size_t groups = 1;

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;

  // Throws ContractError on zero sizes or channels not divisible by groups.
  void validate() const;
  // floor((in + 2p - k) / s) + 1; throws DimensionError if not strictly positive.
  std::size_t output_size(std::size_t in, const char* axis = "spatial") const;
  Dims output_dims(const Dims& in) const;
  Dims weight_dims() const { return {out_channels, in_channels / groups, kernel, kernel}; }
  std::size_t weight_count() const { return weight_dims().count(); }
};

std::string to_string(const ConvSpec& s);

ConvSpec conv3x3(std::size_t in, std::size_t out, std::size_t stride = 1, std::size_t groups = 1);
ConvSpec conv1x1(std::size_t in, std::size_t out, std::size_t stride = 1);

template <class T>
struct ConvWeights {
  Tensor4<T> weight;
  std::vector<T> bias;  // empty means no bias

  bool has_bias() const noexcept { return !bias.empty(); }
  // Throws DimensionError when weight/bias disagree with spec.
  void check(const ConvSpec& spec) const;
};

template <class T>
struct BNParams {
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> mean;
  std::vector<T> var;
  T eps = T(1e-5);

  std::size_t channels() const noexcept { return gamma.size(); }
  // Lengths agree with `channels`, var >= 0, eps >= 0 and var + eps > 0.
  void check(std::size_t channels) const;

  static BNParams identity(std::size_t channels, T eps = T(0));
};

}  // namespace rdrnet
