#pragma once

#include <cstdint>
#include <vector>

#include "rdrnet/tensor.hpp"

namespace rdrnet {

inline constexpr std::int32_t kIgnoreIndex = 255;

struct LabelMap {
  std::size_t n = 0, h = 0, w = 0;
  std::vector<std::int32_t> data;  // n*h*w, row-major
  std::int32_t ignore_index = kIgnoreIndex;

  LabelMap() = default;
  LabelMap(std::size_t n_, std::size_t h_, std::size_t w_, std::int32_t fill = 0)
      : n(n_), h(h_), w(w_), data(n_ * h_ * w_, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  // Throws ContractError for a value outside [0, num_classes) that is not ignore_index.
  void check(std::size_t num_classes) const;
};

// Per-pixel argmax over channels; ties resolve to the lowest class index.
template <class T>
LabelMap argmax(const Tensor4<T>& logits);

struct OhemOptions {
  double threshold = 0.7;   // in (0, 1]
  std::size_t min_kept = 0;  // 0 selects valid_pixels / 16 (at least 1)
};

struct OhemResult {
  double loss = 0.0;
  std::size_t kept = 0;
  std::size_t valid = 0;
  bool all_ignored = false;
};

// Softmax cross-entropy averaged over hard pixels: those whose true-class
// probability is below the threshold, topped up with the highest-loss remaining
// pixels until min_kept are selected. Ignored pixels never count.
template <class T>
OhemResult ohem_ce(const Tensor4<T>& logits, const LabelMap& labels, const OhemOptions& options = {});

inline double total_loss(double l_normal, double l_aux, double alpha = 0.4) { return l_normal + alpha * l_aux; }

// Rows index the true class, columns the prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes) : k_(num_classes), counts_(num_classes * num_classes, 0) {}
  ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> counts);

  std::size_t num_classes() const noexcept { return k_; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * k_ + pred]; }
  std::uint64_t total() const;

  // Pixels whose label equals the ignore index are skipped.
  void add(const LabelMap& truth, const LabelMap& pred);
  void merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

struct ClassIou {
  bool present = false;  // TP + FP + FN > 0
  double iou = 0.0;
};

std::vector<ClassIou> class_iou(const ConfusionMatrix& cm);
// Mean over classes with TP + FP + FN > 0. Throws ContractError on an empty matrix.
double miou(const ConfusionMatrix& cm);
double pixel_accuracy(const ConfusionMatrix& cm);

}  // namespace rdrnet
