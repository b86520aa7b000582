#include "rdrnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace rdrnet {

void LabelMap::check(std::size_t num_classes) const {
  if (data.size() != n * h * w) throw DimensionError("labels.size", n * h * w, data.size(), "label map");
  for (std::int32_t v : data) {
    if (v == ignore_index) continue;
    if (v < 0 || static_cast<std::size_t>(v) >= num_classes)
      throw ContractError("label value " + std::to_string(v) + " outside [0, " + std::to_string(num_classes) + ")");
  }
}

template <class T>
LabelMap argmax(const Tensor4<T>& logits) {
  const Dims& d = logits.dims();
  LabelMap out(d.n, d.h, d.w);
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t i = 0; i < d.plane(); ++i) {
      std::size_t best = 0;
      T best_v = logits.plane(n, 0)[i];
      for (std::size_t c = 1; c < d.c; ++c) {
        const T v = logits.plane(n, c)[i];
        if (v > best_v) {
          best_v = v;
          best = c;
        }
      }
      out.data[n * d.plane() + i] = static_cast<std::int32_t>(best);
    }
  }
  return out;
}

template <class T>
OhemResult ohem_ce(const Tensor4<T>& logits, const LabelMap& labels, const OhemOptions& options) {
  const Dims& d = logits.dims();
  if (labels.n != d.n) throw DimensionError("labels.batch", d.n, labels.n, "ohem_ce");
  if (labels.h != d.h) throw DimensionError("labels.height", d.h, labels.h, "ohem_ce");
  if (labels.w != d.w) throw DimensionError("labels.width", d.w, labels.w, "ohem_ce");
  if (!(options.threshold > 0.0 && options.threshold <= 1.0))
    throw ContractError("ohem threshold must lie in (0, 1]");
  labels.check(d.c);

  std::vector<double> losses;
  losses.reserve(labels.size());
  std::size_t hard = 0;
  double hard_sum = 0.0;
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t i = 0; i < d.plane(); ++i) {
      const std::int32_t t = labels.data[n * d.plane() + i];
      if (t == labels.ignore_index) continue;
      double mx = -INFINITY;
      for (std::size_t c = 0; c < d.c; ++c) mx = std::max(mx, static_cast<double>(logits.plane(n, c)[i]));
      double sum = 0.0;
      for (std::size_t c = 0; c < d.c; ++c) sum += std::exp(static_cast<double>(logits.plane(n, c)[i]) - mx);
      const double ce = mx + std::log(sum) - static_cast<double>(logits.plane(n, static_cast<std::size_t>(t))[i]);
      if (std::exp(-ce) < options.threshold) {
        ++hard;
        hard_sum += ce;
      }
      losses.push_back(ce);
    }
  }

  OhemResult r;
  r.valid = losses.size();
  if (losses.empty()) {
    r.all_ignored = true;
    return r;
  }
  std::size_t min_kept = options.min_kept ? options.min_kept : std::max<std::size_t>(1, r.valid / 16);
  min_kept = std::min(min_kept, r.valid);
  if (hard >= min_kept) {
    r.kept = hard;
    r.loss = hard_sum / static_cast<double>(hard);
    return r;
  }
  // Hard pixels are exactly the top-`hard` losses, so the top-up set is the top-min_kept losses.
  std::nth_element(losses.begin(), losses.begin() + static_cast<std::ptrdiff_t>(min_kept - 1), losses.end(),
                   std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < min_kept; ++i) sum += losses[i];
  r.kept = min_kept;
  r.loss = sum / static_cast<double>(min_kept);
  return r;
}

template LabelMap argmax<float>(const Tensor4<float>&);
template LabelMap argmax<double>(const Tensor4<double>&);
template OhemResult ohem_ce<float>(const Tensor4<float>&, const LabelMap&, const OhemOptions&);
template OhemResult ohem_ce<double>(const Tensor4<double>&, const LabelMap&, const OhemOptions&);

// ---------------------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> counts)
    : k_(num_classes), counts_(std::move(counts)) {
  if (counts_.size() != k_ * k_) throw DimensionError("confusion.size", k_ * k_, counts_.size(), "confusion matrix");
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

void ConfusionMatrix::add(const LabelMap& truth, const LabelMap& pred) {
  if (truth.size() != pred.size() || truth.h != pred.h || truth.w != pred.w)
    throw DimensionError("labels", "truth and prediction maps differ in shape");
  truth.check(k_);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::int32_t t = truth.data[i];
    if (t == truth.ignore_index) continue;
    const std::int32_t p = pred.data[i];
    if (p < 0 || static_cast<std::size_t>(p) >= k_)
      throw ContractError("predicted class " + std::to_string(p) + " outside [0, " + std::to_string(k_) + ")");
    ++counts_[static_cast<std::size_t>(t) * k_ + static_cast<std::size_t>(p)];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw DimensionError("confusion.classes", k_, other.k_, "merge");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::vector<ClassIou> class_iou(const ConfusionMatrix& cm) {
  const std::size_t k = cm.num_classes();
  std::vector<ClassIou> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t uni = row + col - tp;
    if (uni > 0) out[c] = {true, static_cast<double>(tp) / static_cast<double>(uni)};
  }
  return out;
}

double miou(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ContractError("mIoU of an empty confusion matrix");
  double sum = 0.0;
  std::size_t present = 0;
  for (const auto& c : class_iou(cm)) {
    if (!c.present) continue;
    sum += c.iou;
    ++present;
  }
  return sum / static_cast<double>(present);
}

double pixel_accuracy(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw ContractError("pixel accuracy of an empty confusion matrix");
  std::uint64_t diag = 0;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) diag += cm.at(c, c);
  return static_cast<double>(diag) / static_cast<double>(total);
}

}  // namespace rdrnet
