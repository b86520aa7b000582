// Exhaustive OHEM reference: every valid pixel's loss, sorted, rule applied literally.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rdrnet/metrics.hpp"

namespace oracle {

template <class T>
double ohem_reference(const rdrnet::Tensor4<T>& logits, const rdrnet::LabelMap& labels, double threshold, std::size_t min_kept) {
  const auto& d = logits.dims();
  std::vector<std::pair<double, double>> px;  // (loss, true-class probability)
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t y = 0; y < d.h; ++y)
      for (std::size_t x = 0; x < d.w; ++x) {
        const int t = labels.data[(n * d.h + y) * d.w + x];
        if (t == labels.ignore_index) continue;
        std::vector<double> p(d.c);
        double z = 0;
        for (std::size_t c = 0; c < d.c; ++c) z += std::exp(static_cast<double>(logits.at(n, c, y, x)));
        const double prob = std::exp(static_cast<double>(logits.at(n, static_cast<std::size_t>(t), y, x))) / z;
        px.push_back({-std::log(prob), prob});
      }
  if (px.empty()) return 0.0;
  std::sort(px.begin(), px.end(), [](auto a, auto b) { return a.first > b.first; });
  std::size_t hard = 0;
  for (const auto& p : px) hard += p.second < threshold;
  const std::size_t keep = std::max(hard, std::min(min_kept, px.size()));
  double s = 0;
  for (std::size_t i = 0; i < keep; ++i) s += px[i].first;
  return s / static_cast<double>(keep);
}

}  // namespace oracle
