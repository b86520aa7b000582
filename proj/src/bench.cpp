#include "rdrnet/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>

#include "rdrnet/dispatch.hpp"

namespace rdrnet {

double BenchReport::percentile(double p) const {
  if (times_ms.empty()) throw ContractError("percentile of an empty sample");
  std::vector<double> s = times_ms;
  std::sort(s.begin(), s.end());
  const double pos = p / 100.0 * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

template <class T>
BenchReport bench_forward(const Network<T>& net, const BenchOptions& o) {
  if (o.runs <= o.warmup)
    throw ContractError("bench needs more runs (" + std::to_string(o.runs) + ") than warmup runs (" +
                        std::to_string(o.warmup) + ")");
  const int previous = num_threads();
  if (o.threads > 0) set_num_threads(o.threads);

  Tensor4<T> x({o.batch, net.def.input_channels, o.height, o.width});
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : x.data()) v = static_cast<T>(normal(rng));

  BenchReport r;
  r.variant = net.def.variant;
  r.structure = net.structure;
  r.precision = sizeof(T) == 4 ? "f32" : "f64";
  r.input = x.dims();
  r.threads = num_threads();
  for (std::size_t i = 0; i < o.runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = forward(net, x);
    const auto t1 = std::chrono::steady_clock::now();
    if (i >= o.warmup) r.times_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  set_num_threads(previous);
  return r;
}

template BenchReport bench_forward<float>(const Network<float>&, const BenchOptions&);
template BenchReport bench_forward<double>(const Network<double>&, const BenchOptions&);

std::string format_bench(const BenchReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "variant    %s\nstructure  %s\nprecision  %s\ninput      %s\nthreads    %d\nruns       %zu timed\n"
                "median     %.3f ms\np10        %.3f ms\np90        %.3f ms\nthroughput %.3f inputs/s\n",
                r.variant.c_str(), structure_name(r.structure), r.precision.c_str(), to_string(r.input).c_str(), r.threads,
                r.times_ms.size(), r.median_ms(), r.p10_ms(), r.p90_ms(), r.throughput());
  return buf;
}

std::string bench_rows(const BenchReport& r) {
  std::ostringstream os;
  const std::string key = "variant=" + r.variant + " structure=" + structure_name(r.structure) +
                          " precision=" + r.precision + " threads=" + std::to_string(r.threads) + " input=" +
                          std::to_string(r.input.n) + "x" + std::to_string(r.input.c) + "x" + std::to_string(r.input.h) +
                          "x" + std::to_string(r.input.w);
  char buf[64];
  for (std::size_t i = 0; i < r.times_ms.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.4f", r.times_ms[i]);
    os << "run " << key << " index=" << i << " ms=" << buf << "\n";
  }
  std::snprintf(buf, sizeof buf, " median_ms=%.4f p10_ms=%.4f p90_ms=%.4f", r.median_ms(), r.p10_ms(), r.p90_ms());
  os << "summary " << key << buf << "\n";
  return os.str();
}

}  // namespace rdrnet
