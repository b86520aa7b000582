#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdrnet/network.hpp"

namespace rdrnet {

struct BenchOptions {
  std::size_t runs = 22;  // including warmup
  std::size_t warmup = 2;
  int threads = 0;  // 0 keeps the current setting
  std::size_t batch = 1;
  std::size_t height = 256;
  std::size_t width = 512;
  std::uint64_t seed = 0;
};

struct BenchReport {
  std::string variant;
  Structure structure = Structure::Deploy;
  std::string precision;
  Dims input;
  int threads = 1;
  std::vector<double> times_ms;  // timed runs only

  double percentile(double p) const;  // linear interpolation between order statistics
  double median_ms() const { return percentile(50); }
  double p10_ms() const { return percentile(10); }
  double p90_ms() const { return percentile(90); }
  double throughput() const { return 1000.0 * static_cast<double>(input.n) / median_ms(); }
};

// Throws ContractError when runs <= warmup.
template <class T>
BenchReport bench_forward(const Network<T>& net, const BenchOptions& options);

std::string format_bench(const BenchReport& r);
// One "key=value" line per timed run plus a summary line, for scripts.
std::string bench_rows(const BenchReport& r);

}  // namespace rdrnet
