#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdrnet/network.hpp"

namespace rdrnet {

struct CostRow {
  std::string name;
  std::size_t params = 0;
  std::uint64_t macs = 0;         // conv multiply-accumulates
  std::uint64_t elementwise = 0;  // bias, BN (2/elem), ReLU, add, pooling window sums, bilinear taps (4/elem)
};

struct CostReport {
  std::string variant;
  Structure structure = Structure::Deploy;
  Dims input;
  std::vector<CostRow> rows;

  std::size_t params() const;
  std::uint64_t macs() const;
  std::uint64_t elementwise() const;
  // Reported GFLOPs count one FLOP per MAC.
  double gflops() const { return static_cast<double>(macs()) / 1e9; }
  // Arithmetic operations: 2 per MAC plus every elementwise op.
  double arith_gops() const { return (2.0 * static_cast<double>(macs()) + static_cast<double>(elementwise())) / 1e9; }
};

// Learnable parameters of the given structure (BN running statistics excluded).
template <class T>
std::size_t count_params(const Network<T>& net) {
  return param_count(net);
}

template <class T>
CostReport count_flops(const Network<T>& net, std::size_t height, std::size_t width);

// Markdown table plus the counting conventions.
std::string format_report(const CostReport& report);

}  // namespace rdrnet
