#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rdrnet/network.hpp"

namespace rdrnet {

// Default end-to-end tolerances on max abs logit difference.
inline constexpr double kTolF32 = 1e-3;
inline constexpr double kTolF64 = 1e-8;

struct VerifyOptions {
  std::uint64_t seed = 0;
  std::size_t trials = 100;
  std::size_t height = 64;
  std::size_t width = 128;
  double tolerance = 0.0;  // 0 picks kTolF32 / kTolF64
  // Test hook: perturb the deploy-form parameters of this block (e.g.
  // "stage2.block1", "rppm", "head") after reparameterization.
  std::optional<std::string> inject_fault;
};

struct BlockDiff {
  std::string name;
  Dims input;
  double max_abs = 0.0;
};

struct VerifyReport {
  std::string variant;
  std::string precision;
  double tolerance = 0.0;
  std::vector<BlockDiff> blocks;
  double end_to_end = 0.0;
  std::size_t trials = 0;
  std::size_t argmax_total = 0;
  std::size_t argmax_mismatch = 0;
  bool passed = false;
  std::string failing_block;  // worst block over tolerance, or "end_to_end"
};

// Builds the train net from `seed`, reparameterizes it, compares every block on a
// random input of its natural shape, then compares logits over `trials` inputs.
template <class T>
VerifyReport verify_equivalence(const NetworkDef& def, const VerifyOptions& options);

// Same, for a caller-provided train network.
template <class T>
VerifyReport verify_network(const Network<T>& train, const VerifyOptions& options);

std::string format_verify(const VerifyReport& r);

// Adds 1 to every bias of the named deploy block. Throws ContractError for an unknown name.
template <class T>
void inject_fault(Network<T>& deploy, const std::string& block);

}  // namespace rdrnet
