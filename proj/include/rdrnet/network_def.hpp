#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace rdrnet {

struct StemStage {
  std::size_t width = 0;
  std::size_t blocks = 1;  // the first block downsamples by 2
  friend bool operator==(const StemStage&, const StemStage&) = default;
};

struct DualStage {
  std::size_t semantic_width = 0;
  std::size_t semantic_blocks = 1;
  std::size_t detail_width = 0;
  std::size_t detail_blocks = 1;
  friend bool operator==(const DualStage&, const DualStage&) = default;
};

// Training-structure options of every reparameterizable block (ablation toggles).
struct RbOptions {
  bool pointwise_path = true;
  std::size_t pointwise_convs = 2;
  bool residual = true;
  bool residual_bn = false;
  friend bool operator==(const RbOptions&, const RbOptions&) = default;
};

struct NetworkDef {
  std::string variant = "custom";
  std::size_t input_channels = 3;
  std::size_t num_classes = 19;
  std::size_t head_channels = 128;  // O_c of the segmentation head (and the aux head)
  StemStage stage1;
  StemStage stage2;
  StemStage stage3;
  DualStage stage4;
  DualStage stage5;
  DualStage stage6;  // bottleneck blocks
  bool enable_fusion1 = true;
  bool enable_fusion2 = true;
  bool enable_rppm = true;
  std::size_t rppm_branch_width = 128;
  bool aux_head = true;
  RbOptions rb;

  friend bool operator==(const NetworkDef&, const NetworkDef&) = default;

  // Throws ContractError describing the first violated constraint.
  void validate() const;
};

// Deepest feature stride; inputs must be multiples of it.
inline constexpr std::size_t kInputMultiple = 64;

// Built-in variants: rdrnet-micro, rdrnet-s-simple, rdrnet-s, rdrnet-m, rdrnet-l.
NetworkDef preset(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace rdrnet
