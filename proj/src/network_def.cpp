#include "rdrnet/network_def.hpp"

#include "rdrnet/error.hpp"

namespace rdrnet {

void NetworkDef::validate() const {
  const auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ContractError(std::string("network def: ") + what + " must be positive");
  };
  positive(input_channels, "input_channels");
  positive(num_classes, "num_classes");
  positive(head_channels, "head_channels");
  for (const auto* s : {&stage1, &stage2, &stage3}) {
    positive(s->width, "stem width");
    positive(s->blocks, "stem block count");
  }
  for (const auto* s : {&stage4, &stage5, &stage6}) {
    positive(s->semantic_width, "semantic width");
    positive(s->semantic_blocks, "semantic block count");
    positive(s->detail_width, "detail width");
    positive(s->detail_blocks, "detail block count");
  }
  if (stage5.detail_width != stage4.detail_width)
    throw ContractError("network def: stage5 detail width must equal stage4 detail width");
  if (stage6.semantic_width % 2 != 0 || stage6.detail_width % 2 != 0)
    throw ContractError("network def: bottleneck widths must be even");
  if (stage5.semantic_width % 2 != 0)
    throw ContractError("network def: stage5 semantic width must be even");
  if (enable_rppm) positive(rppm_branch_width, "rppm branch width");
  if (rb.pointwise_path) positive(rb.pointwise_convs, "rb pointwise conv count");
  if (rb.residual_bn && !rb.residual) throw ContractError("network def: residual_bn requires residual");
}

namespace {

NetworkDef small(std::string name, std::size_t head) {
  NetworkDef d;
  d.variant = std::move(name);
  d.head_channels = head;
  d.stage1 = {32, 1};
  d.stage2 = {32, 5};
  d.stage3 = {64, 4};
  d.stage4 = {128, 6, 64, 4};
  d.stage5 = {256, 6, 64, 4};
  d.stage6 = {512, 1, 128, 1};
  d.rppm_branch_width = 128;
  return d;
}

}  // namespace

NetworkDef preset(std::string_view name) {
  if (name == "rdrnet-s-simple") return small("rdrnet-s-simple", 64);
  if (name == "rdrnet-s") return small("rdrnet-s", 128);
  if (name == "rdrnet-m") {
    NetworkDef d = small("rdrnet-m", 128);
    d.stage1 = {64, 1};
    d.stage2 = {64, 5};
    d.stage3 = {128, 4};
    d.stage4 = {256, 6, 128, 4};
    d.stage5 = {512, 6, 128, 4};
    d.stage6 = {1024, 1, 256, 1};
    return d;
  }
  if (name == "rdrnet-l") {
    NetworkDef d = small("rdrnet-l", 256);
    d.stage1 = {64, 1};
    d.stage2 = {64, 7};
    d.stage3 = {128, 6};
    d.stage4 = {256, 8, 128, 6};
    d.stage5 = {512, 8, 128, 6};
    d.stage6 = {1024, 2, 256, 2};
    return d;
  }
  if (name == "rdrnet-micro") {
    NetworkDef d;
    d.variant = "rdrnet-micro";
    d.num_classes = 4;
    d.head_channels = 32;
    d.stage1 = {8, 1};
    d.stage2 = {8, 1};
    d.stage3 = {16, 1};
    d.stage4 = {32, 1, 16, 1};
    d.stage5 = {64, 1, 16, 1};
    d.stage6 = {128, 1, 32, 1};
    d.rppm_branch_width = 32;
    return d;
  }
  throw ContractError("unknown network preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() {
  return {"rdrnet-micro", "rdrnet-s-simple", "rdrnet-s", "rdrnet-m", "rdrnet-l"};
}

}  // namespace rdrnet
