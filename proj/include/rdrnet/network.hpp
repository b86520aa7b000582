#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rdrnet/blocks.hpp"
#include "rdrnet/network_def.hpp"
#include "rdrnet/weight_store.hpp"

namespace rdrnet {

enum class Structure { Train, Deploy };

const char* structure_name(Structure s);

template <class T>
struct Network {
  NetworkDef def;
  Structure structure = Structure::Train;

  std::vector<RepBlock<T>> stage1;
  std::vector<RepBlock<T>> stage2;
  std::vector<RepBlock<T>> stage3;
  std::vector<RepBlock<T>> stage4_semantic;
  std::vector<RepBlock<T>> stage4_detail;
  std::optional<BilateralFusion<T>> fusion1;
  std::vector<RepBlock<T>> stage5_semantic;
  std::vector<RepBlock<T>> stage5_detail;
  std::optional<BilateralFusion<T>> fusion2;
  std::vector<Bottleneck<T>> stage6_semantic;
  std::vector<Bottleneck<T>> stage6_detail;
  std::optional<PyramidPooling<T>> rppm;
  std::optional<ConvLayer<T>> context_proj;  // stands in for the RPPM when it is disabled
  SegHead<T> head;
  std::optional<SegHead<T>> aux_head;  // train structure only
};

// Named activation shapes recorded during a forward pass (or inferred statically).
struct StageShape {
  std::string name;
  Dims dims;
};
using ForwardTrace = std::vector<StageShape>;

template <class T>
struct ForwardResult {
  Tensor4<T> logits;
  std::optional<Tensor4<T>> aux_logits;
};

// Structure with default parameters: zero weights, BN gamma=1, beta=0, mean=0, var=1.
template <class T>
Network<T> make_skeleton(const NetworkDef& def, Structure structure);

struct RandomInit {
  std::uint64_t seed = 0;
  // Replace BN running statistics by the batch statistics of a deterministic
  // calibration input, so activations stay O(1) at any depth.
  bool calibrate_bn = true;
  std::size_t calibration_height = 128;
  std::size_t calibration_width = 256;
};

// Train-structure network with seeded random parameters. Values are drawn and
// calibrated in double precision, then rounded to T, so float and double builds
// from the same seed hold the same parameters up to rounding.
template <class T>
Network<T> build_random(const NetworkDef& def, const RandomInit& init);

// Structure is taken from the store (".fused." slots mean deploy). Throws
// MissingSlotError for an absent slot, DimensionError for a mis-shaped tensor
// and ContractError for tensors that belong to no slot.
template <class T>
Network<T> build_from_store(const NetworkDef& def, const WeightStore& store);

Structure detect_structure(const WeightStore& store);

template <class T>
WeightStore export_weights(const Network<T>& net);

// Visits every parameter tensor in a fixed order; used for export/import and
// for generic parameter manipulation in tests.
template <class T, class Fn>
void for_each_slot(Network<T>& net, Fn&& fn);

// Validates channels and the multiple-of-64 rule; errors name the failing stage.
template <class T>
ForwardResult<T> forward(const Network<T>& net, const Tensor4<T>& x, bool want_aux = false,
                         ForwardTrace* trace = nullptr);

// Every RB and the RPPM pair merged, every BN folded, aux head dropped.
template <class T>
Network<T> reparameterize_network(const Network<T>& net);

// Stage output shapes without running convolutions.
template <class T>
ForwardTrace infer_stage_shapes(const Network<T>& net, const Dims& input);

template <class T>
std::size_t bn_record_count(const Network<T>& net);

template <class T>
std::size_t param_count(const Network<T>& net);

}  // namespace rdrnet

#include "rdrnet/network_slots.inl"
