#pragma once

#include <array>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "rdrnet/ops.hpp"
#include "rdrnet/reparam.hpp"

namespace rdrnet {

// conv [+bias] [-> BN]. Deploy structure holds only folded layers (bias, no BN).
template <class T>
struct ConvLayer {
  ConvSpec spec;
  ConvWeights<T> weights;
  std::optional<BNParams<T>> bn;

  Tensor4<T> forward(const Tensor4<T>& x) const;
  Dims output_dims(const Dims& in) const { return spec.output_dims(in); }
  ConvLayer folded() const;
  // Learnable parameters: weights, bias, BN gamma and beta (running stats excluded).
  std::size_t param_count() const;
  std::size_t bn_count() const { return bn ? 1 : 0; }
};

template <class T>
ConvLayer<T> to_layer(FusedConv<T> fused) {
  return {fused.spec, std::move(fused.weights), std::nullopt};
}

// ---------------------------------------------------------------------------
// Reparameterizable block

template <class T>
Tensor4<T> rb_forward_train(const Tensor4<T>& x, const RBParams<T>& p);

template <class T>
Tensor4<T> rb_forward_deploy(const Tensor4<T>& x, const FusedConv<T>& fused);

template <class T>
struct RepBlock {
  std::variant<RBParams<T>, FusedConv<T>> form;

  bool is_deploy() const { return std::holds_alternative<FusedConv<T>>(form); }
  const ConvSpec& spec() const;
  Tensor4<T> forward(const Tensor4<T>& x) const;
  Dims output_dims(const Dims& in) const { return spec().output_dims(in); }
  RepBlock reparameterized() const;
  std::size_t param_count() const;
  std::size_t bn_count() const;
};

// ---------------------------------------------------------------------------
// Bottleneck block: 1x1 reduce -> 3x3 (stride) -> 1x1 expand, projected shortcut
// when the shape changes, ReLU after the sum. Not reparameterized, only BN-folded.

template <class T>
struct Bottleneck {
  ConvLayer<T> reduce;
  ConvLayer<T> middle;
  ConvLayer<T> expand;
  std::optional<ConvLayer<T>> project;

  Tensor4<T> forward(const Tensor4<T>& x) const;
  Dims output_dims(const Dims& in) const;
  Bottleneck folded() const;
  std::size_t param_count() const;
  std::size_t bn_count() const;
};

template <class T>
Tensor4<T> bb_forward(const Tensor4<T>& x, const Bottleneck<T>& p) {
  return p.forward(x);
}

// ---------------------------------------------------------------------------
// Bilateral fusion between the semantic (low-res) and detail (1/8) branches:
//   xs' = ReLU(xs + d2s(xd)),  xd' = ReLU(xd + up(s2d(xs)))

template <class T>
struct BilateralFusion {
  ConvLayer<T> s2d;  // 1x1 compress, then bilinear upsample by up_factor
  std::size_t up_factor = 2;
  std::vector<ConvLayer<T>> d2s;  // 3x3 stride-2 convs, ReLU between consecutive ones

  std::pair<Tensor4<T>, Tensor4<T>> forward(const Tensor4<T>& xs, const Tensor4<T>& xd) const;
  BilateralFusion folded() const;
  std::size_t param_count() const;
  std::size_t bn_count() const;
};

template <class T>
std::pair<Tensor4<T>, Tensor4<T>> bilateral_fuse(const Tensor4<T>& xs, const Tensor4<T>& xd,
                                                 const BilateralFusion<T>& p) {
  return p.forward(xs, xd);
}

// ---------------------------------------------------------------------------
// Reparameterizable pyramid pooling

struct PoolWindow {
  std::size_t kernel;
  std::size_t stride;
};

// Pooled branches 0..2 use these windows with padding kernel/2; branch 3 is global.
inline constexpr std::array<PoolWindow, 3> kRppmWindows{{{5, 2}, {9, 4}, {17, 8}}};

enum class RppmMode { Train, Deploy };

template <class T>
struct GroupedPair {
  ConvBnParams<T> a;
  ConvBnParams<T> b;
};

template <class T>
struct PyramidPooling {
  ConvLayer<T> scale0;
  std::array<ConvLayer<T>, 4> pooled;
  std::variant<GroupedPair<T>, FusedConv<T>> grouped;
  ConvLayer<T> compress;
  ConvLayer<T> shortcut;

  RppmMode mode() const { return std::holds_alternative<GroupedPair<T>>(grouped) ? RppmMode::Train : RppmMode::Deploy; }
  std::size_t branch_width() const { return scale0.spec.out_channels; }
  Tensor4<T> forward(const Tensor4<T>& x) const;
  Dims output_dims(const Dims& in) const;
  PyramidPooling reparameterized() const;
  std::size_t param_count() const;
  std::size_t bn_count() const;
};

// Throws ContractError when `mode` disagrees with the parameter form held by `p`.
template <class T>
Tensor4<T> rppm_forward(const Tensor4<T>& x, const PyramidPooling<T>& p, RppmMode mode);

// ---------------------------------------------------------------------------
// Segmentation head: 3x3 conv+BN to O_c, ReLU, 1x1 conv to classes, bilinear resize.

template <class T>
struct SegHead {
  ConvLayer<T> conv3;
  ConvLayer<T> classifier;

  Tensor4<T> forward(const Tensor4<T>& x, std::size_t out_h, std::size_t out_w) const;
  SegHead folded() const { return {conv3.folded(), classifier.folded()}; }
  std::size_t param_count() const { return conv3.param_count() + classifier.param_count(); }
  std::size_t bn_count() const { return conv3.bn_count() + classifier.bn_count(); }
};

template <class T>
Tensor4<T> head_forward(const Tensor4<T>& x, const SegHead<T>& p, std::size_t out_h, std::size_t out_w) {
  return p.forward(x, out_h, out_w);
}

}  // namespace rdrnet
