#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rdrnet/tensor.hpp"

namespace rdrnet {

// A single convolution produced by folding/merging; bias is always present.
template <class T>
struct FusedConv {
  ConvSpec spec;
  ConvWeights<T> weights;

  std::size_t param_count() const { return spec.weight_count() + spec.out_channels; }
};

// Training-time convolution followed by its frozen batchnorm. Convs are bias-free
// in training structure, but a bias is honoured when present.
template <class T>
struct ConvBnParams {
  ConvSpec spec;
  ConvWeights<T> weights;
  BNParams<T> bn;
};

// Reparameterizable block parameters (3x3 path, serial 1x1 path, identity path).
template <class T>
struct RBParams {
  ConvBnParams<T> conv3;
  // Serial 1x1 convs; the first carries the stride. Empty when the path is disabled.
  std::vector<ConvBnParams<T>> pointwise;
  bool residual = false;
  // Optional BN on the identity path (off by default).
  std::optional<BNParams<T>> residual_bn;

  std::size_t stride() const noexcept { return conv3.spec.stride; }
  // Throws ContractError when the structural invariants do not hold.
  void check() const;
};

namespace reparam {

template <class T>
FusedConv<T> fuse_conv_bn(const ConvSpec& spec, const ConvWeights<T>& w, const BNParams<T>& bn);

// Merges conv2(conv1(x)) into one 1x1 conv. conv2 must have stride 1 and no padding.
template <class T>
FusedConv<T> merge_serial_1x1(const ConvSpec& spec1, const ConvWeights<T>& w1, const ConvSpec& spec2,
                              const ConvWeights<T>& w2);

// 1x1 kernel placed at the center tap of a 3x3 kernel; padding grows by one.
template <class T>
FusedConv<T> embed_1x1_into_3x3(const ConvSpec& spec, const ConvWeights<T>& w);

// 1x1 conv with weight 1 where out index == in index, bias 0.
template <class T>
FusedConv<T> identity_to_conv(std::size_t channels_in, std::size_t channels_out);

// Elementwise sum of weights and biases; summation runs in sequence order.
template <class T>
FusedConv<T> sum_parallel(std::span<const FusedConv<T>> branches);

// fuse_conv_bn on every conv, serial 1x1 merge, embed 1x1 and identity into 3x3,
// then sum. The ReLU after the branch sum is not part of the result.
template <class T>
FusedConv<T> reparameterize_rb(const RBParams<T>& rb);

template <class T>
FusedConv<T> reparameterize_rppm_pair(const ConvSpec& spec, const ConvWeights<T>& w_a, const BNParams<T>& bn_a,
                                      const ConvWeights<T>& w_b, const BNParams<T>& bn_b);

}  // namespace reparam
}  // namespace rdrnet
