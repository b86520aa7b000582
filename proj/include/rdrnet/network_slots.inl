// Parameter slot traversal for Network<T>. Included from network.hpp.
#pragma once

#include <span>
#include <string>
#include <vector>

namespace rdrnet {
namespace slots {

using Shape = std::vector<std::uint64_t>;

template <class T, class Fn>
void visit_bn(const std::string& prefix, BNParams<T>& bn, Fn& fn) {
  const Shape c{bn.channels()};
  fn(prefix + ".gamma", std::span<T>(bn.gamma), c);
  fn(prefix + ".beta", std::span<T>(bn.beta), c);
  fn(prefix + ".mean", std::span<T>(bn.mean), c);
  fn(prefix + ".var", std::span<T>(bn.var), c);
  fn(prefix + ".eps", std::span<T>(&bn.eps, 1), Shape{});
}

template <class T, class Fn>
void visit_conv(const std::string& prefix, const ConvSpec& spec, ConvWeights<T>& w, Fn& fn) {
  const Dims d = spec.weight_dims();
  fn(prefix + ".weight", w.weight.data(), Shape{d.n, d.c, d.h, d.w});
  if (w.has_bias()) fn(prefix + ".bias", std::span<T>(w.bias), Shape{w.bias.size()});
}

template <class T, class Fn>
void visit_layer(const std::string& prefix, ConvLayer<T>& l, Fn& fn) {
  visit_conv(prefix, l.spec, l.weights, fn);
  if (l.bn) visit_bn(prefix + ".bn", *l.bn, fn);
}

template <class T, class Fn>
void visit_conv_bn(const std::string& prefix, ConvBnParams<T>& c, Fn& fn) {
  visit_conv(prefix, c.spec, c.weights, fn);
  visit_bn(prefix + ".bn", c.bn, fn);
}

template <class T, class Fn>
void visit_rb(const std::string& prefix, RepBlock<T>& b, Fn& fn) {
  if (auto* f = std::get_if<FusedConv<T>>(&b.form)) {
    visit_conv(prefix + ".fused", f->spec, f->weights, fn);
    return;
  }
  auto& p = std::get<RBParams<T>>(b.form);
  visit_conv_bn(prefix + ".conv3", p.conv3, fn);
  for (std::size_t i = 0; i < p.pointwise.size(); ++i) visit_conv_bn(prefix + ".pw" + std::to_string(i), p.pointwise[i], fn);
  if (p.residual_bn) visit_bn(prefix + ".residual_bn", *p.residual_bn, fn);
}

template <class T, class Fn>
void visit_rbs(const std::string& prefix, std::vector<RepBlock<T>>& blocks, Fn& fn) {
  for (std::size_t i = 0; i < blocks.size(); ++i) visit_rb(prefix + ".block" + std::to_string(i), blocks[i], fn);
}

template <class T, class Fn>
void visit_bbs(const std::string& prefix, std::vector<Bottleneck<T>>& blocks, Fn& fn) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string p = prefix + ".block" + std::to_string(i);
    visit_layer(p + ".reduce", blocks[i].reduce, fn);
    visit_layer(p + ".middle", blocks[i].middle, fn);
    visit_layer(p + ".expand", blocks[i].expand, fn);
    if (blocks[i].project) visit_layer(p + ".project", *blocks[i].project, fn);
  }
}

template <class T, class Fn>
void visit_fusion(const std::string& prefix, BilateralFusion<T>& f, Fn& fn) {
  visit_layer(prefix + ".s2d", f.s2d, fn);
  for (std::size_t i = 0; i < f.d2s.size(); ++i) visit_layer(prefix + ".d2s" + std::to_string(i), f.d2s[i], fn);
}

template <class T, class Fn>
void visit_head(const std::string& prefix, SegHead<T>& h, Fn& fn) {
  visit_layer(prefix + ".conv3", h.conv3, fn);
  visit_layer(prefix + ".classifier", h.classifier, fn);
}

}  // namespace slots

template <class T, class Fn>
void for_each_slot(Network<T>& net, Fn&& fn) {
  slots::visit_rbs("stage1", net.stage1, fn);
  slots::visit_rbs("stage2", net.stage2, fn);
  slots::visit_rbs("stage3", net.stage3, fn);
  slots::visit_rbs("stage4.semantic", net.stage4_semantic, fn);
  slots::visit_rbs("stage4.detail", net.stage4_detail, fn);
  if (net.fusion1) slots::visit_fusion("fusion1", *net.fusion1, fn);
  slots::visit_rbs("stage5.semantic", net.stage5_semantic, fn);
  slots::visit_rbs("stage5.detail", net.stage5_detail, fn);
  if (net.fusion2) slots::visit_fusion("fusion2", *net.fusion2, fn);
  slots::visit_bbs("stage6.semantic", net.stage6_semantic, fn);
  slots::visit_bbs("stage6.detail", net.stage6_detail, fn);
  if (net.rppm) {
    auto& r = *net.rppm;
    slots::visit_layer("rppm.scale0", r.scale0, fn);
    for (std::size_t i = 0; i < r.pooled.size(); ++i) slots::visit_layer("rppm.pool" + std::to_string(i), r.pooled[i], fn);
    if (auto* pair = std::get_if<GroupedPair<T>>(&r.grouped)) {
      slots::visit_conv_bn("rppm.grouped_a", pair->a, fn);
      slots::visit_conv_bn("rppm.grouped_b", pair->b, fn);
    } else {
      auto& f = std::get<FusedConv<T>>(r.grouped);
      slots::visit_conv("rppm.grouped.fused", f.spec, f.weights, fn);
    }
    slots::visit_layer("rppm.compress", r.compress, fn);
    slots::visit_layer("rppm.shortcut", r.shortcut, fn);
  }
  if (net.context_proj) slots::visit_layer("context_proj", *net.context_proj, fn);
  slots::visit_head("head", net.head, fn);
  if (net.aux_head) slots::visit_head("aux_head", *net.aux_head, fn);
}

}  // namespace rdrnet
