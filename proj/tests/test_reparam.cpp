#include <doctest.h>

#include "oracles.hpp"
#include "rdrnet/ops.hpp"
#include "rdrnet/reparam.hpp"

using namespace rdrnet;
namespace rp = rdrnet::reparam;

namespace {

ConvWeights<double> scalar_weight(double w, std::vector<double> bias = {}) {
  return {Tensor4<double>({1, 1, 1, 1}, w), std::move(bias)};
}

}  // namespace

TEST_CASE("fuse_conv_bn hand values") {
  // gamma 2, beta 0.5, mean 1, var 1, eps 0: W' = 2W, B' = (0 - 1) * 2 + 0.5 = -1.5
  const BNParams<double> bn{{2.0}, {0.5}, {1.0}, {1.0}, 0.0};
  const auto f = rp::fuse_conv_bn(conv1x1(1, 1), scalar_weight(1.0), bn);
  CHECK(f.weights.weight.data()[0] == 2.0);
  CHECK(f.weights.bias[0] == -1.5);
  // A conv bias is carried through: (0.25 - 1) * 2 + 0.5 = -1.0
  CHECK(rp::fuse_conv_bn(conv1x1(1, 1), scalar_weight(1.0, {0.25}), bn).weights.bias[0] == -1.0);
}

TEST_CASE("fuse_conv_bn accepts eps = 0 and rejects invalid statistics") {
  const BNParams<double> zero_eps{{1.0}, {0.0}, {0.0}, {4.0}, 0.0};
  CHECK(rp::fuse_conv_bn(conv1x1(1, 1), scalar_weight(3.0), zero_eps).weights.weight.data()[0] == 1.5);
  BNParams<double> bad = zero_eps;
  bad.var[0] = 0.0;
  CHECK_THROWS_AS(rp::fuse_conv_bn(conv1x1(1, 1), scalar_weight(1.0), bad), ContractError);
  bad = zero_eps;
  bad.eps = -1e-5;
  CHECK_THROWS_AS(rp::fuse_conv_bn(conv1x1(1, 1), scalar_weight(1.0), bad), ContractError);
  CHECK_THROWS_AS(rp::fuse_conv_bn(conv1x1(1, 2), ConvWeights<double>{Tensor4<double>({2, 1, 1, 1}), {}}, zero_eps),
                  DimensionError);
}

TEST_CASE("merge_serial_1x1 hand values") {
  // W = 3 * 2 = 6, B = 3 * 0.5 + 2 = 3.5
  const auto m = rp::merge_serial_1x1(conv1x1(1, 1), scalar_weight(2.0, {0.5}), conv1x1(1, 1), scalar_weight(3.0, {2.0}));
  CHECK(m.weights.weight.data()[0] == 6.0);
  CHECK(m.weights.bias[0] == 3.5);
}

TEST_CASE("merge_serial_1x1 keeps the first stride and rejects a strided second conv") {
  oracle::Gen g(31);
  const ConvSpec s1 = conv1x1(3, 4, 2), s2 = conv1x1(4, 5);
  const auto w1 = g.weights<double>(s1, true), w2 = g.weights<double>(s2, true);
  const auto m = rp::merge_serial_1x1(s1, w1, s2, w2);
  CHECK(m.spec.stride == 2);
  CHECK(m.spec.out_channels == 5);
  CHECK_THROWS_AS(rp::merge_serial_1x1(s1, w1, conv1x1(4, 5, 2), w2), ContractError);
  CHECK_THROWS_AS(rp::merge_serial_1x1(s1, w1, conv1x1(3, 5), g.weights<double>(conv1x1(3, 5), false)), DimensionError);
  CHECK_THROWS_AS(rp::merge_serial_1x1(conv3x3(3, 4), g.weights<double>(conv3x3(3, 4), false), s2, w2), ContractError);
}

TEST_CASE("embed_1x1_into_3x3 places the tap at the centre") {
  const auto e = rp::embed_1x1_into_3x3(conv1x1(1, 1), scalar_weight(7.0, {0.25}));
  CHECK(e.spec.kernel == 3);
  CHECK(e.spec.padding == 1);
  for (int i = 0; i < 9; ++i) CHECK(e.weights.weight.data()[i] == (i == 4 ? 7.0 : 0.0));
  CHECK(e.weights.bias[0] == 0.25);
  CHECK_THROWS_AS(rp::embed_1x1_into_3x3(conv3x3(1, 1), ConvWeights<double>{Tensor4<double>({1, 1, 3, 3}), {}}), ContractError);
}

TEST_CASE("identity_to_conv is a channel identity") {
  const auto id = rp::identity_to_conv<float>(3, 3);
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t i = 0; i < 3; ++i) CHECK(id.weights.weight.at(o, i, 0, 0) == (o == i ? 1.0f : 0.0f));
  oracle::Gen g(32);
  const auto x = g.tensor<float>({1, 3, 5, 6});
  CHECK(oracle::max_diff(x, conv2d(x, id.spec, id.weights)) == 0.0);
  CHECK_THROWS_AS(rp::identity_to_conv<float>(4, 3), ContractError);
}

TEST_CASE("sum_parallel adds weights and biases and checks specs") {
  const ConvSpec s = conv1x1(1, 1);
  const FusedConv<double> a{s, scalar_weight(1.5, {1.0})}, b{s, scalar_weight(-0.5, {2.0})};
  const FusedConv<double> both[2] = {a, b};
  const auto sum = rp::sum_parallel<double>(both);
  CHECK(sum.weights.weight.data()[0] == 1.0);
  CHECK(sum.weights.bias[0] == 3.0);
  const FusedConv<double> c{conv1x1(1, 1, 2), scalar_weight(1.0, {0.0})};
  const FusedConv<double> mixed[2] = {a, c};
  CHECK_THROWS_AS(rp::sum_parallel<double>(mixed), ContractError);
}

// ---------------------------------------------------------------------------
// Property tests: each pass is checked against the forward of the unfused structure.

TEST_CASE("property: BN fold commutes with forward") {
  oracle::Gen g(41);
  for (int t = 0; t < 200; ++t) {
    const std::size_t groups = g.coin() ? 1 : 2;
    const ConvSpec s{groups * g.pick(1, 4), groups * g.pick(1, 4), g.coin() ? 3u : 1u, g.pick(1, 2), 0, groups};
    ConvSpec sp = s;
    sp.padding = s.kernel / 2;
    const auto w = g.weights<float>(sp, g.coin());
    const auto bn = g.bn<float>(sp.out_channels, g.coin() ? 1e-5 : 0.0);
    const auto x = g.tensor<float>({1, sp.in_channels, g.pick(3, 9), g.pick(3, 9)});
    const auto f = rp::fuse_conv_bn(sp, w, bn);
    CHECK(oracle::max_diff(batchnorm(conv2d(x, sp, w), bn), conv2d(x, f.spec, f.weights)) <= 1e-5);
  }
}

TEST_CASE("property: serial 1x1 merge commutes with forward") {
  oracle::Gen g(42);
  for (int t = 0; t < 200; ++t) {
    const std::size_t in = g.pick(1, 6), mid = g.pick(1, 6), out = g.pick(1, 6), stride = g.pick(1, 2);
    const ConvSpec s1 = conv1x1(in, mid, stride), s2 = conv1x1(mid, out);
    const auto w1 = g.weights<float>(s1, g.coin()), w2 = g.weights<float>(s2, g.coin());
    const auto x = g.tensor<float>({1, in, g.pick(1, 9), g.pick(1, 9)});
    const auto m = rp::merge_serial_1x1(s1, w1, s2, w2);
    CHECK(oracle::max_diff(conv2d(conv2d(x, s1, w1), s2, w2), conv2d(x, m.spec, m.weights)) <= 1e-5);
  }
}

TEST_CASE("property: 1x1 embedding and identity embedding commute with forward") {
  oracle::Gen g(43);
  for (int t = 0; t < 200; ++t) {
    const std::size_t in = g.pick(1, 5), out = g.pick(1, 5), stride = g.pick(1, 2);
    const ConvSpec s = conv1x1(in, out, stride);
    const auto w = g.weights<float>(s, g.coin());
    const auto x = g.tensor<float>({1, in, g.pick(1, 9), g.pick(1, 9)});
    const auto e = rp::embed_1x1_into_3x3(s, w);
    CHECK(oracle::max_diff(conv2d(x, s, w), conv2d(x, e.spec, e.weights)) <= 1e-5);

    const auto id = rp::embed_1x1_into_3x3(rp::identity_to_conv<float>(in, in).spec, rp::identity_to_conv<float>(in, in).weights);
    CHECK(oracle::max_diff(x, conv2d(x, id.spec, id.weights)) == 0.0);
  }
}

TEST_CASE("property: reparameterize_rb matches the composed oracle for every path combination") {
  oracle::Gen g(44);
  for (int t = 0; t < 150; ++t) {
    const std::size_t stride = g.pick(1, 2);
    const std::size_t in = g.pick(1, 6), out = g.coin() ? in : g.pick(1, 6);
    const auto p = g.rb<double>(in, out, stride, g.coin(), g.coin(), g.coin(), g.pick(1, 3));
    const auto f = rp::reparameterize_rb(p);
    CHECK(f.spec == conv3x3(in, out, stride));
    const auto x = g.tensor<double>({1, in, g.pick(2, 11), g.pick(2, 11)});
    const auto want = oracle::rb_train(oracle::from(x), p);
    CHECK(oracle::max_diff(want, relu(conv2d(x, f.spec, f.weights))) <= 1e-10);
  }
}

TEST_CASE("reparameterize_rb with only the 3x3 path equals BN folding") {
  oracle::Gen g(45);
  const auto p = g.rb<double>(4, 4, 1, false, false);
  const auto f = rp::reparameterize_rb(p);
  const auto direct = rp::fuse_conv_bn(p.conv3.spec, p.conv3.weights, p.conv3.bn);
  CHECK(f.weights.weight.vec() == direct.weights.weight.vec());
  CHECK(f.weights.bias == direct.weights.bias);
}

TEST_CASE("RB with zero 1x1/identity contributions reduces to ReLU(conv3(x))") {
  oracle::Gen g(46);
  auto p = g.rb<double>(3, 3, 1, true, false);
  for (auto& pw : p.pointwise) {
    std::fill(pw.bn.gamma.begin(), pw.bn.gamma.end(), 0.0);
    std::fill(pw.bn.beta.begin(), pw.bn.beta.end(), 0.0);
  }
  p.conv3.bn = BNParams<double>::identity(3);
  const auto x = g.tensor<double>({1, 3, 6, 6});
  const auto want = relu(conv2d(x, p.conv3.spec, p.conv3.weights));
  const auto f = rp::reparameterize_rb(p);
  CHECK(oracle::max_diff(want, relu(conv2d(x, f.spec, f.weights))) <= 1e-12);
}

TEST_CASE("RB structural checks") {
  oracle::Gen g(47);
  auto p = g.rb<float>(4, 4, 1);
  p.residual = true;
  p.conv3.spec.stride = 2;
  CHECK_THROWS_AS(p.check(), ContractError);
  auto q = g.rb<float>(4, 4, 2);
  q.pointwise[0].spec.stride = 1;
  CHECK_THROWS_AS(q.check(), ContractError);
}

TEST_CASE("property: RPPM grouped pair merge commutes with forward") {
  oracle::Gen g(48);
  for (int t = 0; t < 100; ++t) {
    const std::size_t c = 4 * g.pick(1, 3);
    const ConvSpec s = conv3x3(c, c, 1, 4);
    const auto wa = g.weights<float>(s, false), wb = g.weights<float>(s, false);
    const auto ba = g.bn<float>(c), bb = g.bn<float>(c);
    const auto x = g.tensor<float>({1, c, g.pick(1, 7), g.pick(1, 7)});
    const auto f = rp::reparameterize_rppm_pair(s, wa, ba, wb, bb);
    const auto want = add(batchnorm(conv2d(x, s, wa), ba), batchnorm(conv2d(x, s, wb), bb));
    CHECK(oracle::max_diff(want, conv2d(x, f.spec, f.weights)) <= 1e-5);
  }
}

TEST_CASE("property: passes hold at 1e-10 in double precision") {
  oracle::Gen g(49);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t in = g.pick(1, 4), out = g.pick(1, 4), stride = g.pick(1, 2);
    const auto x = g.tensor<double>({1, in, g.pick(2, 6), g.pick(2, 6)});
    const ConvSpec s3 = conv3x3(in, out, stride);
    const auto w3 = g.weights<double>(s3, false);
    const auto bn = g.bn<double>(out);
    const auto folded = rp::fuse_conv_bn(s3, w3, bn);
    CHECK(oracle::max_diff(oracle::bn(oracle::conv(oracle::from(x), s3, w3), bn), conv2d(x, folded.spec, folded.weights)) <= 1e-10);

    const ConvSpec s1 = conv1x1(in, out, stride), s2 = conv1x1(out, out);
    const auto w1 = g.weights<double>(s1, true), w2 = g.weights<double>(s2, true);
    const auto m = rp::merge_serial_1x1(s1, w1, s2, w2);
    CHECK(oracle::max_diff(oracle::conv(oracle::conv(oracle::from(x), s1, w1), s2, w2), conv2d(x, m.spec, m.weights)) <= 1e-10);
    const auto e = rp::embed_1x1_into_3x3(s1, w1);
    CHECK(oracle::max_diff(oracle::conv(oracle::from(x), s1, w1), conv2d(x, e.spec, e.weights)) <= 1e-10);
  }
}

TEST_CASE("property: serial 1x1 merge is associative") {
  oracle::Gen g(50);
  for (int t = 0; t < 100; ++t) {
    const std::size_t a = g.pick(1, 5), b = g.pick(1, 5), c = g.pick(1, 5), d = g.pick(1, 5);
    const ConvSpec s1 = conv1x1(a, b, g.pick(1, 2)), s2 = conv1x1(b, c), s3 = conv1x1(c, d);
    const auto w1 = g.weights<double>(s1, true), w2 = g.weights<double>(s2, true), w3 = g.weights<double>(s3, true);
    const auto left = rp::merge_serial_1x1(s1, w1, s2, w2);
    const auto lr = rp::merge_serial_1x1(left.spec, left.weights, s3, w3);
    const auto right = rp::merge_serial_1x1(s2, w2, s3, w3);
    const auto rl = rp::merge_serial_1x1(s1, w1, right.spec, right.weights);
    CHECK(lr.spec == rl.spec);
    CHECK(oracle::max_diff(lr.weights.weight, rl.weights.weight) <= 1e-12);
    for (std::size_t o = 0; o < d; ++o) CHECK(std::abs(lr.weights.bias[o] - rl.weights.bias[o]) <= 1e-12);
  }
}

TEST_CASE("passes leave an already-fused conv unchanged") {
  oracle::Gen g(51);
  const ConvSpec s = conv3x3(3, 5);
  const FusedConv<double> f{s, g.weights<double>(s, true)};
  const auto refold = rp::fuse_conv_bn(f.spec, f.weights, BNParams<double>::identity(5));
  CHECK(refold.weights.weight.vec() == f.weights.weight.vec());
  CHECK(refold.weights.bias == f.weights.bias);
  const FusedConv<double> one[1] = {f};
  const auto summed = rp::sum_parallel<double>(one);
  CHECK(summed.weights.weight.vec() == f.weights.weight.vec());
  CHECK(summed.weights.bias == f.weights.bias);

  const ConvSpec p = conv1x1(4, 4);
  const FusedConv<double> pw{p, g.weights<double>(p, true)};
  const auto id = rp::identity_to_conv<double>(4, 4);
  const auto merged = rp::merge_serial_1x1(pw.spec, pw.weights, id.spec, id.weights);
  CHECK(merged.weights.weight.vec() == pw.weights.weight.vec());
  CHECK(merged.weights.bias == pw.weights.bias);
}

TEST_CASE("property: block reparameterization never increases parameters and yields out*(9*in+1)") {
  oracle::Gen g(52);
  for (int t = 0; t < 50; ++t) {
    const std::size_t in = g.pick(1, 8), out = g.coin() ? in : g.pick(1, 8), stride = g.pick(1, 2);
    const auto p = g.rb<float>(in, out, stride, g.coin(), g.coin(), g.coin(), g.pick(1, 3));
    const auto f = rp::reparameterize_rb(p);
    std::size_t before = p.conv3.spec.weight_count() + 2 * out;
    for (const auto& pw : p.pointwise) before += pw.spec.weight_count() + 2 * pw.spec.out_channels;
    CHECK(f.param_count() == out * (in * 9 + 1));
    CHECK(f.param_count() <= before + out);
  }
}

TEST_CASE("property: grouped RPPM merge agrees with a dense block-diagonal expansion") {
  oracle::Gen g(53);
  for (int t = 0; t < 30; ++t) {
    const std::size_t c = 4 * g.pick(1, 3), per = c / 4;
    const ConvSpec s = conv3x3(c, c, 1, 4);
    const auto f = rp::reparameterize_rppm_pair(s, g.weights<double>(s, false), g.bn<double>(c), g.weights<double>(s, false),
                                               g.bn<double>(c));
    ConvWeights<double> dense{Tensor4<double>({c, c, 3, 3}), f.weights.bias};
    for (std::size_t o = 0; o < c; ++o)
      for (std::size_t i = 0; i < per; ++i)
        for (std::size_t k = 0; k < 9; ++k)
          dense.weight.at(o, (o / per) * per + i, k / 3, k % 3) = f.weights.weight.at(o, i, k / 3, k % 3);
    const auto x = g.tensor<double>({1, c, g.pick(2, 6), g.pick(2, 6)});
    CHECK(oracle::max_diff(conv2d(x, conv3x3(c, c), dense), conv2d(x, f.spec, f.weights)) <= 1e-12);
  }
}
