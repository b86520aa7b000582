#include <doctest.h>

#include "oracles.hpp"
#include "rdrnet/network.hpp"

using namespace rdrnet;

namespace {

const std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> kTableI = {
    {"stage1", {512, 1024}},         {"stage2", {256, 512}},          {"stage3", {128, 256}},
    {"stage4.semantic", {64, 128}},  {"stage4.detail", {128, 256}},   {"stage5.semantic", {32, 64}},
    {"stage5.detail", {128, 256}},   {"stage6.semantic", {16, 32}},   {"stage6.detail", {128, 256}},
};

Dims find(const ForwardTrace& t, const std::string& name) {
  for (const auto& s : t)
    if (s.name == name) return s.dims;
  FAIL("missing stage " << name);
  return {};
}

}  // namespace

TEST_CASE("micro variant builds and runs on 64x128") {
  const auto net = build_random<float>(preset("rdrnet-micro"), {1});
  oracle::Gen g(61);
  const auto x = g.tensor<float>({2, 3, 64, 128});
  ForwardTrace trace;
  const auto r = forward(net, x, true, &trace);
  CHECK(r.logits.dims() == Dims{2, 4, 64, 128});
  REQUIRE(r.aux_logits);
  CHECK(r.aux_logits->dims() == Dims{2, 4, 64, 128});
  for (float v : r.logits.vec()) CHECK(std::isfinite(v));
  // Static inference agrees with the executed trace.
  const auto inferred = infer_stage_shapes(net, x.dims());
  for (const auto& s : trace) CHECK(find(inferred, s.name) == s.dims);
  // Stage strides: 1/2, 1/4, 1/8, (1/16 | 1/8), (1/32 | 1/8), (1/64 | 1/8).
  CHECK(find(trace, "stage1").h == 32);
  CHECK(find(trace, "stage3").w == 16);
  CHECK(find(trace, "stage4.semantic").h == 4);
  CHECK(find(trace, "stage5.detail").h == 8);
  CHECK(find(trace, "stage6.semantic") == Dims{2, 128, 1, 2});
}

TEST_CASE("S and L stage shapes at 1024x2048") {
  for (const char* v : {"rdrnet-s", "rdrnet-l"}) {
    const auto net = make_skeleton<float>(preset(v), Structure::Deploy);
    const auto t = infer_stage_shapes(net, {1, 3, 1024, 2048});
    for (const auto& [name, hw] : kTableI) {
      const Dims d = find(t, name);
      CHECK(d.h == hw.first);
      CHECK(d.w == hw.second);
    }
    CHECK(find(t, "head") == Dims{1, 19, 1024, 2048});
  }
}

TEST_CASE("train and deploy logits agree for the micro variant") {
  const auto net = build_random<double>(preset("rdrnet-micro"), {2});
  const auto dep = reparameterize_network(net);
  CHECK(bn_record_count(net) > 0);
  CHECK(bn_record_count(dep) == 0);
  CHECK(param_count(dep) < param_count(net));
  CHECK(!dep.aux_head);
  oracle::Gen g(62);
  for (int t = 0; t < 5; ++t) {
    const auto x = g.tensor<double>({1, 3, 64, 128});
    CHECK(oracle::max_diff(forward(net, x).logits, forward(dep, x).logits) <= 1e-8);
  }
}

TEST_CASE("RB option variants stay equivalent after reparameterization") {
  oracle::Gen g(63);
  for (int variant = 0; variant < 5; ++variant) {
    NetworkDef def = preset("rdrnet-micro");
    if (variant == 0) def.rb.pointwise_convs = 1;
    if (variant == 1) def.rb.pointwise_convs = 3;
    if (variant == 2) def.rb.residual_bn = true;
    if (variant == 3) def.rb.pointwise_path = false;
    if (variant == 4) def.rb.residual = false;
    const auto net = build_random<double>(def, {static_cast<std::uint64_t>(variant)});
    const auto x = g.tensor<double>({1, 3, 64, 64});
    CHECK(oracle::max_diff(forward(net, x).logits, forward(reparameterize_network(net), x).logits) <= 1e-8);
  }
}

TEST_CASE("forward rejects bad inputs with stage attribution") {
  auto net = make_skeleton<float>(preset("rdrnet-micro"), Structure::Deploy);
  try {
    forward(net, Tensor4<float>({1, 3, 96, 128}));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(e.axis() == "input.height");
  }
  try {
    forward(net, Tensor4<float>({1, 1, 64, 64}));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(e.axis() == "input.channels");
  }
  CHECK_THROWS_AS(forward(net, Tensor4<float>({1, 3, 64, 64}), true), ContractError);

  // A block whose input width disagrees with the previous stage.
  const ConvSpec wrong = conv3x3(9, 16);
  net.stage4_detail[0] = RepBlock<float>{FusedConv<float>{wrong, {Tensor4<float>(wrong.weight_dims()), std::vector<float>(16)}}};
  try {
    forward(net, Tensor4<float>({1, 3, 64, 64}));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(e.axis().rfind("stage4.detail.", 0) == 0);
    CHECK(std::string(e.what()).find("stage4.detail") != std::string::npos);
  }
}

TEST_CASE("random builds are seeded and precision-consistent") {
  const NetworkDef def = preset("rdrnet-micro");
  CHECK(export_weights(build_random<float>(def, {7})) == export_weights(build_random<float>(def, {7})));
  CHECK(!(export_weights(build_random<float>(def, {7})) == export_weights(build_random<float>(def, {8}))));
  const auto f = export_weights(build_random<float>(def, {7}));
  const auto d = export_weights(build_random<double>(def, {7})).cast(DType::F32);
  CHECK(f == d);
}

TEST_CASE("export and rebuild reproduce logits exactly") {
  const NetworkDef def = preset("rdrnet-micro");
  const auto net = build_random<float>(def, {3});
  for (const auto& n : {net, reparameterize_network(net)}) {
    const WeightStore s = export_weights(n);
    CHECK(detect_structure(s) == n.structure);
    const auto back = build_from_store<float>(def, s);
    oracle::Gen g(64);
    const auto x = g.tensor<float>({1, 3, 64, 128});
    CHECK(forward(n, x).logits.vec() == forward(back, x).logits.vec());
  }
}

TEST_CASE("build_from_store reports missing, extra and mis-shaped tensors") {
  const NetworkDef def = preset("rdrnet-micro");
  const WeightStore full = export_weights(make_skeleton<float>(def, Structure::Train));
  WeightStore missing, extra, reshaped;
  for (const auto& [name, rec] : full.entries()) {
    if (name != "stage3.block0.pw1.bn.var") missing.put(name, rec);
    extra.put(name, rec);
    TensorRecord r = rec;
    if (name == "head.classifier.bias") {
      r.dims = {r.dims[0] - 1};
      r.payload.resize(r.payload.size() - 4);
    }
    reshaped.put(name, r);
  }
  extra.put_values<float>("stage9.block0.weight", {1}, std::vector<float>{1.0f});
  try {
    build_from_store<float>(def, missing);
    FAIL("expected MissingSlotError");
  } catch (const MissingSlotError& e) {
    CHECK(e.slot() == "stage3.block0.pw1.bn.var");
  }
  CHECK_THROWS_AS(build_from_store<float>(def, extra), ContractError);
  try {
    build_from_store<float>(def, reshaped);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(e.axis() == "head.classifier.bias");
  }
}

TEST_CASE("ablation toggles remove exactly the disabled parameters") {
  const NetworkDef base = preset("rdrnet-s");
  const auto full = make_skeleton<float>(base, Structure::Train);
  const std::size_t total = param_count(full);

  NetworkDef d = base;
  d.enable_fusion1 = false;
  CHECK(total - param_count(make_skeleton<float>(d, Structure::Train)) == full.fusion1->param_count());
  d = base;
  d.enable_fusion2 = false;
  CHECK(total - param_count(make_skeleton<float>(d, Structure::Train)) == full.fusion2->param_count());
  d = base;
  d.enable_rppm = false;
  const auto no_rppm = make_skeleton<float>(d, Structure::Train);
  CHECK(total - param_count(no_rppm) == full.rppm->param_count() - no_rppm.context_proj->param_count());

  // RB path toggles: every RB loses its 1x1 convs (weights + BN affine) or nothing
  // (the identity path holds no parameters unless it carries a BN).
  std::size_t pw = 0;
  for (const auto* v : {&full.stage1, &full.stage2, &full.stage3, &full.stage4_semantic, &full.stage4_detail,
                        &full.stage5_semantic, &full.stage5_detail})
    for (const auto& b : *v)
      for (const auto& c : std::get<RBParams<float>>(b.form).pointwise) pw += c.spec.weight_count() + 2 * c.spec.out_channels;
  d = base;
  d.rb.pointwise_path = false;
  CHECK(total - param_count(make_skeleton<float>(d, Structure::Train)) == pw);
  d = base;
  d.rb.residual = false;
  CHECK(param_count(make_skeleton<float>(d, Structure::Train)) == total);
  // Deploy structure is independent of the RB paths.
  CHECK(param_count(make_skeleton<float>(d, Structure::Deploy)) == param_count(make_skeleton<float>(base, Structure::Deploy)));
}

TEST_CASE("ablated graphs still run") {
  NetworkDef d = preset("rdrnet-micro");
  d.enable_fusion1 = d.enable_fusion2 = d.enable_rppm = false;
  d.rb.pointwise_path = d.rb.residual = false;
  const auto net = build_random<float>(d, {4});
  oracle::Gen g(65);
  const auto x = g.tensor<float>({1, 3, 64, 128});
  CHECK(oracle::max_diff(forward(net, x).logits, forward(reparameterize_network(net), x).logits) <= 1e-3);
}

TEST_CASE("network def validation") {
  NetworkDef d = preset("rdrnet-micro");
  d.stage5.detail_width = 8;
  CHECK_THROWS_AS(d.validate(), ContractError);
  d = preset("rdrnet-micro");
  d.stage2.blocks = 0;
  CHECK_THROWS_AS(make_skeleton<float>(d, Structure::Train), ContractError);
  CHECK_THROWS_AS(preset("rdrnet-xl"), ContractError);
  CHECK(preset("rdrnet-s-simple").head_channels == 64);
  CHECK(preset("rdrnet-m").stage4.semantic_width == 2 * preset("rdrnet-s").stage4.semantic_width);
}
