#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "rdrnet/error.hpp"
#include "rdrnet/model_io.hpp"
#include "rdrnet/network.hpp"
#include "rdrnet/weight_store.hpp"

using namespace rdrnet;
namespace fs = std::filesystem;

namespace {

FormatError::Kind kind_of(std::span<const std::byte> bytes) {
  try {
    deserialize(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("deserialize accepted corrupt input");
  return FormatError::Kind::Malformed;
}

std::vector<std::byte> with_crc(std::vector<std::byte> body) {
  const std::uint32_t c = crc32(body);
  for (int i = 0; i < 4; ++i) body.push_back(static_cast<std::byte>((c >> (8 * i)) & 0xff));
  return body;
}

WeightStore sample_store() {
  WeightStore s;
  const std::vector<float> a{1.0f, -2.5f, 3.25f, 0.0f, 7.0f, 1e-8f};
  const std::vector<double> b{0.1, 0.2};
  s.put_values<float>("stage1.block0.conv3.weight", {1, 2, 3}, a);
  s.put_values<double>("head.classifier.bias", {2}, b);
  s.put_values<float>("rppm.scale0.bn.eps", {}, std::vector<float>{1e-5f});
  return s;
}

fs::path scratch(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "rdrnet_test_store";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("empty store round-trips") {
  const auto bytes = serialize(WeightStore{});
  CHECK(bytes.size() == 4 + 2 + 4 + 4);
  CHECK(deserialize(bytes).empty());
}

TEST_CASE("single f32 tensor has the documented byte layout") {
  WeightStore s;
  s.put_values<float>("x", {1}, std::vector<float>{1.0f});
  const auto b = serialize(s);
  const std::vector<unsigned char> expect{'R', 'D', 'R', 'W', 1, 0, 1, 0, 0, 0, 1, 0, 'x', 0, 1,
                                          1, 0, 0, 0, 0, 0, 0, 0, 0x00, 0x00, 0x80, 0x3f};
  REQUIRE(b.size() == expect.size() + 4);
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(static_cast<unsigned char>(b[i]) == expect[i]);
  CHECK(tensor_checksum(s.at("x")) == crc32(std::span(b).subspan(23, 4)));
}

TEST_CASE("serialize/deserialize is byte-identical and preserves order") {
  const WeightStore s = sample_store();
  const auto bytes = serialize(s);
  const WeightStore back = deserialize(bytes);
  CHECK(back == s);
  CHECK(serialize(back) == bytes);
  CHECK(back.entries()[0].first == "stage1.block0.conv3.weight");
  CHECK(back.at("head.classifier.bias").dtype == DType::F64);
  CHECK(back.at("rppm.scale0.bn.eps").dims.empty());
  CHECK(back.at("rppm.scale0.bn.eps").element_count() == 1);
}

TEST_CASE("save and load through the filesystem") {
  const fs::path p = scratch("roundtrip.rdrw");
  save(sample_store(), p);
  CHECK(load(p) == sample_store());
  CHECK(!fs::exists(p.string() + ".tmp"));
  CHECK_THROWS_AS(load(scratch("does_not_exist.rdrw")), IoError);
}

TEST_CASE("corrupt inputs raise distinct format errors") {
  const auto good = serialize(sample_store());

  auto magic = good;
  magic[0] = std::byte{'X'};
  CHECK(kind_of(magic) == FormatError::Kind::BadMagic);

  std::vector<std::byte> body(good.begin(), good.end() - 4);
  body[4] = std::byte{2};
  CHECK(kind_of(with_crc(body)) == FormatError::Kind::VersionMismatch);

  auto flipped = good;
  flipped[good.size() / 2] ^= std::byte{0x10};
  CHECK(kind_of(flipped) == FormatError::Kind::CrcMismatch);

  for (std::size_t cut : {std::size_t{3}, std::size_t{9}, good.size() / 2, good.size() - 1})
    CHECK(kind_of(std::span(good).first(cut)) == FormatError::Kind::Truncated);

  std::vector<std::byte> bad_dtype(good.begin(), good.end() - 4);
  // dtype byte of the first record follows magic, version, count, name length and the 26-char name
  bad_dtype[4 + 2 + 4 + 2 + 26] = std::byte{9};
  CHECK(kind_of(with_crc(bad_dtype)) == FormatError::Kind::Malformed);
}

TEST_CASE("tensor names follow the dotted lowercase grammar") {
  for (const char* ok : {"a", "stage1.block0.conv3.weight", "x_1.y_2", "0"}) CHECK(is_valid_tensor_name(ok));
  for (const char* bad : {"", ".a", "a.", "a..b", "A", "a-b", "a b", "a/b"}) CHECK(!is_valid_tensor_name(bad));
  WeightStore s;
  CHECK_THROWS_AS(s.put_values<float>("Bad", {1}, std::vector<float>{1}), ContractError);
  s.put_values<float>("a", {1}, std::vector<float>{1});
  CHECK_THROWS_AS(s.put_values<float>("a", {1}, std::vector<float>{2}), ContractError);
  CHECK_THROWS_AS(s.put_values<float>("b", {3}, std::vector<float>{1}), ContractError);
  CHECK_THROWS_AS(s.at("missing"), MissingSlotError);
}

TEST_CASE("cast converts every record") {
  const WeightStore d = sample_store().cast(DType::F64);
  for (const auto& [name, r] : d.entries()) CHECK(r.dtype == DType::F64);
  CHECK(d.at("stage1.block0.conv3.weight").values<double>()[2] == 3.25);
  CHECK(d.cast(DType::F32).at("head.classifier.bias").values<float>()[0] == 0.1f);
}

TEST_CASE("convert_checkpoint yields the deploy slot set and exact logits parity") {
  const NetworkDef def = preset("rdrnet-micro");
  const auto train = build_random<double>(def, {.seed = 5});
  const WeightStore train_store = export_weights(train);
  CHECK(detect_structure(train_store) == Structure::Train);

  const WeightStore deploy_store = convert_checkpoint(train_store, def);
  CHECK(detect_structure(deploy_store) == Structure::Deploy);
  const WeightStore skeleton = export_weights(make_skeleton<double>(def, Structure::Deploy));
  REQUIRE(deploy_store.size() == skeleton.size());
  for (std::size_t i = 0; i < skeleton.size(); ++i)
    CHECK(deploy_store.entries()[i].first == skeleton.entries()[i].first);

  const auto direct = reparameterize_network(train);
  const auto loaded = build_from_store<double>(def, deploy_store);
  oracle::Gen g(6);
  const auto x = g.tensor<double>({1, 3, 64, 128}, 1.0);
  CHECK(forward(direct, x).logits.vec() == forward(loaded, x).logits.vec());

  CHECK_THROWS_AS(convert_checkpoint(deploy_store, def), ContractError);

  WeightStore partial;
  for (const auto& [name, r] : train_store.entries())
    if (name != "stage2.block0.conv3.weight") partial.put(name, r);
  CHECK_THROWS_AS(convert_checkpoint(partial, def), MissingSlotError);
}

TEST_CASE("build_from_store rejects shape mismatches and stray tensors") {
  const NetworkDef def = preset("rdrnet-micro");
  const WeightStore good = export_weights(make_skeleton<float>(def, Structure::Deploy));
  WeightStore bad;
  for (const auto& [name, r] : good.entries()) {
    if (name == "head.classifier.weight") {
      TensorRecord t = r;
      t.dims[0] += 1;
      t.payload.resize(t.payload.size() + t.payload.size() / (t.dims[0] - 1));
      bad.put(name, t);
    } else {
      bad.put(name, r);
    }
  }
  CHECK_THROWS_AS(build_from_store<float>(def, bad), DimensionError);
  WeightStore extra = good;
  extra.put_values<float>("stray.tensor", {1}, std::vector<float>{0});
  CHECK_THROWS_AS(build_from_store<float>(def, extra), ContractError);
}
