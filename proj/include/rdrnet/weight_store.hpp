#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rdrnet/tensor.hpp"

namespace rdrnet {

struct TensorRecord {
  DType dtype = DType::F32;
  std::vector<std::uint64_t> dims;
  std::vector<std::byte> payload;  // little-endian, row-major

  std::size_t element_count() const;
  // Decodes the payload, converting to T if the stored dtype differs.
  template <class T>
  std::vector<T> values() const;

  friend bool operator==(const TensorRecord&, const TensorRecord&) = default;
};

// Ordered collection of named tensors. Names follow the grammar
//   name    := segment ("." segment)*
//   segment := [a-z0-9_]+
class WeightStore {
 public:
  // Throws ContractError on a malformed or duplicate name, or a payload/dims mismatch.
  void put(std::string name, TensorRecord record);

  template <class T>
  void put_values(std::string name, std::vector<std::uint64_t> dims, std::span<const T> data);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  // Throws MissingSlotError.
  const TensorRecord& at(const std::string& name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<std::pair<std::string, TensorRecord>>& entries() const noexcept { return entries_; }

  WeightStore cast(DType dtype) const;

  friend bool operator==(const WeightStore& a, const WeightStore& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<std::pair<std::string, TensorRecord>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

bool is_valid_tensor_name(std::string_view name);

// RDRW v1 container:
//   "RDRW" | u16 version | u32 count | per tensor { u16 name_len, name, u8 dtype, u8 rank,
//   rank x u64 dims, payload } | u32 CRC32 of every preceding byte. All little-endian.
inline constexpr std::uint16_t kRdrwVersion = 1;

std::vector<std::byte> serialize(const WeightStore& store);
// Throws FormatError with kind BadMagic, VersionMismatch, CrcMismatch, Truncated or Malformed.
WeightStore deserialize(std::span<const std::byte> bytes);

// Writes to a sibling temp file then renames over `path`.
void save(const WeightStore& store, const std::filesystem::path& path);
WeightStore load(const std::filesystem::path& path);

std::uint32_t crc32(std::span<const std::byte> bytes);
// CRC32 of a tensor's payload bytes.
std::uint32_t tensor_checksum(const TensorRecord& record);

}  // namespace rdrnet
