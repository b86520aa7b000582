#include "rdrnet/weight_store.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace rdrnet {
namespace {

static_assert(std::endian::native == std::endian::little, "RDRW IO assumes a little-endian host");

constexpr char kMagic[4] = {'R', 'D', 'R', 'W'};

class Writer {
 public:
  template <class U>
  void put(U v) {
    const auto* p = reinterpret_cast<const std::byte*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(U));
  }
  void put_bytes(std::span<const std::byte> b) { bytes.insert(bytes.end(), b.begin(), b.end()); }
  std::vector<std::byte> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> b) : bytes_(b) {}
  template <class U>
  U get(const char* what) {
    U v;
    std::memcpy(&v, take(sizeof(U), what).data(), sizeof(U));
    return v;
  }
  std::span<const std::byte> take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw FormatError(FormatError::Kind::Truncated, std::string("RDRW truncated while reading ") + what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t TensorRecord::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

template <class T>
std::vector<T> TensorRecord::values() const {
  const std::size_t n = element_count();
  std::vector<T> out(n);
  if (dtype == DType::F32) {
    for (std::size_t i = 0; i < n; ++i) {
      float v;
      std::memcpy(&v, payload.data() + i * 4, 4);
      out[i] = static_cast<T>(v);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double v;
      std::memcpy(&v, payload.data() + i * 8, 8);
      out[i] = static_cast<T>(v);
    }
  }
  return out;
}

template std::vector<float> TensorRecord::values<float>() const;
template std::vector<double> TensorRecord::values<double>() const;

bool is_valid_tensor_name(std::string_view name) {
  if (name.empty() || name.size() > 0xFFFF) return false;
  bool segment_empty = true;
  for (char ch : name) {
    if (ch == '.') {
      if (segment_empty) return false;
      segment_empty = true;
    } else if ((ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '_') {
      segment_empty = false;
    } else {
      return false;
    }
  }
  return !segment_empty;
}

void WeightStore::put(std::string name, TensorRecord record) {
  if (!is_valid_tensor_name(name)) throw ContractError("invalid tensor name '" + name + "'");
  if (contains(name)) throw ContractError("duplicate tensor name '" + name + "'");
  if (record.dims.size() > 255) throw ContractError("tensor rank exceeds 255: " + name);
  if (record.payload.size() != record.element_count() * dtype_size(record.dtype))
    throw ContractError("payload size disagrees with dims for '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(record));
}

template <class T>
void WeightStore::put_values(std::string name, std::vector<std::uint64_t> dims, std::span<const T> data) {
  TensorRecord r;
  r.dtype = dtype_of<T>::value;
  r.dims = std::move(dims);
  r.payload.resize(data.size_bytes());
  std::memcpy(r.payload.data(), data.data(), data.size_bytes());
  put(std::move(name), std::move(r));
}

template void WeightStore::put_values<float>(std::string, std::vector<std::uint64_t>, std::span<const float>);
template void WeightStore::put_values<double>(std::string, std::vector<std::uint64_t>, std::span<const double>);

const TensorRecord& WeightStore::at(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw MissingSlotError(name);
  return entries_[it->second].second;
}

WeightStore WeightStore::cast(DType dtype) const {
  WeightStore out;
  for (const auto& [name, rec] : entries_) {
    if (rec.dtype == dtype) {
      out.put(name, rec);
    } else if (dtype == DType::F32) {
      const auto v = rec.values<float>();
      out.put_values<float>(name, rec.dims, v);
    } else {
      const auto v = rec.values<double>();
      out.put_values<double>(name, rec.dims, v);
    }
  }
  return out;
}

std::uint32_t crc32(std::span<const std::byte> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t tensor_checksum(const TensorRecord& record) { return crc32(record.payload); }

std::vector<std::byte> serialize(const WeightStore& store) {
  Writer w;
  w.put_bytes(std::as_bytes(std::span(kMagic)));
  w.put<std::uint16_t>(kRdrwVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, rec] : store.entries()) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.put_bytes(std::as_bytes(std::span(name.data(), name.size())));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(rec.dtype));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(rec.dims.size()));
    for (auto d : rec.dims) w.put<std::uint64_t>(d);
    w.put_bytes(rec.payload);
  }
  w.put<std::uint32_t>(crc32(w.bytes));
  return std::move(w.bytes);
}

WeightStore deserialize(std::span<const std::byte> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    if (bytes.size() < 4) throw FormatError(FormatError::Kind::Truncated, "RDRW truncated before magic");
    throw FormatError(FormatError::Kind::BadMagic, "not an RDRW file (bad magic)");
  }
  Reader head(bytes.subspan(4));
  const auto version = head.get<std::uint16_t>("version");
  if (version != kRdrwVersion)
    throw FormatError(FormatError::Kind::VersionMismatch,
                      "unsupported RDRW version " + std::to_string(version) + " (expected 1)");
  if (bytes.size() < 4 + 2 + 4 + 4) throw FormatError(FormatError::Kind::Truncated, "RDRW truncated header");

  const auto body = bytes.first(bytes.size() - 4);
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);

  // Parse first so a cut-off file reports truncation rather than a checksum failure.
  Reader r(body.subspan(6));
  WeightStore store;
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>("name length");
    const auto name_bytes = r.take(name_len, "name");
    std::string name(reinterpret_cast<const char*>(name_bytes.data()), name_len);
    const auto dtype_raw = r.get<std::uint8_t>("dtype");
    if (dtype_raw > 1) throw FormatError(FormatError::Kind::Malformed, "unknown dtype code for '" + name + "'");
    const auto rank = r.get<std::uint8_t>("rank");
    TensorRecord rec;
    rec.dtype = static_cast<DType>(dtype_raw);
    for (std::uint8_t k = 0; k < rank; ++k) rec.dims.push_back(r.get<std::uint64_t>("dims"));
    const std::size_t nbytes = rec.element_count() * dtype_size(rec.dtype);
    if (nbytes > r.remaining()) {
      // Distinguish a genuinely cut file from a corrupted length field via the CRC.
      if (crc32(body) == stored_crc)
        throw FormatError(FormatError::Kind::Malformed, "payload of '" + name + "' exceeds file size");
      throw FormatError(FormatError::Kind::Truncated, "RDRW truncated in payload of '" + name + "'");
    }
    const auto payload = r.take(nbytes, "payload");
    rec.payload.assign(payload.begin(), payload.end());
    try {
      store.put(std::move(name), std::move(rec));
    } catch (const ContractError& e) {
      throw FormatError(FormatError::Kind::Malformed, e.what());
    }
  }
  if (crc32(body) != stored_crc) throw FormatError(FormatError::Kind::CrcMismatch, "RDRW CRC32 mismatch");
  if (r.remaining() != 0) throw FormatError(FormatError::Kind::Malformed, "trailing bytes after last tensor");
  return store;
}

void save(const WeightStore& store, const std::filesystem::path& path) {
  const auto bytes = serialize(store);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

WeightStore load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weights: " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(std::as_bytes(std::span(raw)));
}

}  // namespace rdrnet
