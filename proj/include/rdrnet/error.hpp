#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rdrnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement on a named axis ("channels", "height", "input.width", ...).
class DimensionError : public Error {
 public:
  DimensionError(std::string axis, std::size_t expected, std::size_t actual,
                 const std::string& context = {});
  DimensionError(std::string axis, const std::string& message);

  const std::string& axis() const noexcept { return axis_; }

 private:
  std::string axis_;
};

// A precondition of an operation or pass does not hold.
class ContractError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  enum class Kind { BadMagic, VersionMismatch, CrcMismatch, Truncated, Malformed };

  FormatError(Kind kind, const std::string& message);
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class ConfigError : public Error {
 public:
  ConfigError(int line, const std::string& message);
  // 1-based; 0 when the error has no source position.
  int line() const noexcept { return line_; }

 private:
  int line_;
};

// A named parameter slot required by the network structure is missing from a weight store.
class MissingSlotError : public Error {
 public:
  explicit MissingSlotError(std::string slot);
  const std::string& slot() const noexcept { return slot_; }

 private:
  std::string slot_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rdrnet
