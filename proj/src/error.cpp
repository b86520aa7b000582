#include "rdrnet/error.hpp"

namespace rdrnet {

DimensionError::DimensionError(std::string axis, std::size_t expected, std::size_t actual,
                               const std::string& context)
    : Error((context.empty() ? std::string() : context + ": ") + "dimension mismatch on axis '" +
            axis + "': expected " + std::to_string(expected) + ", got " + std::to_string(actual)),
      axis_(std::move(axis)) {}

DimensionError::DimensionError(std::string axis, const std::string& message)
    : Error("dimension error on axis '" + axis + "': " + message), axis_(std::move(axis)) {}

FormatError::FormatError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}

ConfigError::ConfigError(int line, const std::string& message)
    : Error(line > 0 ? "config line " + std::to_string(line) + ": " + message : "config: " + message),
      line_(line) {}

MissingSlotError::MissingSlotError(std::string slot)
    : Error("missing tensor for slot '" + slot + "'"), slot_(std::move(slot)) {}

}  // namespace rdrnet
