#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "rdrnet/network.hpp"
#include "rdrnet/network_def.hpp"
#include "rdrnet/weight_store.hpp"

namespace rdrnet {

// Train-structure store -> deploy-structure store of the same dtype. Throws
// ContractError for a store that is already in deploy structure and
// MissingSlotError when a train slot is absent.
WeightStore convert_checkpoint(const WeightStore& train_store, const NetworkDef& def);

// YAML network description; schema in docs/config.md. Throws ConfigError with the
// offending line for syntax errors, unknown keys, wrong types and missing keys.
NetworkDef parse_config(std::string_view text);
NetworkDef load_config(const std::filesystem::path& path);

// A path to an existing file is loaded; anything else is looked up as a preset name.
NetworkDef resolve_config(const std::string& path_or_preset);

// Emits a config that parse_config maps back to `def`.
std::string dump_config(const NetworkDef& def);

}  // namespace rdrnet
