#include "rdrnet/model_io.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace rdrnet {

template <class T>
static WeightStore convert_as(const WeightStore& store, const NetworkDef& def) {
  return export_weights(reparameterize_network(build_from_store<T>(def, store)));
}

WeightStore convert_checkpoint(const WeightStore& train_store, const NetworkDef& def) {
  if (detect_structure(train_store) == Structure::Deploy)
    throw ContractError("checkpoint is already in deploy structure; there is no BN left to fold");
  if (train_store.empty()) throw MissingSlotError("stage1.block0.conv3.weight");
  const DType dtype = train_store.entries().front().second.dtype;
  for (const auto& [name, rec] : train_store.entries())
    if (rec.dtype != dtype) throw ContractError("checkpoint mixes f32 and f64 tensors ('" + name + "')");
  return dtype == DType::F32 ? convert_as<float>(train_store, def) : convert_as<double>(train_store, def);
}

// ---------------------------------------------------------------------------

namespace {

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

void expect_map(const YAML::Node& n, const std::string& what) {
  if (!n.IsMap()) throw ConfigError(line_of(n), what + " must be a mapping");
}

// Rejects keys outside `allowed`.
void check_keys(const YAML::Node& n, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(line_of(kv.first), "unknown key '" + key + "' in " + where);
  }
}

std::size_t get_size(const YAML::Node& n, const std::string& key) {
  try {
    const long long v = n.as<long long>();
    if (v < 0) throw ConfigError(line_of(n), "'" + key + "' must be non-negative");
    return static_cast<std::size_t>(v);
  } catch (const YAML::BadConversion&) {
    throw ConfigError(line_of(n), "'" + key + "' must be an integer");
  }
}

bool get_bool(const YAML::Node& n, const std::string& key) {
  try {
    return n.as<bool>();
  } catch (const YAML::BadConversion&) {
    throw ConfigError(line_of(n), "'" + key + "' must be true or false");
  }
}

std::string get_string(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ConfigError(line_of(n), "'" + key + "' must be a string");
  return n.as<std::string>();
}

void read_stem(const YAML::Node& n, const std::string& key, StemStage& s) {
  expect_map(n, key);
  check_keys(n, {"width", "blocks"}, key);
  if (n["width"]) s.width = get_size(n["width"], key + ".width");
  if (n["blocks"]) s.blocks = get_size(n["blocks"], key + ".blocks");
}

void read_dual(const YAML::Node& n, const std::string& key, DualStage& s) {
  expect_map(n, key);
  check_keys(n, {"semantic", "detail"}, key);
  StemStage sem{s.semantic_width, s.semantic_blocks}, det{s.detail_width, s.detail_blocks};
  if (n["semantic"]) read_stem(n["semantic"], key + ".semantic", sem);
  if (n["detail"]) read_stem(n["detail"], key + ".detail", det);
  s = {sem.width, sem.blocks, det.width, det.blocks};
}

const std::set<std::string> kTopKeys = {"variant",  "base",   "input_channels", "num_classes", "head_channels",
                                        "stage1",   "stage2", "stage3",         "stage4",      "stage5",
                                        "stage6",   "rppm",   "fusion1",        "fusion2",     "aux_head",
                                        "rb"};

// Keys that must be present when the config does not start from a `base` preset.
const char* const kRequired[] = {"variant", "num_classes", "head_channels", "stage1", "stage2",
                                 "stage3",  "stage4",      "stage5",        "stage6"};

}  // namespace

NetworkDef parse_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.mark.line >= 0 ? e.mark.line + 1 : 0, e.msg);
  }
  if (!root.IsMap()) throw ConfigError(line_of(root), "config root must be a mapping");
  check_keys(root, kTopKeys, "config root");

  NetworkDef def;
  if (root["base"]) {
    const auto base = get_string(root["base"], "base");
    try {
      def = preset(base);
    } catch (const ContractError& e) {
      throw ConfigError(line_of(root["base"]), e.what());
    }
  } else {
    for (const char* key : kRequired)
      if (!root[key]) throw ConfigError(0, std::string("missing required key '") + key + "'");
  }

  if (root["variant"]) def.variant = get_string(root["variant"], "variant");
  if (root["input_channels"]) def.input_channels = get_size(root["input_channels"], "input_channels");
  if (root["num_classes"]) def.num_classes = get_size(root["num_classes"], "num_classes");
  if (root["head_channels"]) def.head_channels = get_size(root["head_channels"], "head_channels");
  if (root["stage1"]) read_stem(root["stage1"], "stage1", def.stage1);
  if (root["stage2"]) read_stem(root["stage2"], "stage2", def.stage2);
  if (root["stage3"]) read_stem(root["stage3"], "stage3", def.stage3);
  if (root["stage4"]) read_dual(root["stage4"], "stage4", def.stage4);
  if (root["stage5"]) read_dual(root["stage5"], "stage5", def.stage5);
  if (root["stage6"]) read_dual(root["stage6"], "stage6", def.stage6);
  if (const auto n = root["rppm"]) {
    expect_map(n, "rppm");
    check_keys(n, {"enabled", "branch_width"}, "rppm");
    if (n["enabled"]) def.enable_rppm = get_bool(n["enabled"], "rppm.enabled");
    if (n["branch_width"]) def.rppm_branch_width = get_size(n["branch_width"], "rppm.branch_width");
  }
  if (root["fusion1"]) def.enable_fusion1 = get_bool(root["fusion1"], "fusion1");
  if (root["fusion2"]) def.enable_fusion2 = get_bool(root["fusion2"], "fusion2");
  if (root["aux_head"]) def.aux_head = get_bool(root["aux_head"], "aux_head");
  if (const auto n = root["rb"]) {
    expect_map(n, "rb");
    check_keys(n, {"pointwise_path", "pointwise_convs", "residual", "residual_bn"}, "rb");
    if (n["pointwise_path"]) def.rb.pointwise_path = get_bool(n["pointwise_path"], "rb.pointwise_path");
    if (n["pointwise_convs"]) def.rb.pointwise_convs = get_size(n["pointwise_convs"], "rb.pointwise_convs");
    if (n["residual"]) def.rb.residual = get_bool(n["residual"], "rb.residual");
    if (n["residual_bn"]) def.rb.residual_bn = get_bool(n["residual_bn"], "rb.residual_bn");
  }
  try {
    def.validate();
  } catch (const ContractError& e) {
    throw ConfigError(0, e.what());
  }
  return def;
}

NetworkDef load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

NetworkDef resolve_config(const std::string& path_or_preset) {
  if (std::filesystem::is_regular_file(path_or_preset)) return load_config(path_or_preset);
  for (const auto& name : preset_names())
    if (name == path_or_preset) return preset(name);
  throw IoError("'" + path_or_preset + "' is neither a config file nor a preset name");
}

std::string dump_config(const NetworkDef& d) {
  std::ostringstream os;
  const auto b = [](bool v) { return v ? "true" : "false"; };
  const auto stem = [&](const char* key, const StemStage& s) {
    os << key << ": {width: " << s.width << ", blocks: " << s.blocks << "}\n";
  };
  const auto dual = [&](const char* key, const DualStage& s) {
    os << key << ":\n  semantic: {width: " << s.semantic_width << ", blocks: " << s.semantic_blocks << "}\n"
       << "  detail: {width: " << s.detail_width << ", blocks: " << s.detail_blocks << "}\n";
  };
  os << "variant: " << d.variant << "\n";
  os << "input_channels: " << d.input_channels << "\n";
  os << "num_classes: " << d.num_classes << "\n";
  os << "head_channels: " << d.head_channels << "\n";
  stem("stage1", d.stage1);
  stem("stage2", d.stage2);
  stem("stage3", d.stage3);
  dual("stage4", d.stage4);
  dual("stage5", d.stage5);
  dual("stage6", d.stage6);
  os << "rppm:\n  enabled: " << b(d.enable_rppm) << "\n  branch_width: " << d.rppm_branch_width << "\n";
  os << "fusion1: " << b(d.enable_fusion1) << "\n";
  os << "fusion2: " << b(d.enable_fusion2) << "\n";
  os << "aux_head: " << b(d.aux_head) << "\n";
  os << "rb:\n  pointwise_path: " << b(d.rb.pointwise_path) << "\n  pointwise_convs: " << d.rb.pointwise_convs
     << "\n  residual: " << b(d.rb.residual) << "\n  residual_bn: " << b(d.rb.residual_bn) << "\n";
  return os.str();
}

}  // namespace rdrnet
