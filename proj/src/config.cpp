#include "fanet/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace fanet {

using nlohmann::json;

namespace {

struct Field {
  std::string key;
  std::function<json()> get;
  std::function<void(const json&)> set;
};

template <typename T>
Field field(const std::string& key, T& ref) {
  return {key, [&ref] { return json(ref); }, [&ref](const json& v) { ref = v.get<T>(); }};
}

template <typename Enum>
Field enum_field(const std::string& key, Enum& ref, std::string (*to_text)(Enum), Enum (*parse)(const std::string&)) {
  return {key, [&ref, to_text] { return json(to_text(ref)); },
          [&ref, parse](const json& v) { ref = parse(v.get<std::string>()); }};
}

std::vector<Field> fields(NetworkConfig& c) {
  return {field("depth", c.depth),
          field("base_widths", c.base_widths),
          field("in_channels", c.in_channels),
          field("se_reduction", c.se_reduction),
          field("se_blocks_per_stage", c.se_blocks_per_stage),
          enum_field<MixPoolPlacement>("mixpool_placement", c.mixpool_placement, to_string, parse_mixpool_placement),
          field("mixpool_use_Fl_branch", c.mixpool_use_Fl_branch),
          field("feedback_at_inference", c.feedback_at_inference),
          field("binarize_threshold", c.binarize_threshold)};
}

std::vector<Field> fields(TrainConfig& c) {
  return {field("epochs", c.epochs),
          field("learning_rate", c.learning_rate),
          field("beta1", c.beta1),
          field("beta2", c.beta2),
          field("adam_eps", c.adam_eps),
          field("batch_size", c.batch_size),
          field("plateau_patience", c.plateau_patience),
          field("plateau_factor", c.plateau_factor),
          field("plateau_min_lr", c.plateau_min_lr),
          field("plateau_threshold", c.plateau_threshold),
          field("dice_smooth", c.dice_smooth),
          field("seed", c.seed),
          field("val_fraction", c.val_fraction),
          field("augment_variants", c.augment_variants),
          field("shuffle", c.shuffle)};
}

std::vector<Field> fields(SyntheticSpec& c) {
  return {field("count", c.count),         field("test_count", c.test_count), field("size", c.size),
          field("channels", c.channels),   field("min_blobs", c.min_blobs),   field("max_blobs", c.max_blobs),
          field("noise", c.noise),         field("seed", c.seed)};
}

std::vector<Field> fields(InferenceOptions& c) {
  return {field("iterations", c.iterations), field("early_stop", c.early_stop)};
}

std::vector<Field> fields(EvalOptions& c) {
  return {enum_field<Aggregation>("aggregation", c.aggregation, to_string, parse_aggregation),
          enum_field<MiouMode>("miou", c.miou, to_string, parse_miou_mode)};
}

json dump(const std::vector<Field>& fs) {
  json out = json::object();
  for (const auto& f : fs) out[f.key] = f.get();
  return out;
}

void read(const json& doc, const std::vector<Field>& fs, const std::string& section,
          const std::set<std::string>& nested = {}) {
  if (!doc.is_object()) throw ConfigError("'" + section + "' must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (nested.count(key)) continue;
    auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.key == key; });
    if (it == fs.end()) throw ConfigError("unknown config key '" + section + "." + key + "'");
    try {
      it->set(value);
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + section + "." + key + "': " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("config key '" + section + "." + key + "': " + e.what());
    }
  }
}

json parse_scalar(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

}  // namespace

json to_json(const NetworkConfig& config) {
  NetworkConfig copy = config;
  return dump(fields(copy));
}

NetworkConfig network_config_from_json(const json& doc) {
  NetworkConfig c;
  read(doc, fields(c), "network");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json to_json(const AppConfig& config) {
  AppConfig c = config;
  json data = json::object();
  data["manifest"] = c.data.manifest;
  data["synthetic"] = dump(fields(c.data.synthetic));
  return {{"network", dump(fields(c.network))},
          {"train", dump(fields(c.train))},
          {"data", data},
          {"inference", dump(fields(c.inference))},
          {"eval", dump(fields(c.eval))}};
}

AppConfig app_config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  AppConfig c;
  for (const auto& [section, value] : doc.items()) {
    if (section == "network") {
      read(value, fields(c.network), section);
    } else if (section == "train") {
      read(value, fields(c.train), section);
    } else if (section == "inference") {
      read(value, fields(c.inference), section);
    } else if (section == "eval") {
      read(value, fields(c.eval), section);
    } else if (section == "data") {
      std::string& manifest = c.data.manifest;
      read(value, {field("manifest", manifest)}, section, {"synthetic"});
      if (value.contains("synthetic")) read(value["synthetic"], fields(c.data.synthetic), "data.synthetic");
    } else {
      throw ConfigError("unknown config section '" + section + "'");
    }
  }
  try {
    c.network.validate();
    c.train.validate();
    c.inference.validate();
    if (c.data.manifest.empty()) c.data.synthetic.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    if (text.find(',') != std::string::npos) {
      value = json::array();
      std::stringstream items(text);
      for (std::string item; std::getline(items, item, ',');) value.push_back(parse_scalar(item));
    } else {
      value = text;
    }
  }

  json* node = &doc;
  std::stringstream keys(path);
  std::string key;
  std::vector<std::string> parts;
  while (std::getline(keys, key, '.')) parts.push_back(key);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].empty()) throw ConfigError("override '" + assignment + "' has an empty key");
    if (!node->is_object()) throw ConfigError("override '" + assignment + "' descends into a non-object");
    if (i + 1 == parts.size()) {
      (*node)[parts[i]] = value;
    } else {
      node = &(*node)[parts[i]];
      if (node->is_null()) *node = json::object();
    }
  }
}

AppConfig load_app_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
  json doc = to_json(AppConfig{});
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config " + path->string());
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config " + path->string() + ": " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config " + path->string() + " must hold a JSON object");
    doc.merge_patch(file);
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return app_config_from_json(doc);
}

}  // namespace fanet
