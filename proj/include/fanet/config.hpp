#ifndef FANET_CONFIG_HPP
#define FANET_CONFIG_HPP

#include "fanet/data.hpp"
#include "fanet/inference.hpp"
#include "fanet/metrics.hpp"
#include "fanet/network_config.hpp"
#include "fanet/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace fanet {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::string manifest;  // empty: use the synthetic generator
  SyntheticSpec synthetic;
};

/// Everything a command needs. The JSON document has one object per member
/// (network, train, data, inference, eval); unknown keys are rejected.
struct AppConfig {
  NetworkConfig network;
  TrainConfig train;
  DataConfig data;
  InferenceOptions inference;
  EvalOptions eval;
};

nlohmann::json to_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const AppConfig& config);
AppConfig app_config_from_json(const nlohmann::json& doc);

/// Parses "section.key=value". The value is read as JSON when it parses as
/// such, as a JSON array when it contains commas, and as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Defaults, then the file (if given), then each override in order.
AppConfig load_app_config(const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides = {});

}  // namespace fanet

#endif  // FANET_CONFIG_HPP
