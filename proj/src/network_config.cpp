#include "fanet/network_config.hpp"

#include <algorithm>
#include <stdexcept>

namespace fanet {

void NetworkConfig::validate() const {
  if (depth < 1) throw std::invalid_argument("network.depth must be at least 1");
  if (static_cast<int>(base_widths.size()) != depth) {
    throw std::invalid_argument("network.base_widths needs one width per stage (" + std::to_string(depth) + ")");
  }
  if (std::any_of(base_widths.begin(), base_widths.end(), [](int w) { return w < 1; })) {
    throw std::invalid_argument("network.base_widths must be positive");
  }
  if (in_channels < 1) throw std::invalid_argument("network.in_channels must be positive");
  if (se_reduction < 1) throw std::invalid_argument("network.se_reduction must be positive");
  if (se_blocks_per_stage < 1 || se_blocks_per_stage > 4) {
    throw std::invalid_argument("network.se_blocks_per_stage must be in [1, 4]");
  }
  if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0)) {
    throw std::invalid_argument("network.binarize_threshold must be in (0, 1)");
  }
}

NetworkConfig NetworkConfig::for_ablation(Ablation ablation, NetworkConfig base) {
  switch (ablation) {
    case Ablation::B1:
      base.mixpool_placement = MixPoolPlacement::none;
      base.feedback_at_inference = false;
      break;
    case Ablation::B2:
      base.mixpool_placement = MixPoolPlacement::all_stages;
      base.feedback_at_inference = false;
      break;
    case Ablation::B3:
      base.mixpool_placement = MixPoolPlacement::first_encoder_last_decoder;
      base.feedback_at_inference = true;
      break;
    case Ablation::B4:
      base.mixpool_placement = MixPoolPlacement::all_stages;
      base.feedback_at_inference = true;
      break;
  }
  return base;
}

NetworkConfig NetworkConfig::for_ablation(Ablation ablation) { return for_ablation(ablation, NetworkConfig{}); }

std::optional<Ablation> NetworkConfig::ablation() const {
  switch (mixpool_placement) {
    case MixPoolPlacement::none:
      return Ablation::B1;
    case MixPoolPlacement::all_stages:
      return feedback_at_inference ? Ablation::B4 : Ablation::B2;
    case MixPoolPlacement::first_encoder_last_decoder:
      if (feedback_at_inference) return Ablation::B3;
      return std::nullopt;
  }
  return std::nullopt;
}

bool NetworkConfig::encoder_has_mixpool(int stage) const {
  switch (mixpool_placement) {
    case MixPoolPlacement::none:
      return false;
    case MixPoolPlacement::all_stages:
      return true;
    case MixPoolPlacement::first_encoder_last_decoder:
      return stage == 0;
  }
  return false;
}

bool NetworkConfig::decoder_has_mixpool(int stage) const {
  switch (mixpool_placement) {
    case MixPoolPlacement::none:
      return false;
    case MixPoolPlacement::all_stages:
      return true;
    case MixPoolPlacement::first_encoder_last_decoder:
      return stage == depth - 1;
  }
  return false;
}

int NetworkConfig::decoder_width(int stage) const { return std::max(1, base_widths.at(depth - 1 - stage) / 2); }

std::vector<StageChannels> channel_table(const NetworkConfig& config) {
  config.validate();
  std::vector<StageChannels> rows;
  const int mix_factor = config.mixpool_use_Fl_branch ? 2 : 1;
  int c = config.in_channels;
  for (int i = 0; i < config.depth; ++i) {
    const int w = config.base_widths[i];
    const int out = config.encoder_has_mixpool(i) ? mix_factor * w : w;
    rows.push_back({"encoder" + std::to_string(i + 1), c, w, out});
    c = out;
  }
  for (int j = 0; j < config.depth; ++j) {
    const int w = config.decoder_width(j);
    const int out = config.decoder_has_mixpool(j) ? mix_factor * w : w;
    rows.push_back({"decoder" + std::to_string(j + 1), c, w, out});
    c = out;
  }
  rows.push_back({"head", c + (config.uses_feedback() ? 1 : 0), 1, 1});
  return rows;
}

std::string to_string(MixPoolPlacement placement) {
  switch (placement) {
    case MixPoolPlacement::none:
      return "none";
    case MixPoolPlacement::all_stages:
      return "all_stages";
    case MixPoolPlacement::first_encoder_last_decoder:
      return "E1_D4";
  }
  return "?";
}

MixPoolPlacement parse_mixpool_placement(const std::string& text) {
  if (text == "none") return MixPoolPlacement::none;
  if (text == "all_stages") return MixPoolPlacement::all_stages;
  if (text == "E1_D4") return MixPoolPlacement::first_encoder_last_decoder;
  throw std::invalid_argument("unknown mixpool_placement '" + text + "' (expected none, all_stages or E1_D4)");
}

std::string to_string(Ablation ablation) { return "B" + std::to_string(static_cast<int>(ablation) + 1); }

Ablation parse_ablation(const std::string& text) {
  if (text == "B1") return Ablation::B1;
  if (text == "B2") return Ablation::B2;
  if (text == "B3") return Ablation::B3;
  if (text == "B4") return Ablation::B4;
  throw std::invalid_argument("unknown ablation '" + text + "' (expected B1, B2, B3 or B4)");
}

}  // namespace fanet
