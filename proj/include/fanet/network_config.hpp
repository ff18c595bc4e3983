#ifndef FANET_NETWORK_CONFIG_HPP
#define FANET_NETWORK_CONFIG_HPP

#include <optional>
#include <string>
#include <vector>

namespace fanet {

enum class MixPoolPlacement { none, all_stages, first_encoder_last_decoder };

/// The four ablation settings: baseline, +MixPool, +MixPool(E1, D4) with
/// feedback, and the full network with feedback.
enum class Ablation { B1, B2, B3, B4 };

struct NetworkConfig {
  int depth = 4;
  std::vector<int> base_widths{32, 64, 128, 256};
  int in_channels = 3;
  int se_reduction = 16;
  int se_blocks_per_stage = 2;
  MixPoolPlacement mixpool_placement = MixPoolPlacement::all_stages;
  bool mixpool_use_Fl_branch = true;
  bool feedback_at_inference = true;
  double binarize_threshold = 0.5;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  static NetworkConfig for_ablation(Ablation ablation, NetworkConfig base);
  static NetworkConfig for_ablation(Ablation ablation);
  /// The ablation this config corresponds to, if any.
  std::optional<Ablation> ablation() const;

  /// Whether the previous mask is an input at all (MixPool blocks and the head).
  bool uses_feedback() const { return mixpool_placement != MixPoolPlacement::none; }
  bool encoder_has_mixpool(int stage) const;
  bool decoder_has_mixpool(int stage) const;
  /// Decoder stage i (counted from the bottom) mirrors encoder stage depth-1-i
  /// at half its width.
  int decoder_width(int stage) const;
  /// Input spatial sizes must be multiples of this.
  int size_multiple() const { return 1 << depth; }

  bool operator==(const NetworkConfig&) const = default;
};

/// One row per block boundary: where channel counts change.
struct StageChannels {
  std::string stage;
  int in = 0;          // channels entering the stage
  int blocks_out = 0;  // after the SE-Residual blocks (the skip tensor for encoders)
  int out = 0;         // after MixPool, if present
};
std::vector<StageChannels> channel_table(const NetworkConfig& config);

std::string to_string(MixPoolPlacement placement);
MixPoolPlacement parse_mixpool_placement(const std::string& text);
std::string to_string(Ablation ablation);
Ablation parse_ablation(const std::string& text);

}  // namespace fanet

#endif  // FANET_NETWORK_CONFIG_HPP
