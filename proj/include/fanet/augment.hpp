#ifndef FANET_AUGMENT_HPP
#define FANET_AUGMENT_HPP

#include "fanet/data.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fanet {

/// Recipe k applies kind k % 16. Spatial kinds move image and mask together;
/// photometric kinds touch the image only.
enum class AugmentKind {
  identity,
  hflip,
  vflip,
  rot90,
  rot180,
  rot270,
  crop,
  rotate,
  elastic,
  grid_distortion,
  optical_distortion,
  grayscale,
  brightness,
  contrast,
  channel_dropout,
  coarse_dropout,
};
inline constexpr int kAugmentKinds = 16;

AugmentKind augment_kind(int recipe_index);
std::string to_string(AugmentKind kind);
bool is_spatial(AugmentKind kind);

/// Source coordinates of every output pixel centre, in pixel units of the
/// input (pixel (y, x) is centred at (y, x)). Empty for photometric kinds.
struct Warp {
  Plane src_y, src_x;
};

struct AugmentResult {
  Sample sample;
  AugmentKind kind = AugmentKind::identity;
  std::optional<Warp> warp;
};

/// Variant id of a base sample: the base id itself for recipe 0, otherwise
/// "<id>#aug<k>".
std::string augmented_id(const std::string& base_id, int recipe_index);

/// Deterministic in (sample id, recipe index, seed). Images are resampled
/// bilinearly and masks by nearest neighbour; pixels mapped from outside the
/// input read as zero.
AugmentResult augment_offline(const Sample& sample, int recipe_index, std::uint64_t seed = 0);

/// Recipes 0..variants-1 for every sample, in sample-major order.
std::vector<Sample> augment_dataset(const std::vector<Sample>& samples, int variants, std::uint64_t seed = 0);

}  // namespace fanet

#endif  // FANET_AUGMENT_HPP
