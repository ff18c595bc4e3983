#ifndef FANET_IMAGE_HPP
#define FANET_IMAGE_HPP

#include "fanet/mask.hpp"

#include <filesystem>
#include <vector>

namespace fanet {

using Plane = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Planar image with intensities in [0, 1]; RGB images have three planes.
struct Image {
  std::vector<Plane> channels;

  static Image zeros(Index channel_count, Index height, Index width);

  Index channel_count() const { return static_cast<Index>(channels.size()); }
  Index height() const { return channels.empty() ? 0 : channels.front().rows(); }
  Index width() const { return channels.empty() ? 0 : channels.front().cols(); }

  bool operator==(const Image& other) const;
};

/// 0.299 R + 0.587 G + 0.114 B for RGB input, the single plane otherwise.
Plane luminance(const Image& image);

/// Half-pixel-centred bilinear resampling. Same-size requests return the input.
Plane resize_bilinear(const Plane& plane, Index height, Index width);
Image resize_bilinear(const Image& image, Index height, Index width);

BinaryMask resize_nearest(const BinaryMask& mask, Index height, Index width);

/// Reads PNG/JPEG as RGB in [0, 1]. Throws std::runtime_error if unreadable.
Image read_image(const std::filesystem::path& path);
/// Reads a single-channel mask; pixels above `threshold` (0-255 scale) are foreground.
BinaryMask read_mask(const std::filesystem::path& path, int threshold = 127);

void write_image(const std::filesystem::path& path, const Image& image);
/// Writes foreground as 255 and background as 0.
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace fanet

#endif  // FANET_IMAGE_HPP
