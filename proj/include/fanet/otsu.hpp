#ifndef FANET_OTSU_HPP
#define FANET_OTSU_HPP

#include "fanet/image.hpp"
#include "fanet/mask.hpp"

namespace fanet {

struct OtsuResult {
  BinaryMask mask;
  double threshold = 0.0;
};

/// Global Otsu threshold over a `levels`-bin histogram. Intensities are on the
/// [0, levels - 1] scale; bin k holds (k - 0.5, k + 0.5]. Candidate thresholds
/// are the bin boundaries k + 0.5, and the one maximising the between-class
/// variance wins (smallest on ties). The mask is 1 where intensity > threshold.
/// An image whose pixels all share one bin yields an empty mask and its
/// maximum value as threshold.
OtsuResult otsu_threshold(const Eigen::ArrayXXd& image, int levels = 256);
OtsuResult otsu_threshold(const Plane& image, int levels = 256);

/// Initial feedback mask for an RGB/gray image in [0, 1]: Otsu on 8-bit luminance.
BinaryMask otsu_mask(const Image& image);

}  // namespace fanet

#endif  // FANET_OTSU_HPP
