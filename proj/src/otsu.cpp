#include "fanet/otsu.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace fanet {

OtsuResult otsu_threshold(const Eigen::ArrayXXd& image, int levels) {
  if (image.size() == 0) throw std::invalid_argument("otsu_threshold: empty image");
  if (!image.isFinite().all()) throw std::invalid_argument("otsu_threshold: non-finite intensity");
  if (levels < 2) throw std::invalid_argument("otsu_threshold: need at least two levels");

  const auto bin_of = [levels](double v) {
    return static_cast<int>(std::clamp(std::ceil(v - 0.5), 0.0, static_cast<double>(levels - 1)));
  };
  std::vector<double> hist(levels, 0.0);
  for (Index x = 0; x < image.cols(); ++x)
    for (Index y = 0; y < image.rows(); ++y) hist[bin_of(image(y, x))] += 1.0;

  const double total = static_cast<double>(image.size());
  double total_mean = 0.0;
  for (int k = 0; k < levels; ++k) total_mean += k * hist[k];
  total_mean /= total;

  int best = -1;
  double best_variance = -1.0;
  double cum_weight = 0.0;
  double cum_mean = 0.0;
  for (int k = 0; k < levels - 1; ++k) {
    cum_weight += hist[k] / total;
    cum_mean += k * hist[k] / total;
    if (cum_weight <= 0.0 || cum_weight >= 1.0) continue;
    const double diff = total_mean * cum_weight - cum_mean;
    const double variance = diff * diff / (cum_weight * (1.0 - cum_weight));
    if (variance > best_variance) {
      best_variance = variance;
      best = k;
    }
  }

  MaskArray values(image.rows(), image.cols());
  if (best < 0) {
    values.setZero();
    return {BinaryMask(std::move(values)), image.maxCoeff()};
  }
  for (Index y = 0; y < image.rows(); ++y)
    for (Index x = 0; x < image.cols(); ++x) values(y, x) = bin_of(image(y, x)) > best ? 1 : 0;
  return {BinaryMask(std::move(values)), best + 0.5};
}

OtsuResult otsu_threshold(const Plane& image, int levels) {
  return otsu_threshold(Eigen::ArrayXXd(image.cast<double>()), levels);
}

BinaryMask otsu_mask(const Image& image) {
  const Plane gray = (luminance(image) * 255.0f).round();
  return otsu_threshold(gray, 256).mask;
}

}  // namespace fanet
