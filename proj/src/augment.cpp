#include "fanet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fanet {

namespace {

std::uint64_t recipe_seed(const std::string& id, int recipe_index, std::uint64_t seed) {
  // FNV-1a, so the stream does not depend on std::hash.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  for (unsigned char c : id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  mix(static_cast<std::uint64_t>(recipe_index));
  mix(seed);
  return h;
}

Warp make_warp(Index h, Index w, const std::function<std::pair<double, double>(double, double)>& source) {
  Warp warp{Plane(h, w), Plane(h, w)};
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      const auto [sy, sx] = source(static_cast<double>(y), static_cast<double>(x));
      warp.src_y(y, x) = static_cast<float>(sy);
      warp.src_x(y, x) = static_cast<float>(sx);
    }
  return warp;
}

float sample_bilinear(const Plane& p, double y, double x) {
  const double fy = std::floor(y), fx = std::floor(x);
  const auto y0 = static_cast<Index>(fy), x0 = static_cast<Index>(fx);
  const double ay = y - fy, ax = x - fx;
  auto at = [&](Index yy, Index xx) -> double {
    return (yy < 0 || xx < 0 || yy >= p.rows() || xx >= p.cols()) ? 0.0 : p(yy, xx);
  };
  const double v = (1 - ay) * ((1 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
                   ay * ((1 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
  return static_cast<float>(v);
}

Sample apply_warp(const Sample& s, const Warp& warp) {
  Sample out{s.id, Image::zeros(s.image.channel_count(), warp.src_y.rows(), warp.src_y.cols()),
             BinaryMask(warp.src_y.rows(), warp.src_y.cols())};
  for (Index y = 0; y < warp.src_y.rows(); ++y) {
    for (Index x = 0; x < warp.src_y.cols(); ++x) {
      const double sy = warp.src_y(y, x), sx = warp.src_x(y, x);
      for (Index c = 0; c < s.image.channel_count(); ++c) {
        out.image.channels[c](y, x) = sample_bilinear(s.image.channels[c], sy, sx);
      }
      const auto my = static_cast<Index>(std::lround(sy)), mx = static_cast<Index>(std::lround(sx));
      if (my >= 0 && mx >= 0 && my < s.mask.height() && mx < s.mask.width()) out.mask.set(y, x, s.mask(my, mx) == 1);
    }
  }
  return out;
}

// Exact index permutations for flips and quarter turns.
template <typename Array>
Array permute(const Array& a, AugmentKind kind) {
  switch (kind) {
    case AugmentKind::hflip:
      return a.rowwise().reverse();
    case AugmentKind::vflip:
      return a.colwise().reverse();
    case AugmentKind::rot90:  // counter-clockwise
      return a.transpose().colwise().reverse();
    case AugmentKind::rot180:
      return a.reverse();
    case AugmentKind::rot270:
      return a.transpose().rowwise().reverse();
    default:
      return a;
  }
}

std::pair<double, double> permute_source(AugmentKind kind, double y, double x, Index h, Index w) {
  switch (kind) {
    case AugmentKind::hflip:
      return {y, w - 1 - x};
    case AugmentKind::vflip:
      return {h - 1 - y, x};
    case AugmentKind::rot90:
      return {x, w - 1 - y};
    case AugmentKind::rot180:
      return {h - 1 - y, w - 1 - x};
    case AugmentKind::rot270:
      return {h - 1 - x, y};
    default:
      return {y, x};
  }
}

// Piecewise-linear monotone map of [0, n) with `cells` segments whose widths
// are perturbed by up to `limit`.
std::vector<double> grid_knots(Index n, int cells, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-limit, limit);
  std::vector<double> widths(cells);
  for (auto& wdt : widths) wdt = 1.0 + u(rng);
  const double total = std::accumulate(widths.begin(), widths.end(), 0.0);
  std::vector<double> knots{0.0};
  for (double wdt : widths) knots.push_back(knots.back() + wdt / total * static_cast<double>(n));
  return knots;
}

double grid_map(const std::vector<double>& knots, Index n, double v) {
  // Output position v (pixel-edge units) lies in uniform cell i; map it into source cell i.
  const int cells = static_cast<int>(knots.size()) - 1;
  const double cell = static_cast<double>(n) / cells;
  const int i = std::clamp(static_cast<int>(v / cell), 0, cells - 1);
  const double t = (v - i * cell) / cell;
  return knots[i] + t * (knots[i + 1] - knots[i]);
}

}  // namespace

AugmentKind augment_kind(int recipe_index) {
  if (recipe_index < 0) throw std::invalid_argument("recipe index must be >= 0");
  return static_cast<AugmentKind>(recipe_index % kAugmentKinds);
}

std::string to_string(AugmentKind kind) {
  static const char* const names[] = {"identity",        "hflip",         "vflip",     "rot90",
                                      "rot180",          "rot270",        "crop",      "rotate",
                                      "elastic",         "grid",          "optical",   "grayscale",
                                      "brightness",      "contrast",      "channel_dropout", "coarse_dropout"};
  return names[static_cast<int>(kind)];
}

bool is_spatial(AugmentKind kind) { return kind >= AugmentKind::hflip && kind <= AugmentKind::optical_distortion; }

std::string augmented_id(const std::string& base_id, int recipe_index) {
  return recipe_index == 0 ? base_id : base_id + "#aug" + std::to_string(recipe_index);
}

AugmentResult augment_offline(const Sample& sample, int recipe_index, std::uint64_t seed) {
  const AugmentKind kind = augment_kind(recipe_index);
  std::mt19937_64 rng(recipe_seed(sample.id, recipe_index, seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Index h = sample.image.height(), w = sample.image.width();
  AugmentResult r{sample, kind, std::nullopt};
  r.sample.id = augmented_id(sample.id, recipe_index);

  switch (kind) {
    case AugmentKind::identity:
      return r;
    case AugmentKind::hflip:
    case AugmentKind::vflip:
    case AugmentKind::rot90:
    case AugmentKind::rot180:
    case AugmentKind::rot270: {
      if ((kind == AugmentKind::rot90 || kind == AugmentKind::rot270) && h != w) {
        throw std::invalid_argument("quarter-turn augmentation needs square samples");
      }
      for (auto& c : r.sample.image.channels) c = permute(c, kind);
      r.sample.mask = BinaryMask(permute(sample.mask.values(), kind));
      r.warp = make_warp(h, w, [&](double y, double x) { return permute_source(kind, y, x, h, w); });
      return r;
    }
    case AugmentKind::crop: {
      const double scale = 0.6 + 0.3 * unit(rng);
      const double oy = (1 - scale) * h * unit(rng), ox = (1 - scale) * w * unit(rng);
      r.warp = make_warp(h, w, [&](double y, double x) {
        return std::pair{oy + (y + 0.5) * scale - 0.5, ox + (x + 0.5) * scale - 0.5};
      });
      break;
    }
    case AugmentKind::rotate: {
      const double angle = (unit(rng) - 0.5) * M_PI / 2;  // within +-45 degrees
      const double c = std::cos(angle), s = std::sin(angle), cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
      r.warp = make_warp(h, w, [&](double y, double x) {
        const double dy = y - cy, dx = x - cx;
        return std::pair{cy + c * dy - s * dx, cx + s * dy + c * dx};
      });
      break;
    }
    case AugmentKind::elastic: {
      // Smooth displacement: random 5x5 control grid, bilinearly upsampled.
      const double alpha = 0.06 * static_cast<double>(std::min(h, w));
      Plane gy(5, 5), gx(5, 5);
      for (Index i = 0; i < 25; ++i) {
        gy(i) = static_cast<float>(alpha * (2 * unit(rng) - 1));
        gx(i) = static_cast<float>(alpha * (2 * unit(rng) - 1));
      }
      const Plane dy = resize_bilinear(gy, h, w), dx = resize_bilinear(gx, h, w);
      r.warp = make_warp(h, w, [&](double y, double x) {
        return std::pair{y + dy(static_cast<Index>(y), static_cast<Index>(x)),
                         x + dx(static_cast<Index>(y), static_cast<Index>(x))};
      });
      break;
    }
    case AugmentKind::grid_distortion: {
      const auto ky = grid_knots(h, 5, 0.3, rng), kx = grid_knots(w, 5, 0.3, rng);
      r.warp = make_warp(h, w, [&](double y, double x) {
        return std::pair{grid_map(ky, h, y + 0.5) - 0.5, grid_map(kx, w, x + 0.5) - 0.5};
      });
      break;
    }
    case AugmentKind::optical_distortion: {
      const double k = 0.6 * (unit(rng) - 0.5);
      const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0, norm = std::max(cy, cx);
      r.warp = make_warp(h, w, [&](double y, double x) {
        const double ny = (y - cy) / norm, nx = (x - cx) / norm;
        const double f = 1 + k * (ny * ny + nx * nx);
        return std::pair{cy + ny * f * norm, cx + nx * f * norm};
      });
      break;
    }
    case AugmentKind::grayscale: {
      const Plane lum = luminance(sample.image);
      for (auto& c : r.sample.image.channels) c = lum;
      return r;
    }
    case AugmentKind::brightness: {
      const float delta = static_cast<float>(0.4 * (unit(rng) - 0.5));
      for (auto& c : r.sample.image.channels) c = (c + delta).cwiseMax(0.0f).cwiseMin(1.0f);
      return r;
    }
    case AugmentKind::contrast: {
      const float factor = static_cast<float>(0.7 + 0.6 * unit(rng));
      for (auto& c : r.sample.image.channels) {
        const float mean = c.mean();
        c = ((c - mean) * factor + mean).cwiseMax(0.0f).cwiseMin(1.0f);
      }
      return r;
    }
    case AugmentKind::channel_dropout: {
      if (r.sample.image.channel_count() > 1) {
        std::uniform_int_distribution<Index> pick(0, r.sample.image.channel_count() - 1);
        r.sample.image.channels[pick(rng)].setZero();
      }
      return r;
    }
    case AugmentKind::coarse_dropout: {
      std::uniform_int_distribution<int> holes(1, 8);
      const Index max_h = std::max<Index>(1, h / 8), max_w = std::max<Index>(1, w / 8);
      std::uniform_int_distribution<Index> hh(1, max_h), ww(1, max_w);
      for (int i = holes(rng); i > 0; --i) {
        const Index bh = hh(rng), bw = ww(rng);
        std::uniform_int_distribution<Index> y0(0, h - bh), x0(0, w - bw);
        const Index y = y0(rng), x = x0(rng);
        for (auto& c : r.sample.image.channels) c.block(y, x, bh, bw).setZero();
      }
      return r;
    }
  }
  r.sample = apply_warp(sample, *r.warp);
  r.sample.id = augmented_id(sample.id, recipe_index);
  return r;
}

std::vector<Sample> augment_dataset(const std::vector<Sample>& samples, int variants, std::uint64_t seed) {
  if (variants < 1) throw std::invalid_argument("augment variants must be >= 1");
  std::vector<Sample> out;
  out.reserve(samples.size() * static_cast<std::size_t>(variants));
  for (const auto& s : samples)
    for (int k = 0; k < variants; ++k) out.push_back(augment_offline(s, k, seed).sample);
  return out;
}

}  // namespace fanet
