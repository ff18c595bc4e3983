#include "fanet/mask.hpp"

#include <numeric>
#include <string>

namespace fanet {

namespace {

void check_dims(Index height, Index width) {
  if (height < 1 || width < 1) {
    throw ShapeError("mask dimensions must be positive, got " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
}

}  // namespace

BinaryMask::BinaryMask(Index height, Index width) {
  check_dims(height, width);
  values_ = MaskArray::Zero(height, width);
}

BinaryMask::BinaryMask(MaskArray values) : values_(std::move(values)) {
  check_dims(values_.rows(), values_.cols());
  if ((values_ > 1).any()) throw std::invalid_argument("binary mask values must be 0 or 1");
}

BinaryMask BinaryMask::ones(Index height, Index width) {
  check_dims(height, width);
  return BinaryMask(MaskArray::Ones(height, width));
}

BinaryMask BinaryMask::complement() const { return BinaryMask(MaskArray(1 - values_)); }

BinaryMask BinaryMask::operator|(const BinaryMask& other) const {
  if (height() != other.height() || width() != other.width()) {
    throw ShapeError("mask union requires equal shapes");
  }
  return BinaryMask(MaskArray(values_.max(other.values_)));
}

void RleMask::validate() const {
  check_dims(height, width);
  const auto total = std::accumulate(runs.begin(), runs.end(), std::uint64_t{0});
  if (total != static_cast<std::uint64_t>(height * width)) {
    throw ShapeError("run lengths sum to " + std::to_string(total) + ", expected " +
                     std::to_string(height * width));
  }
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i] == 0) throw ShapeError("empty run at position " + std::to_string(i));
  }
}

RleMask rle_encode(const BinaryMask& mask) {
  RleMask rle{mask.height(), mask.width(), {}};
  const std::uint8_t* p = mask.data();
  const Index n = mask.size();
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (Index i = 0; i < n; ++i) {
    if (p[i] != current) {
      rle.runs.push_back(run);
      current = p[i];
      run = 0;
    }
    ++run;
  }
  rle.runs.push_back(run);
  return rle;
}

BinaryMask rle_decode(const RleMask& rle) {
  check_dims(rle.height, rle.width);
  const auto total = std::accumulate(rle.runs.begin(), rle.runs.end(), std::uint64_t{0});
  if (total != static_cast<std::uint64_t>(rle.height * rle.width)) {
    throw ShapeError("run lengths sum to " + std::to_string(total) + ", expected " +
                     std::to_string(rle.height) + "x" + std::to_string(rle.width));
  }
  MaskArray values(rle.height, rle.width);
  std::uint8_t* out = values.data();
  std::uint8_t bit = 0;
  for (const std::uint32_t run : rle.runs) {
    std::fill_n(out, run, bit);
    out += run;
    bit ^= 1;
  }
  return BinaryMask(std::move(values));
}

BinaryMask downscale_mask(const BinaryMask& mask, Index target_height, Index target_width) {
  check_dims(target_height, target_width);
  if (mask.height() % target_height != 0 || mask.width() % target_width != 0) {
    throw ShapeError("cannot downscale " + std::to_string(mask.height()) + "x" +
                     std::to_string(mask.width()) + " mask to " + std::to_string(target_height) +
                     "x" + std::to_string(target_width));
  }
  const Index sy = mask.height() / target_height;
  const Index sx = mask.width() / target_width;
  if (sy == 1 && sx == 1) return mask;
  MaskArray out(target_height, target_width);
  for (Index y = 0; y < target_height; ++y) {
    for (Index x = 0; x < target_width; ++x) {
      out(y, x) = mask.values().block(y * sy, x * sx, sy, sx).maxCoeff();
    }
  }
  return BinaryMask(std::move(out));
}

}  // namespace fanet
