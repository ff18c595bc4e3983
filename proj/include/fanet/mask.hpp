#ifndef FANET_MASK_HPP
#define FANET_MASK_HPP

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fanet {

using Index = Eigen::Index;

/// Row-major {0,1} storage shared by masks and mask-valued intermediates.
using MaskArray = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A 2-D binary mask. Every value is exactly 0 or 1 and both dimensions are
/// at least one pixel; the constructors enforce this.
class BinaryMask {
 public:
  BinaryMask() : BinaryMask(1, 1) {}
  BinaryMask(Index height, Index width);
  explicit BinaryMask(MaskArray values);

  static BinaryMask zeros(Index height, Index width) { return BinaryMask(height, width); }
  static BinaryMask ones(Index height, Index width);

  /// Builds a mask from any array expression; nonzero entries become 1.
  template <typename Derived>
  static BinaryMask from_nonzero(const Eigen::DenseBase<Derived>& values) {
    return BinaryMask(MaskArray((values.derived().array() != 0).template cast<std::uint8_t>()));
  }

  Index height() const { return values_.rows(); }
  Index width() const { return values_.cols(); }
  Index size() const { return values_.size(); }

  std::uint8_t operator()(Index y, Index x) const { return values_(y, x); }
  void set(Index y, Index x, bool on) { values_(y, x) = on ? 1 : 0; }

  const MaskArray& values() const { return values_; }
  const std::uint8_t* data() const { return values_.data(); }

  Index count() const { return values_.template cast<Index>().sum(); }

  BinaryMask complement() const;
  BinaryMask operator|(const BinaryMask& other) const;

  bool operator==(const BinaryMask& other) const {
    return height() == other.height() && width() == other.width() &&
           (values_ == other.values_).all();
  }
  bool operator!=(const BinaryMask& other) const { return !(*this == other); }

 private:
  MaskArray values_;
};

/// Run-length encoded mask. `runs` alternates zero-runs and one-runs over the
/// row-major flattening, always starting with a (possibly empty) zero-run.
struct RleMask {
  Index height = 0;
  Index width = 0;
  std::vector<std::uint32_t> runs;

  /// Throws ShapeError if the runs don't cover height*width pixels, or if a
  /// run after the first is empty.
  void validate() const;

  bool operator==(const RleMask&) const = default;
};

RleMask rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(const RleMask& rle);

/// Max-pool downscale: an output pixel is 1 iff any pixel of its source
/// window is 1. Source dimensions must be multiples of the target ones.
BinaryMask downscale_mask(const BinaryMask& mask, Index target_height, Index target_width);

}  // namespace fanet

#endif  // FANET_MASK_HPP
