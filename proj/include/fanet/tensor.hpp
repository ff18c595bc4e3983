#ifndef FANET_TENSOR_HPP
#define FANET_TENSOR_HPP

#include <Eigen/Core>

#include <array>
#include <stdexcept>
#include <string>

namespace fanet {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixR = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct Shape4 {
  Index batch = 0, channels = 0, height = 0, width = 0;

  Index plane() const { return height * width; }
  Index sample_size() const { return channels * height * width; }
  Index size() const { return batch * sample_size(); }
  bool operator==(const Shape4&) const = default;
  std::string str() const {
    return "(" + std::to_string(batch) + ", " + std::to_string(channels) + ", " + std::to_string(height) + ", " +
           std::to_string(width) + ")";
  }
};

/// Dense NCHW feature map. Each sample is contiguous and can be viewed as a
/// channels x (height*width) row-major matrix.
template <typename Scalar_>
class Tensor4 {
 public:
  using Scalar = Scalar_;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using SampleMap = Eigen::Map<MatrixR<Scalar>>;
  using ConstSampleMap = Eigen::Map<const MatrixR<Scalar>>;

  Tensor4() = default;
  explicit Tensor4(Shape4 shape) : shape_(shape), values_(Array::Zero(shape.size())) {}
  Tensor4(Index n, Index c, Index h, Index w) : Tensor4(Shape4{n, c, h, w}) {}

  const Shape4& shape() const { return shape_; }
  Index batch() const { return shape_.batch; }
  Index channels() const { return shape_.channels; }
  Index height() const { return shape_.height; }
  Index width() const { return shape_.width; }
  Index size() const { return shape_.size(); }

  Array& values() { return values_; }
  const Array& values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  Scalar* sample_data(Index n) { return values_.data() + n * shape_.sample_size(); }
  const Scalar* sample_data(Index n) const { return values_.data() + n * shape_.sample_size(); }

  SampleMap sample(Index n) { return SampleMap(sample_data(n), shape_.channels, shape_.plane()); }
  ConstSampleMap sample(Index n) const { return ConstSampleMap(sample_data(n), shape_.channels, shape_.plane()); }

  Scalar& operator()(Index n, Index c, Index y, Index x) {
    return values_[((n * shape_.channels + c) * shape_.height + y) * shape_.width + x];
  }
  Scalar operator()(Index n, Index c, Index y, Index x) const {
    return values_[((n * shape_.channels + c) * shape_.height + y) * shape_.width + x];
  }

  void set_zero() { values_.setZero(); }
  bool all_finite() const { return values_.isFinite().all(); }

  template <typename Other>
  Tensor4<Other> cast() const {
    Tensor4<Other> out(shape_);
    out.values() = values_.template cast<Other>();
    return out;
  }

 private:
  Shape4 shape_;
  Array values_;
};

inline void require_shape(const Shape4& got, const Shape4& want, const char* where) {
  if (!(got == want)) throw std::invalid_argument(std::string(where) + ": shape " + got.str() + " != " + want.str());
}

/// Concatenates along channels.
template <typename Scalar>
Tensor4<Scalar> concat_channels(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b) {
  if (a.batch() != b.batch() || a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument("concat_channels: incompatible shapes " + a.shape().str() + " and " + b.shape().str());
  }
  Tensor4<Scalar> out(a.batch(), a.channels() + b.channels(), a.height(), a.width());
  for (Index n = 0; n < a.batch(); ++n) {
    out.sample(n).topRows(a.channels()) = a.sample(n);
    out.sample(n).bottomRows(b.channels()) = b.sample(n);
  }
  return out;
}

/// Splits a gradient along channels into the first `first_channels` and the rest.
template <typename Scalar>
std::array<Tensor4<Scalar>, 2> split_channels(const Tensor4<Scalar>& t, Index first_channels) {
  const Index rest = t.channels() - first_channels;
  Tensor4<Scalar> a(t.batch(), first_channels, t.height(), t.width());
  Tensor4<Scalar> b(t.batch(), rest, t.height(), t.width());
  for (Index n = 0; n < t.batch(); ++n) {
    a.sample(n) = t.sample(n).topRows(first_channels);
    b.sample(n) = t.sample(n).bottomRows(rest);
  }
  return {std::move(a), std::move(b)};
}

}  // namespace fanet

#endif  // FANET_TENSOR_HPP
