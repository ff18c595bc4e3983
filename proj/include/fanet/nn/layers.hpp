#ifndef FANET_NN_LAYERS_HPP
#define FANET_NN_LAYERS_HPP

#include "fanet/tensor.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace fanet::nn {

/// Named trainable array (or non-trainable buffer such as batch-norm running
/// statistics). `shape` is the logical shape recorded in checkpoints; `value`
/// holds the same elements as a 2-D matrix convenient for the owning layer.
template <typename Scalar>
struct Param {
  std::string name;
  std::vector<Index> shape;
  MatrixR<Scalar> value;
  MatrixR<Scalar> grad;
  bool trainable = true;

  Index size() const { return value.size(); }
  void zero_grad() {
    if (trainable) grad.setZero();
  }
};

template <typename Scalar>
using ParamList = std::vector<Param<Scalar>*>;

struct Pass {
  bool train_statistics = false;  // batch norm normalises with (and updates) batch statistics
  bool record = false;            // keep what backward() needs

  static Pass training() { return {true, true}; }
  static Pass inference() { return {false, false}; }
};

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

/// Square-kernel convolution, stride 1, "same" zero padding.
template <typename Scalar>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, Index in_channels, Index out_channels, Index kernel, std::mt19937_64& rng);

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, const Pass& pass);
  /// Accumulates parameter gradients; returns dL/dx unless input gradients
  /// are disabled, in which case the result is empty.
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy);
  void collect(ParamList<Scalar>& out);

  Index in_channels() const { return in_channels_; }
  Index out_channels() const { return out_channels_; }
  Index kernel() const { return kernel_; }
  void set_input_grad(bool on) { input_grad_ = on; }

  Param<Scalar> weight;  // out x (in * k * k)
  Param<Scalar> bias;    // out x 1

 private:
  Index in_channels_ = 0, out_channels_ = 0, kernel_ = 1;
  bool input_grad_ = true;
  Tensor4<Scalar> input_;  // 1x1 kernels
  // Larger kernels keep the zero-padded input and per-tap weight blocks.
  VectorX<Scalar> padded_input_;
  Shape4 input_shape_;
  MatrixR<Scalar> tap_weights_;
  VectorX<Scalar> packed_weights_;
};

/// Transposed convolution that doubles spatial size (4x4 kernel, stride 2, padding 1).
template <typename Scalar>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(const std::string& name, Index in_channels, Index out_channels, std::mt19937_64& rng);

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, const Pass& pass);
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy);
  void collect(ParamList<Scalar>& out);

  static constexpr Index kKernel = 4;
  static constexpr Index kStride = 2;
  static constexpr Index kPadding = 1;

  Param<Scalar> weight;  // in x (out * k * k)
  Param<Scalar> bias;

 private:
  Index in_channels_ = 0, out_channels_ = 0;
  Tensor4<Scalar> input_;
};

template <typename Scalar>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, Index channels, double eps = 1e-5, double momentum = 0.1);

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, const Pass& pass);
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy);
  void collect(ParamList<Scalar>& out);

  Param<Scalar> gamma, beta;
  Param<Scalar> running_mean, running_var;

 private:
  Index channels_ = 0;
  Scalar eps_ = Scalar(1e-5), momentum_ = Scalar(0.1);
  bool batch_stats_ = false;
  Tensor4<Scalar> normalized_;
  VectorX<Scalar> inv_std_;
};

template <typename Scalar>
class Relu {
 public:
  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, const Pass& pass);
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) const;

 private:
  Tensor4<Scalar> output_;
};

/// 2x2 max pooling, stride 2. Ties route the gradient to the first maximum.
template <typename Scalar>
class MaxPool2 {
 public:
  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, const Pass& pass);
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) const;

 private:
  Shape4 input_shape_;
  std::vector<Index> argmax_;
};

/// Channel re-weighting: global average pool, reduce to max(1, C / reduction)
/// units with ReLU, expand back to C, sigmoid gates that scale each channel.
template <typename Scalar>
class SqueezeExcite {
 public:
  SqueezeExcite() = default;
  SqueezeExcite(const std::string& name, Index channels, Index reduction, std::mt19937_64& rng);

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, const Pass& pass);
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy);
  void collect(ParamList<Scalar>& out);

  Index hidden() const { return reduce_weight.value.rows(); }
  /// Gates of the last forward call, channels x batch.
  const MatrixR<Scalar>& gates() const { return gates_; }

  Param<Scalar> reduce_weight, reduce_bias;  // hidden x C, hidden x 1
  Param<Scalar> expand_weight, expand_bias;  // C x hidden, C x 1

 private:
  Tensor4<Scalar> input_;
  MatrixR<Scalar> squeezed_, hidden_pre_, gates_;
};

}  // namespace fanet::nn

#endif  // FANET_NN_LAYERS_HPP
