#ifndef FANET_NN_BLOCKS_HPP
#define FANET_NN_BLOCKS_HPP

#include "fanet/mask.hpp"
#include "fanet/nn/layers.hpp"

#include <optional>
#include <vector>

namespace fanet::nn {

template <typename Scalar>
class ConvBnRelu {
 public:
  ConvBnRelu() = default;
  ConvBnRelu(const std::string& name, Index in_channels, Index out_channels, std::mt19937_64& rng);

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, const Pass& pass);
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy);
  void collect(ParamList<Scalar>& out);

  Conv2d<Scalar> conv;
  BatchNorm2d<Scalar> bn;
  Relu<Scalar> relu;
};

/// conv3x3-BN-ReLU, conv3x3-BN, squeeze-excite, plus the identity path
/// (a 1x1 projection when channel counts differ), then ReLU.
template <typename Scalar>
class SeResidualBlock {
 public:
  SeResidualBlock() = default;
  SeResidualBlock(const std::string& name, Index in_channels, Index out_channels, Index se_reduction,
                  std::mt19937_64& rng);

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, const Pass& pass);
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy);
  void collect(ParamList<Scalar>& out);

  Index out_channels() const { return conv2.out_channels(); }

  Conv2d<Scalar> conv1;
  BatchNorm2d<Scalar> bn1;
  Relu<Scalar> relu1;
  Conv2d<Scalar> conv2;
  BatchNorm2d<Scalar> bn2;
  SqueezeExcite<Scalar> se;
  std::optional<Conv2d<Scalar>> projection;
  Relu<Scalar> relu_out;
};

/// Union of two equally sized mask sets, element by element.
std::vector<BinaryMask> union_masks(const std::vector<BinaryMask>& a, const std::vector<BinaryMask>& b);

/// f multiplied by the per-sample mask, broadcast over channels.
template <typename Scalar>
Tensor4<Scalar> hard_attention(const Tensor4<Scalar>& f, const std::vector<BinaryMask>& masks);

/// Indicator(p >= threshold) for each sample of an N x 1 x H x W probability map.
template <typename Scalar>
std::vector<BinaryMask> binarize_maps(const Tensor4<Scalar>& probabilities, double threshold = 0.5);

/// Feedback hard-attention block.
///
/// The spatial attention map M' = [sigmoid(conv1x1(conv3x3-BN-ReLU(f))) >= 0.5]
/// is OR-ed with the previous mask max-pooled to f's resolution. The union
/// gates f, and the output concatenates conv-BN-ReLU(f) with
/// conv-BN-ReLU(f * union) along channels (the first operand is dropped when
/// the f branch is disabled).
///
/// The binarisation is a hard gate: no gradient reaches the attention
/// generator, and the union acts as a constant multiplier in backward.
template <typename Scalar>
class MixPoolBlock {
 public:
  MixPoolBlock() = default;
  MixPoolBlock(const std::string& name, Index channels, bool use_feature_branch, std::mt19937_64& rng);

  /// `prev_masks` are full-resolution, one per sample; each must downscale
  /// evenly to f's spatial size.
  Tensor4<Scalar> forward(const Tensor4<Scalar>& f, const std::vector<BinaryMask>& prev_masks, const Pass& pass);
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy);
  void collect(ParamList<Scalar>& out);

  struct AttentionMap {
    Tensor4<Scalar> probabilities;  // N x 1 x H x W
    std::vector<BinaryMask> masks;
  };
  AttentionMap attention_map(const Tensor4<Scalar>& f, const Pass& pass);

  Index in_channels() const { return attended_branch.conv.in_channels(); }
  Index out_channels() const { return (feature_branch ? 2 : 1) * in_channels(); }

  /// When set, forward keeps its intermediates for inspection.
  bool keep_intermediates = false;
  struct Intermediates {
    std::vector<BinaryMask> feedback;   // M: downscaled previous masks
    std::vector<BinaryMask> attention;  // M'
    std::vector<BinaryMask> unified;    // M or M'
    Tensor4<Scalar> attended;           // f * unified
  };
  const Intermediates& intermediates() const { return intermediates_; }

  ConvBnRelu<Scalar> attention_conv;
  Conv2d<Scalar> attention_logit;
  std::optional<ConvBnRelu<Scalar>> feature_branch;
  ConvBnRelu<Scalar> attended_branch;

 private:
  std::vector<BinaryMask> unified_;
  Intermediates intermediates_;
};

}  // namespace fanet::nn

#endif  // FANET_NN_BLOCKS_HPP
