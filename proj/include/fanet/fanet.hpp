#ifndef FANET_FANET_HPP
#define FANET_FANET_HPP

#include "fanet/mask.hpp"
#include "fanet/network_config.hpp"
#include "fanet/nn/blocks.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace fanet {

/// Encoder-decoder segmentation network with feedback hard attention.
///
/// Each encoder stage runs `se_blocks_per_stage` SE-Residual blocks (the last
/// one's output is the skip tensor), an optional MixPool block, then 2x2 max
/// pooling. Each decoder stage upsamples with a 4x4 stride-2 transposed
/// convolution, concatenates the skip tensor, runs the SE-Residual blocks and
/// an optional MixPool block. The head concatenates the full-resolution
/// previous mask (when feedback is configured) and maps to one sigmoid
/// channel.
template <typename Scalar>
class FanetModel {
 public:
  explicit FanetModel(NetworkConfig config, std::uint64_t seed = 0);

  /// Per-pixel foreground probabilities, N x 1 x H x W. `prev_masks` holds one
  /// full-resolution mask per image; it is ignored (and may be empty) when the
  /// config has no feedback path.
  Tensor4<Scalar> forward(const Tensor4<Scalar>& images, const std::vector<BinaryMask>& prev_masks,
                          const nn::Pass& pass);

  /// Back-propagates dL/dprobabilities of the last recorded forward pass and
  /// accumulates parameter gradients.
  void backward(const Tensor4<Scalar>& d_probabilities);

  /// Every named array, trainable parameters and batch-norm buffers alike, in
  /// a fixed order.
  nn::ParamList<Scalar> parameters();
  nn::ParamList<Scalar> trainable_parameters();
  Index parameter_count();
  void zero_grad();

  const NetworkConfig& config() const { return config_; }
  std::vector<nn::MixPoolBlock<Scalar>*> mixpool_blocks();

  struct EncoderStage {
    std::vector<nn::SeResidualBlock<Scalar>> blocks;
    std::optional<nn::MixPoolBlock<Scalar>> mixpool;
    nn::MaxPool2<Scalar> pool;
  };
  struct DecoderStage {
    nn::ConvTranspose2d<Scalar> up;
    std::vector<nn::SeResidualBlock<Scalar>> blocks;
    std::optional<nn::MixPoolBlock<Scalar>> mixpool;
    Index up_channels = 0;
  };

  std::vector<EncoderStage> encoders;
  std::vector<DecoderStage> decoders;
  nn::Conv2d<Scalar> head;

 private:
  void check_inputs(const Tensor4<Scalar>& images, const std::vector<BinaryMask>& prev_masks) const;

  NetworkConfig config_;
  std::vector<Index> skip_channels_;
  Tensor4<Scalar> probabilities_;
};

/// Trainable scalar count of the assembled network.
Index count_parameters(const NetworkConfig& config);

/// Stacks per-sample masks into an N x 1 x H x W tensor of 0/1 values.
template <typename Scalar>
Tensor4<Scalar> masks_to_tensor(const std::vector<BinaryMask>& masks);

}  // namespace fanet

#endif  // FANET_FANET_HPP
