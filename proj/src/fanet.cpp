#include "fanet/fanet.hpp"

#include <random>

namespace fanet {

template <typename Scalar>
FanetModel<Scalar>::FanetModel(NetworkConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const Index reduction = config_.se_reduction;
  const bool fl = config_.mixpool_use_Fl_branch;
  const Index mix_factor = fl ? 2 : 1;

  Index channels = config_.in_channels;
  for (int i = 0; i < config_.depth; ++i) {
    const Index width = config_.base_widths[i];
    const std::string prefix = "encoder" + std::to_string(i + 1);
    EncoderStage stage;
    for (int b = 0; b < config_.se_blocks_per_stage; ++b) {
      stage.blocks.emplace_back(prefix + ".res" + std::to_string(b + 1), b == 0 ? channels : width, width, reduction,
                                rng);
    }
    skip_channels_.push_back(width);
    channels = width;
    if (config_.encoder_has_mixpool(i)) {
      stage.mixpool.emplace(prefix + ".mixpool", width, fl, rng);
      channels = mix_factor * width;
    }
    encoders.push_back(std::move(stage));
  }
  // The image needs no gradient.
  encoders.front().blocks.front().conv1.set_input_grad(false);
  if (auto& proj = encoders.front().blocks.front().projection) proj->set_input_grad(false);

  for (int j = 0; j < config_.depth; ++j) {
    const Index width = config_.decoder_width(j);
    const Index skip = skip_channels_[config_.depth - 1 - j];
    const std::string prefix = "decoder" + std::to_string(j + 1);
    DecoderStage stage;
    stage.up = nn::ConvTranspose2d<Scalar>(prefix + ".up", channels, width, rng);
    stage.up_channels = width;
    for (int b = 0; b < config_.se_blocks_per_stage; ++b) {
      stage.blocks.emplace_back(prefix + ".res" + std::to_string(b + 1), b == 0 ? width + skip : width, width,
                                reduction, rng);
    }
    channels = width;
    if (config_.decoder_has_mixpool(j)) {
      stage.mixpool.emplace(prefix + ".mixpool", width, fl, rng);
      channels = mix_factor * width;
    }
    decoders.push_back(std::move(stage));
  }
  head = nn::Conv2d<Scalar>("head", channels + (config_.uses_feedback() ? 1 : 0), 1, 1, rng);
}

template <typename Scalar>
void FanetModel<Scalar>::check_inputs(const Tensor4<Scalar>& images, const std::vector<BinaryMask>& prev_masks) const {
  if (images.channels() != config_.in_channels) {
    throw ShapeError("expected " + std::to_string(config_.in_channels) + "-channel images, got " + images.shape().str());
  }
  const int multiple = config_.size_multiple();
  if (images.height() % multiple != 0 || images.width() % multiple != 0 || images.height() == 0 ||
      images.width() == 0) {
    throw ShapeError("image size " + std::to_string(images.height()) + "x" + std::to_string(images.width()) +
                     " is not a positive multiple of " + std::to_string(multiple));
  }
  if (!config_.uses_feedback()) return;
  if (static_cast<Index>(prev_masks.size()) != images.batch()) {
    throw ShapeError("expected one previous mask per image (" + std::to_string(images.batch()) + "), got " +
                     std::to_string(prev_masks.size()));
  }
  for (const auto& m : prev_masks) {
    if (m.height() != images.height() || m.width() != images.width()) {
      throw ShapeError("previous mask " + std::to_string(m.height()) + "x" + std::to_string(m.width()) +
                       " does not match image " + std::to_string(images.height()) + "x" +
                       std::to_string(images.width()));
    }
  }
}

template <typename Scalar>
Tensor4<Scalar> FanetModel<Scalar>::forward(const Tensor4<Scalar>& images, const std::vector<BinaryMask>& prev_masks,
                                            const nn::Pass& pass) {
  check_inputs(images, prev_masks);
  std::vector<Tensor4<Scalar>> skips;
  skips.reserve(encoders.size());

  Tensor4<Scalar> x = images;
  for (auto& stage : encoders) {
    for (auto& block : stage.blocks) x = block.forward(x, pass);
    skips.push_back(x);
    if (stage.mixpool) x = stage.mixpool->forward(x, prev_masks, pass);
    x = stage.pool.forward(x, pass);
  }
  for (std::size_t j = 0; j < decoders.size(); ++j) {
    auto& stage = decoders[j];
    x = concat_channels(stage.up.forward(x, pass), skips[skips.size() - 1 - j]);
    for (auto& block : stage.blocks) x = block.forward(x, pass);
    if (stage.mixpool) x = stage.mixpool->forward(x, prev_masks, pass);
  }
  if (config_.uses_feedback()) x = concat_channels(x, masks_to_tensor<Scalar>(prev_masks));

  Tensor4<Scalar> probabilities = head.forward(x, pass);
  probabilities.values() = probabilities.values().unaryExpr([](Scalar v) { return nn::sigmoid(v); });
  if (pass.record) probabilities_ = probabilities;
  return probabilities;
}

template <typename Scalar>
void FanetModel<Scalar>::backward(const Tensor4<Scalar>& d_probabilities) {
  require_shape(d_probabilities.shape(), probabilities_.shape(), "FanetModel::backward");
  Tensor4<Scalar> d_logits(d_probabilities.shape());
  d_logits.values() = d_probabilities.values() * probabilities_.values() * (Scalar(1) - probabilities_.values());

  Tensor4<Scalar> dx = head.backward(d_logits);
  if (config_.uses_feedback()) dx = split_channels(dx, dx.channels() - 1)[0];

  std::vector<Tensor4<Scalar>> d_skips(encoders.size());
  for (std::size_t j = decoders.size(); j-- > 0;) {
    auto& stage = decoders[j];
    if (stage.mixpool) dx = stage.mixpool->backward(dx);
    for (auto it = stage.blocks.rbegin(); it != stage.blocks.rend(); ++it) dx = it->backward(dx);
    auto [d_up, d_skip] = split_channels(dx, stage.up_channels);
    d_skips[encoders.size() - 1 - j] = std::move(d_skip);
    dx = stage.up.backward(d_up);
  }
  for (std::size_t i = encoders.size(); i-- > 0;) {
    auto& stage = encoders[i];
    dx = stage.pool.backward(dx);
    if (stage.mixpool) dx = stage.mixpool->backward(dx);
    dx.values() += d_skips[i].values();
    for (auto it = stage.blocks.rbegin(); it != stage.blocks.rend(); ++it) dx = it->backward(dx);
  }
}

template <typename Scalar>
nn::ParamList<Scalar> FanetModel<Scalar>::parameters() {
  nn::ParamList<Scalar> out;
  for (auto& stage : encoders) {
    for (auto& block : stage.blocks) block.collect(out);
    if (stage.mixpool) stage.mixpool->collect(out);
  }
  for (auto& stage : decoders) {
    stage.up.collect(out);
    for (auto& block : stage.blocks) block.collect(out);
    if (stage.mixpool) stage.mixpool->collect(out);
  }
  head.collect(out);
  return out;
}

template <typename Scalar>
nn::ParamList<Scalar> FanetModel<Scalar>::trainable_parameters() {
  nn::ParamList<Scalar> out;
  for (auto* p : parameters()) {
    if (p->trainable) out.push_back(p);
  }
  return out;
}

template <typename Scalar>
Index FanetModel<Scalar>::parameter_count() {
  Index total = 0;
  for (auto* p : trainable_parameters()) total += p->size();
  return total;
}

template <typename Scalar>
void FanetModel<Scalar>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename Scalar>
std::vector<nn::MixPoolBlock<Scalar>*> FanetModel<Scalar>::mixpool_blocks() {
  std::vector<nn::MixPoolBlock<Scalar>*> out;
  for (auto& stage : encoders)
    if (stage.mixpool) out.push_back(&*stage.mixpool);
  for (auto& stage : decoders)
    if (stage.mixpool) out.push_back(&*stage.mixpool);
  return out;
}

Index count_parameters(const NetworkConfig& config) { return FanetModel<float>(config).parameter_count(); }

template <typename Scalar>
Tensor4<Scalar> masks_to_tensor(const std::vector<BinaryMask>& masks) {
  if (masks.empty()) throw ShapeError("masks_to_tensor: no masks");
  const Index h = masks.front().height(), w = masks.front().width();
  Tensor4<Scalar> out(static_cast<Index>(masks.size()), 1, h, w);
  for (Index n = 0; n < out.batch(); ++n) {
    if (masks[n].height() != h || masks[n].width() != w) throw ShapeError("masks_to_tensor: mixed mask sizes");
    const Eigen::Map<const Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>> m(masks[n].data(), h * w);
    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(out.sample_data(n), h * w) = m.template cast<Scalar>();
  }
  return out;
}

template class FanetModel<float>;
template class FanetModel<double>;
template Tensor4<float> masks_to_tensor(const std::vector<BinaryMask>&);
template Tensor4<double> masks_to_tensor(const std::vector<BinaryMask>&);

}  // namespace fanet
