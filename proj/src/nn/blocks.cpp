#include "fanet/nn/blocks.hpp"

namespace fanet::nn {

template <typename Scalar>
ConvBnRelu<Scalar>::ConvBnRelu(const std::string& name, Index in_channels, Index out_channels, std::mt19937_64& rng)
    : conv(name + ".conv", in_channels, out_channels, 3, rng), bn(name + ".bn", out_channels) {}

template <typename Scalar>
Tensor4<Scalar> ConvBnRelu<Scalar>::forward(const Tensor4<Scalar>& x, const Pass& pass) {
  return relu.forward(bn.forward(conv.forward(x, pass), pass), pass);
}

template <typename Scalar>
Tensor4<Scalar> ConvBnRelu<Scalar>::backward(const Tensor4<Scalar>& dy) {
  return conv.backward(bn.backward(relu.backward(dy)));
}

template <typename Scalar>
void ConvBnRelu<Scalar>::collect(ParamList<Scalar>& out) {
  conv.collect(out);
  bn.collect(out);
}

// -------------------------------------------------------- SeResidualBlock

template <typename Scalar>
SeResidualBlock<Scalar>::SeResidualBlock(const std::string& name, Index in_channels, Index out_channels,
                                         Index se_reduction, std::mt19937_64& rng)
    : conv1(name + ".conv1", in_channels, out_channels, 3, rng),
      bn1(name + ".bn1", out_channels),
      conv2(name + ".conv2", out_channels, out_channels, 3, rng),
      bn2(name + ".bn2", out_channels),
      se(name + ".se", out_channels, se_reduction, rng) {
  if (in_channels != out_channels) projection.emplace(name + ".shortcut", in_channels, out_channels, 1, rng);
}

template <typename Scalar>
Tensor4<Scalar> SeResidualBlock<Scalar>::forward(const Tensor4<Scalar>& x, const Pass& pass) {
  Tensor4<Scalar> h = relu1.forward(bn1.forward(conv1.forward(x, pass), pass), pass);
  h = se.forward(bn2.forward(conv2.forward(h, pass), pass), pass);
  if (projection) {
    h.values() += projection->forward(x, pass).values();
  } else {
    h.values() += x.values();
  }
  return relu_out.forward(h, pass);
}

template <typename Scalar>
Tensor4<Scalar> SeResidualBlock<Scalar>::backward(const Tensor4<Scalar>& dy) {
  const Tensor4<Scalar> dsum = relu_out.backward(dy);
  Tensor4<Scalar> dx = conv1.backward(bn1.backward(relu1.backward(conv2.backward(bn2.backward(se.backward(dsum))))));
  if (projection) {
    Tensor4<Scalar> dshort = projection->backward(dsum);
    if (dx.size() == 0) return dx;
    dx.values() += dshort.values();
  } else if (dx.size() != 0) {
    dx.values() += dsum.values();
  }
  return dx;
}

template <typename Scalar>
void SeResidualBlock<Scalar>::collect(ParamList<Scalar>& out) {
  conv1.collect(out);
  bn1.collect(out);
  conv2.collect(out);
  bn2.collect(out);
  se.collect(out);
  if (projection) projection->collect(out);
}

// ------------------------------------------------------------ free helpers

std::vector<BinaryMask> union_masks(const std::vector<BinaryMask>& a, const std::vector<BinaryMask>& b) {
  if (a.size() != b.size()) throw ShapeError("union_masks: batch size mismatch");
  std::vector<BinaryMask> out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] | b[i]);
  return out;
}

template <typename Scalar>
Tensor4<Scalar> hard_attention(const Tensor4<Scalar>& f, const std::vector<BinaryMask>& masks) {
  if (static_cast<Index>(masks.size()) != f.batch()) throw ShapeError("hard_attention: one mask per sample required");
  Tensor4<Scalar> out(f.shape());
  for (Index n = 0; n < f.batch(); ++n) {
    const auto& m = masks[n];
    if (m.height() != f.height() || m.width() != f.width()) {
      throw ShapeError("hard_attention: mask " + std::to_string(m.height()) + "x" + std::to_string(m.width()) +
                       " does not match feature map " + f.shape().str());
    }
    const Eigen::Map<const Eigen::Matrix<std::uint8_t, 1, Eigen::Dynamic>> gate(m.data(), m.size());
    const auto gate_row = gate.template cast<Scalar>().array();
    out.sample(n) = f.sample(n).array().rowwise() * gate_row;
  }
  return out;
}

template <typename Scalar>
std::vector<BinaryMask> binarize_maps(const Tensor4<Scalar>& probabilities, double threshold) {
  if (probabilities.channels() != 1) throw ShapeError("binarize_maps: expected a single-channel map");
  std::vector<BinaryMask> out;
  out.reserve(probabilities.batch());
  const Scalar t = static_cast<Scalar>(threshold);
  for (Index n = 0; n < probabilities.batch(); ++n) {
    MaskArray values(probabilities.height(), probabilities.width());
    const Scalar* p = probabilities.sample_data(n);
    for (Index i = 0; i < values.size(); ++i) values.data()[i] = p[i] >= t ? 1 : 0;
    out.emplace_back(std::move(values));
  }
  return out;
}

// ------------------------------------------------------------ MixPoolBlock

template <typename Scalar>
MixPoolBlock<Scalar>::MixPoolBlock(const std::string& name, Index channels, bool use_feature_branch,
                                   std::mt19937_64& rng)
    : attention_conv(name + ".attention", channels, channels, rng),
      attention_logit(name + ".attention_logit", channels, 1, 1, rng),
      attended_branch(name + ".attended_branch", channels, channels, rng) {
  if (use_feature_branch) feature_branch.emplace(name + ".feature_branch", channels, channels, rng);
}

template <typename Scalar>
typename MixPoolBlock<Scalar>::AttentionMap MixPoolBlock<Scalar>::attention_map(const Tensor4<Scalar>& f,
                                                                               const Pass& pass) {
  // Statistics still update in training, but nothing is recorded for backward.
  const Pass no_record{pass.train_statistics, false};
  Tensor4<Scalar> logits = attention_logit.forward(attention_conv.forward(f, no_record), no_record);
  logits.values() = logits.values().unaryExpr([](Scalar v) { return sigmoid(v); });
  AttentionMap map{std::move(logits), {}};
  map.masks = binarize_maps(map.probabilities, 0.5);
  return map;
}

template <typename Scalar>
Tensor4<Scalar> MixPoolBlock<Scalar>::forward(const Tensor4<Scalar>& f, const std::vector<BinaryMask>& prev_masks,
                                              const Pass& pass) {
  if (static_cast<Index>(prev_masks.size()) != f.batch()) {
    throw ShapeError("MixPool: expected " + std::to_string(f.batch()) + " masks, got " +
                     std::to_string(prev_masks.size()));
  }
  std::vector<BinaryMask> feedback;
  feedback.reserve(prev_masks.size());
  for (const auto& m : prev_masks) feedback.push_back(downscale_mask(m, f.height(), f.width()));

  AttentionMap attention = attention_map(f, pass);
  std::vector<BinaryMask> unified = union_masks(feedback, attention.masks);
  Tensor4<Scalar> attended = hard_attention(f, unified);

  Tensor4<Scalar> out = attended_branch.forward(attended, pass);
  if (feature_branch) out = concat_channels(feature_branch->forward(f, pass), out);

  if (keep_intermediates) {
    intermediates_ = Intermediates{std::move(feedback), std::move(attention.masks), unified, std::move(attended)};
  }
  if (pass.record) unified_ = std::move(unified);
  return out;
}

template <typename Scalar>
Tensor4<Scalar> MixPoolBlock<Scalar>::backward(const Tensor4<Scalar>& dy) {
  if (!feature_branch) return hard_attention(attended_branch.backward(dy), unified_);
  auto [d_feature, d_attended] = split_channels(dy, feature_branch->conv.out_channels());
  Tensor4<Scalar> df = feature_branch->backward(d_feature);
  df.values() += hard_attention(attended_branch.backward(d_attended), unified_).values();
  return df;
}

template <typename Scalar>
void MixPoolBlock<Scalar>::collect(ParamList<Scalar>& out) {
  attention_conv.collect(out);
  attention_logit.collect(out);
  if (feature_branch) feature_branch->collect(out);
  attended_branch.collect(out);
}

template class ConvBnRelu<float>;
template class ConvBnRelu<double>;
template class SeResidualBlock<float>;
template class SeResidualBlock<double>;
template class MixPoolBlock<float>;
template class MixPoolBlock<double>;
template Tensor4<float> hard_attention(const Tensor4<float>&, const std::vector<BinaryMask>&);
template Tensor4<double> hard_attention(const Tensor4<double>&, const std::vector<BinaryMask>&);
template std::vector<BinaryMask> binarize_maps(const Tensor4<float>&, double);
template std::vector<BinaryMask> binarize_maps(const Tensor4<double>&, double);

}  // namespace fanet::nn
