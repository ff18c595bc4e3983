#ifndef FANET_TESTS_ORACLES_HPP
#define FANET_TESTS_ORACLES_HPP

// Straightforward loop implementations used as independent references.

#include "fanet/mask.hpp"
#include "fanet/metrics.hpp"
#include "fanet/nn/blocks.hpp"
#include "fanet/nn/layers.hpp"
#include "fanet/tensor.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace fanet::oracle {

/// Direct "same"-padded convolution, weight laid out (out, in, k, k).
template <typename Scalar>
Tensor4<Scalar> conv2d(const Tensor4<Scalar>& x, const MatrixR<Scalar>& weight, const MatrixR<Scalar>& bias,
                       Index kernel) {
  const Index out_c = weight.rows(), in_c = x.channels(), pad = kernel / 2;
  Tensor4<Scalar> y(x.batch(), out_c, x.height(), x.width());
  for (Index n = 0; n < x.batch(); ++n)
    for (Index o = 0; o < out_c; ++o)
      for (Index r = 0; r < x.height(); ++r)
        for (Index c = 0; c < x.width(); ++c) {
          double acc = bias(o, 0);
          for (Index i = 0; i < in_c; ++i)
            for (Index ky = 0; ky < kernel; ++ky)
              for (Index kx = 0; kx < kernel; ++kx) {
                const Index yy = r + ky - pad, xx = c + kx - pad;
                if (yy < 0 || yy >= x.height() || xx < 0 || xx >= x.width()) continue;
                acc += double(weight(o, (i * kernel + ky) * kernel + kx)) * double(x(n, i, yy, xx));
              }
          y(n, o, r, c) = static_cast<Scalar>(acc);
        }
  return y;
}

/// Direct transposed convolution (k=4, stride 2, padding 1), weight (in, out, k, k).
template <typename Scalar>
Tensor4<Scalar> conv_transpose2d(const Tensor4<Scalar>& x, const MatrixR<Scalar>& weight, const MatrixR<Scalar>& bias) {
  const Index k = 4, out_c = bias.rows();
  Tensor4<Scalar> y(x.batch(), out_c, 2 * x.height(), 2 * x.width());
  for (Index n = 0; n < x.batch(); ++n)
    for (Index o = 0; o < out_c; ++o)
      for (Index r = 0; r < y.height(); ++r)
        for (Index c = 0; c < y.width(); ++c) y(n, o, r, c) = bias(o, 0);
  for (Index n = 0; n < x.batch(); ++n)
    for (Index i = 0; i < x.channels(); ++i)
      for (Index r = 0; r < x.height(); ++r)
        for (Index c = 0; c < x.width(); ++c)
          for (Index o = 0; o < out_c; ++o)
            for (Index ky = 0; ky < k; ++ky)
              for (Index kx = 0; kx < k; ++kx) {
                const Index yy = 2 * r - 1 + ky, xx = 2 * c - 1 + kx;
                if (yy < 0 || yy >= y.height() || xx < 0 || xx >= y.width()) continue;
                y(n, o, yy, xx) += weight(i, (o * k + ky) * k + kx) * x(n, i, r, c);
              }
  return y;
}

/// Batch norm with batch statistics (biased variance).
template <typename Scalar>
Tensor4<Scalar> batch_norm_train(const Tensor4<Scalar>& x, const MatrixR<Scalar>& gamma, const MatrixR<Scalar>& beta,
                                 double eps = 1e-5) {
  Tensor4<Scalar> y(x.shape());
  const double count = double(x.batch() * x.height() * x.width());
  for (Index c = 0; c < x.channels(); ++c) {
    double mean = 0, var = 0;
    for (Index n = 0; n < x.batch(); ++n)
      for (Index r = 0; r < x.height(); ++r)
        for (Index q = 0; q < x.width(); ++q) mean += x(n, c, r, q);
    mean /= count;
    for (Index n = 0; n < x.batch(); ++n)
      for (Index r = 0; r < x.height(); ++r)
        for (Index q = 0; q < x.width(); ++q) var += (x(n, c, r, q) - mean) * (x(n, c, r, q) - mean);
    var /= count;
    for (Index n = 0; n < x.batch(); ++n)
      for (Index r = 0; r < x.height(); ++r)
        for (Index q = 0; q < x.width(); ++q)
          y(n, c, r, q) = static_cast<Scalar>((x(n, c, r, q) - mean) / std::sqrt(var + eps) * gamma(c, 0) + beta(c, 0));
  }
  return y;
}

template <typename Scalar>
Tensor4<Scalar> relu(Tensor4<Scalar> x) {
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = x.data()[i] > 0 ? x.data()[i] : Scalar(0);
  return x;
}

/// Window-OR downscale by explicit quadruple loop.
inline BinaryMask downscale(const BinaryMask& m, Index th, Index tw) {
  BinaryMask out(th, tw);
  const Index sy = m.height() / th, sx = m.width() / tw;
  for (Index y = 0; y < th; ++y)
    for (Index x = 0; x < tw; ++x) {
      bool any = false;
      for (Index dy = 0; dy < sy; ++dy)
        for (Index dx = 0; dx < sx; ++dx) any = any || m(y * sy + dy, x * sx + dx) == 1;
      out.set(y, x, any);
    }
  return out;
}

inline BinaryMask random_mask(Index h, Index w, std::mt19937_64& rng, double p = 0.5) {
  std::bernoulli_distribution coin(p);
  BinaryMask m(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) m.set(y, x, coin(rng));
  return m;
}

template <typename Scalar>
Tensor4<Scalar> random_tensor(Shape4 shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor4<Scalar> t(shape);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(dist(rng));
  return t;
}

/// Batch norm with running statistics.
template <typename Scalar>
Tensor4<Scalar> batch_norm_eval(const Tensor4<Scalar>& x, const MatrixR<Scalar>& gamma, const MatrixR<Scalar>& beta,
                                const MatrixR<Scalar>& mean, const MatrixR<Scalar>& var, double eps = 1e-5) {
  Tensor4<Scalar> y(x.shape());
  for (Index n = 0; n < x.batch(); ++n)
    for (Index c = 0; c < x.channels(); ++c)
      for (Index r = 0; r < x.height(); ++r)
        for (Index q = 0; q < x.width(); ++q)
          y(n, c, r, q) = static_cast<Scalar>((x(n, c, r, q) - mean(c, 0)) / std::sqrt(var(c, 0) + eps) * gamma(c, 0) +
                                              beta(c, 0));
  return y;
}

/// Channel concatenation by explicit copy.
template <typename Scalar>
Tensor4<Scalar> concat(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b) {
  Tensor4<Scalar> out(a.batch(), a.channels() + b.channels(), a.height(), a.width());
  for (Index n = 0; n < a.batch(); ++n)
    for (Index r = 0; r < a.height(); ++r)
      for (Index q = 0; q < a.width(); ++q) {
        for (Index c = 0; c < a.channels(); ++c) out(n, c, r, q) = a(n, c, r, q);
        for (Index c = 0; c < b.channels(); ++c) out(n, a.channels() + c, r, q) = b(n, c, r, q);
      }
  return out;
}

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Exhaustive Otsu over every boundary k + 0.5, comparing between-class
// variances n0*n1*(mu0-mu1)^2 exactly as rationals (n1*S0 - n0*S1)^2 / (n0*n1).
inline int exhaustive_otsu(const Eigen::ArrayXXd& image) {
  int best = -1;
  unsigned __int128 best_num = 0, best_den = 1;
  for (int k = 0; k < 255; ++k) {
    __int128 n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (Index i = 0; i < image.size(); ++i) {
      const auto v = static_cast<__int128>(image(i));
      if (v <= k) {
        ++n0;
        s0 += v;
      } else {
        ++n1;
        s1 += v;
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    const __int128 diff = n1 * s0 - n0 * s1;
    const auto num = static_cast<unsigned __int128>(diff < 0 ? -diff : diff);
    const unsigned __int128 sq = num * num;
    const auto den = static_cast<unsigned __int128>(n0 * n1);
    if (best < 0 || sq * best_den > best_num * den) {
      best = k;
      best_num = sq;
      best_den = den;
    }
  }
  return best;
}

/// Per-pixel tally.
inline ConfusionCounts naive_confusion(const BinaryMask& p, const BinaryMask& t) {
  ConfusionCounts c;
  for (Index y = 0; y < p.height(); ++y)
    for (Index x = 0; x < p.width(); ++x) {
      const bool a = p(y, x), b = t(y, x);
      if (a && b) ++c.tp;
      if (a && !b) ++c.fp;
      if (!a && b) ++c.fn;
      if (!a && !b) ++c.tn;
    }
  return c;
}

/// Metrics straight from a pixel loop. A ratio whose denominator is empty
/// is 1 when the masks make no mistake it could count, else 0.
inline MetricSuite naive_metrics(const BinaryMask& p, const BinaryMask& t) {
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (Index y = 0; y < p.height(); ++y)
    for (Index x = 0; x < p.width(); ++x) {
      if (p(y, x) && t(y, x)) tp += 1;
      if (p(y, x) && !t(y, x)) fp += 1;
      if (!p(y, x) && t(y, x)) fn += 1;
      if (!p(y, x) && !t(y, x)) tn += 1;
    }
  auto ratio = [](double num, double den, double errors) { return den == 0 ? (errors == 0 ? 1.0 : 0.0) : num / den; };
  MetricSuite m;
  m.f1 = ratio(2 * tp, 2 * tp + fp + fn, fp + fn);
  m.iou = ratio(tp, tp + fp + fn, fp + fn);
  m.precision = ratio(tp, tp + fp, fn);
  m.recall = ratio(tp, tp + fn, fp);
  m.specificity = ratio(tn, tn + fp, fn);
  m.accuracy = (tp + tn) / (tp + fp + fn + tn);
  m.f2 = ratio(5 * tp, 5 * tp + 4 * fn + fp, fp + fn);
  return m;
}

template <typename Scalar>
void randomize_bn(nn::BatchNorm2d<Scalar>& bn, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5), pos(0.5, 2.0);
  for (Index c = 0; c < bn.gamma.value.rows(); ++c) {
    bn.gamma.value(c, 0) = pos(rng);
    bn.beta.value(c, 0) = u(rng);
    bn.running_mean.value(c, 0) = u(rng);
    bn.running_var.value(c, 0) = pos(rng);
  }
}

template <typename Scalar>
Tensor4<Scalar> conv_bn_relu(const nn::ConvBnRelu<Scalar>& block, const Tensor4<Scalar>& x) {
  const auto& bn = block.bn;
  return relu(batch_norm_eval(conv2d(x, block.conv.weight.value, block.conv.bias.value, 3), bn.gamma.value,
                              bn.beta.value, bn.running_mean.value, bn.running_var.value));
}

/// MixPool in inference mode, composed step by step: attention logits from
/// conv-BN-ReLU and a 1x1 conv, the hard gate sigmoid >= 0.5 OR'ed with the
/// window-pooled previous mask, the gated features through their branch, and
/// the optional plain-feature branch concatenated in front.
template <typename Scalar>
Tensor4<Scalar> mixpool_inference(const nn::MixPoolBlock<Scalar>& mix, const Tensor4<Scalar>& f,
                                  const std::vector<BinaryMask>& prev) {
  const Tensor4<Scalar> hidden = conv_bn_relu(mix.attention_conv, f);
  const Tensor4<Scalar> logits = conv2d(hidden, mix.attention_logit.weight.value, mix.attention_logit.bias.value, 1);
  Tensor4<Scalar> attended(f.shape());
  for (Index n = 0; n < f.batch(); ++n) {
    const BinaryMask m = downscale(prev[n], f.height(), f.width());
    for (Index y = 0; y < f.height(); ++y)
      for (Index x = 0; x < f.width(); ++x) {
        const bool generated = 1.0 / (1.0 + std::exp(-static_cast<double>(logits(n, 0, y, x)))) >= 0.5;
        const bool keep = m(y, x) == 1 || generated;
        for (Index c = 0; c < f.channels(); ++c) attended(n, c, y, x) = keep ? f(n, c, y, x) : Scalar(0);
      }
  }
  Tensor4<Scalar> out = conv_bn_relu(mix.attended_branch, attended);
  if (mix.feature_branch) out = concat(conv_bn_relu(*mix.feature_branch, f), out);
  return out;
}

}  // namespace fanet::oracle

#endif  // FANET_TESTS_ORACLES_HPP
