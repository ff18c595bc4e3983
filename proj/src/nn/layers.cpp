#include "fanet/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace fanet::nn {

namespace {

template <typename Scalar>
Param<Scalar> make_param(const std::string& name, std::vector<Index> shape, Index rows, Index cols,
                         bool trainable = true) {
  Param<Scalar> p;
  p.name = name;
  p.shape = std::move(shape);
  p.value = MatrixR<Scalar>::Zero(rows, cols);
  if (trainable) p.grad = MatrixR<Scalar>::Zero(rows, cols);
  p.trainable = trainable;
  return p;
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); drawn in double so float and
// double models built from the same seed hold the same values.
template <typename Scalar>
void init_uniform(MatrixR<Scalar>& m, Index fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
}

// Column layout: row (c, ky, kx), column (oy, ox); image rows outside the
// input read as zero.
template <typename Scalar>
void im2col(const Scalar* img, Index channels, Index height, Index width, Index kernel, Index stride, Index pad,
            Index col_h, Index col_w, Scalar* cols) {
  const Index plane = col_h * col_w;
  for (Index c = 0; c < channels; ++c) {
    for (Index ky = 0; ky < kernel; ++ky) {
      for (Index kx = 0; kx < kernel; ++kx) {
        Scalar* row = cols + ((c * kernel + ky) * kernel + kx) * plane;
        const Index lo = std::clamp<Index>((pad - kx + stride - 1) / stride, 0, col_w);
        const Index hi = std::clamp<Index>((width + pad - kx + stride - 1) / stride, lo, col_w);
        for (Index oy = 0; oy < col_h; ++oy) {
          const Index iy = oy * stride - pad + ky;
          Scalar* out = row + oy * col_w;
          if (iy < 0 || iy >= height) {
            std::fill_n(out, col_w, Scalar(0));
            continue;
          }
          const Scalar* in = img + (c * height + iy) * width;
          std::fill(out, out + lo, Scalar(0));
          if (stride == 1) {
            std::copy(in + lo - pad + kx, in + hi - pad + kx, out + lo);
          } else {
            for (Index ox = lo; ox < hi; ++ox) out[ox] = in[ox * stride - pad + kx];
          }
          std::fill(out + hi, out + col_w, Scalar(0));
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates columns back onto the image.
template <typename Scalar>
void col2im(const Scalar* cols, Index channels, Index height, Index width, Index kernel, Index stride, Index pad,
            Index col_h, Index col_w, Scalar* img) {
  const Index plane = col_h * col_w;
  for (Index c = 0; c < channels; ++c) {
    for (Index ky = 0; ky < kernel; ++ky) {
      for (Index kx = 0; kx < kernel; ++kx) {
        const Scalar* row = cols + ((c * kernel + ky) * kernel + kx) * plane;
        const Index lo = std::clamp<Index>((pad - kx + stride - 1) / stride, 0, col_w);
        const Index hi = std::clamp<Index>((width + pad - kx + stride - 1) / stride, lo, col_w);
        for (Index oy = 0; oy < col_h; ++oy) {
          const Index iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          const Scalar* in = row + oy * col_w;
          Scalar* out = img + (c * height + iy) * width;
          if (stride == 1) {
            for (Index ox = lo; ox < hi; ++ox) out[ox - pad + kx] += in[ox];
          } else {
            for (Index ox = lo; ox < hi; ++ox) out[ox * stride - pad + kx] += in[ox];
          }
        }
      }
    }
  }
}

// Buffers shared by every layer on this thread; they only grow. Distinct
// slots may be live at the same time.
template <typename Scalar>
Scalar* scratch(int slot, Index size) {
  thread_local std::vector<Scalar> buffers[3];
  auto& buffer = buffers[slot];
  if (buffer.size() < static_cast<std::size_t>(size)) buffer.resize(static_cast<std::size_t>(size));
  return buffer.data();
}

template <typename Scalar>
Eigen::Map<MatrixR<Scalar>> scratch_columns(Index rows, Index cols) {
  return Eigen::Map<MatrixR<Scalar>>(scratch<Scalar>(0, rows * cols), rows, cols);
}

// A k x k "same" convolution is a sum over taps (ky, kx) of W_tap * x shifted
// by (ky, kx). With each channel zero-padded to (h + k - 1) x (w + k - 1) and
// flattened, the shifted input is a plain strided view: output (y, x) lives in
// column y * padded_w + x, and columns with x >= w are discarded.
struct PaddedGeometry {
  Index h, w, pad, padded_w, plane;
  PaddedGeometry(Index height, Index width, Index kernel)
      : h(height), w(width), pad(kernel / 2), padded_w(width + kernel - 1), plane((height + kernel - 1) * padded_w) {}
  Index out_cols() const { return h * padded_w; }
  Index tap_offset(Index ky, Index kx) const { return ky * padded_w + kx; }
};

template <typename Scalar>
void pad_planes(const Scalar* src, Index channels, const PaddedGeometry& g, Scalar* dst) {
  std::fill_n(dst, channels * g.plane, Scalar(0));
  for (Index c = 0; c < channels; ++c)
    for (Index y = 0; y < g.h; ++y)
      std::copy_n(src + (c * g.h + y) * g.w, g.w, dst + c * g.plane + (y + g.pad) * g.padded_w + g.pad);
}

template <typename Scalar>
void unpad_planes(const Scalar* src, Index channels, const PaddedGeometry& g, Scalar* dst) {
  for (Index c = 0; c < channels; ++c)
    for (Index y = 0; y < g.h; ++y)
      std::copy_n(src + c * g.plane + (y + g.pad) * g.padded_w + g.pad, g.w, dst + (c * g.h + y) * g.w);
}

// Direct convolution over padded planes for outputs in blocks of kLanes x
// kOutBlock: each input tap is loaded once and broadcast-multiplied into all
// accumulators of the block. Shapes that do not tile fall back to GEMMs.
constexpr Index kLanes = 16;
constexpr Index kOutBlock = 8;

bool direct_applicable(Index out_channels, Index width) {
  return out_channels % kOutBlock == 0 && width % kLanes == 0;
}

// packed[((block * in + ci) * taps + t) * kOutBlock + j] is the weight from
// input channel ci to output block * kOutBlock + j at tap t.
template <typename Scalar>
void pack_direct(const MatrixR<Scalar>& weight, Index in, Index out, Index taps, bool adjoint,
                 VectorX<Scalar>& packed) {
  // adjoint: the weights of dL/dx as a convolution of dL/dy, i.e. channels
  // swapped and the kernel rotated by 180 degrees.
  const Index dst_in = adjoint ? out : in, dst_out = adjoint ? in : out;
  packed.resize(dst_in * dst_out * taps);
  for (Index block = 0; block < dst_out / kOutBlock; ++block)
    for (Index ci = 0; ci < dst_in; ++ci)
      for (Index t = 0; t < taps; ++t)
        for (Index j = 0; j < kOutBlock; ++j) {
          const Index co = block * kOutBlock + j;
          packed[((block * dst_in + ci) * taps + t) * kOutBlock + j] =
              adjoint ? weight(ci, co * taps + (taps - 1 - t)) : weight(co, ci * taps + t);
        }
}

template <typename Scalar, int Vectors>
void direct_conv_impl(const Scalar* padded, Index in, Index out, Index kernel, const PaddedGeometry& g,
                      const Scalar* packed, Scalar* y) {
  using Lane = Eigen::Array<Scalar, kLanes, 1>;
  const Index taps = kernel * kernel;
  for (Index block = 0; block < out / kOutBlock; ++block) {
    const Scalar* wblock = packed + block * in * taps * kOutBlock;
    for (Index row = 0; row < g.h; ++row) {
      for (Index x0 = 0; x0 < g.w; x0 += Vectors * kLanes) {
        Lane acc[Vectors][kOutBlock];
        for (auto& v : acc)
          for (auto& a : v) a.setZero();
        for (Index ci = 0; ci < in; ++ci) {
          const Scalar* src = padded + ci * g.plane + row * g.padded_w + x0;
          const Scalar* wc = wblock + ci * taps * kOutBlock;
          for (Index ky = 0; ky < kernel; ++ky) {
            for (Index kx = 0; kx < kernel; ++kx) {
              const Scalar* wt = wc + (ky * kernel + kx) * kOutBlock;
              for (int v = 0; v < Vectors; ++v) {
                const Lane s = Eigen::Map<const Lane>(src + g.tap_offset(ky, kx) + v * kLanes);
                for (Index j = 0; j < kOutBlock; ++j) acc[v][j] += wt[j] * s;
              }
            }
          }
        }
        for (int v = 0; v < Vectors; ++v)
          for (Index j = 0; j < kOutBlock; ++j)
            Eigen::Map<Lane>(y + ((block * kOutBlock + j) * g.h + row) * g.w + x0 + v * kLanes) = acc[v][j];
      }
    }
  }
}

// y (out x h x w, dense) = convolution of the padded input with packed weights.
template <typename Scalar>
void direct_conv(const Scalar* padded, Index in, Index out, Index kernel, const PaddedGeometry& g,
                 const Scalar* packed, Scalar* y) {
  if (g.w % (2 * kLanes) == 0) {
    direct_conv_impl<Scalar, 2>(padded, in, out, kernel, g, packed, y);
  } else {
    direct_conv_impl<Scalar, 1>(padded, in, out, kernel, g, packed, y);
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <typename Scalar>
Conv2d<Scalar>::Conv2d(const std::string& name, Index in_channels, Index out_channels, Index kernel,
                       std::mt19937_64& rng)
    : in_channels_(in_channels), out_channels_(out_channels), kernel_(kernel) {
  const Index fan_in = in_channels * kernel * kernel;
  weight = make_param<Scalar>(name + ".weight", {out_channels, in_channels, kernel, kernel}, out_channels, fan_in);
  bias = make_param<Scalar>(name + ".bias", {out_channels}, out_channels, 1);
  init_uniform(weight.value, fan_in, rng);
  init_uniform(bias.value, fan_in, rng);
}

template <typename Scalar>
Tensor4<Scalar> Conv2d<Scalar>::forward(const Tensor4<Scalar>& x, const Pass& pass) {
  if (x.channels() != in_channels_) {
    throw std::invalid_argument(weight.name + ": expected " + std::to_string(in_channels_) + " input channels, got " +
                                std::to_string(x.channels()));
  }
  const Index h = x.height(), w = x.width();
  Tensor4<Scalar> y(x.batch(), out_channels_, h, w);
  if (kernel_ == 1) {
    for (Index n = 0; n < x.batch(); ++n) {
      y.sample(n).noalias() = weight.value * x.sample(n);
      y.sample(n).colwise() += bias.value.col(0);
    }
    if (pass.record) input_ = x;
    return y;
  }

  const PaddedGeometry g(h, w, kernel_);
  const Index taps = kernel_ * kernel_;
  const bool direct = direct_applicable(out_channels_, w);
  if (direct) {
    pack_direct(weight.value, in_channels_, out_channels_, taps, false, packed_weights_);
  } else {
    // Row block t of tap_weights_ is W[:, :, ky, kx] with t = ky * k + kx.
    tap_weights_.resize(taps * out_channels_, in_channels_);
    for (Index t = 0; t < taps; ++t)
      for (Index c = 0; c < in_channels_; ++c)
        tap_weights_.block(t * out_channels_, c, out_channels_, 1) = weight.value.col(c * taps + t);
  }

  // The trailing k - 1 zeros keep the last channel's widest view in bounds.
  const Index padded_size = x.batch() * in_channels_ * g.plane + kernel_;
  Scalar* padded;
  if (pass.record) {
    padded_input_.resize(padded_size);
    padded = padded_input_.data();
    input_shape_ = x.shape();
  } else {
    padded = scratch<Scalar>(1, padded_size);
  }
  std::fill_n(padded + padded_size - kernel_, kernel_, Scalar(0));

  for (Index n = 0; n < x.batch(); ++n) {
    Scalar* xp = padded + n * in_channels_ * g.plane;
    pad_planes(x.sample_data(n), in_channels_, g, xp);
    auto out = y.sample(n);
    if (direct) {
      direct_conv(xp, in_channels_, out_channels_, kernel_, g, packed_weights_.data(), y.sample_data(n));
    } else {
      Eigen::Map<MatrixR<Scalar>> out_wide(scratch<Scalar>(2, out_channels_ * g.out_cols()), out_channels_,
                                           g.out_cols());
      out_wide.setZero();
      for (Index ky = 0; ky < kernel_; ++ky) {
        for (Index kx = 0; kx < kernel_; ++kx) {
          const Eigen::Map<const MatrixR<Scalar>, 0, Eigen::OuterStride<>> shifted(
              xp + g.tap_offset(ky, kx), in_channels_, g.out_cols(), Eigen::OuterStride<>(g.plane));
          out_wide.noalias() += tap_weights_.middleRows((ky * kernel_ + kx) * out_channels_, out_channels_) * shifted;
        }
      }
      for (Index row = 0; row < h; ++row) out.middleCols(row * w, w) = out_wide.middleCols(row * g.padded_w, w);
    }
    out.colwise() += bias.value.col(0);
  }
  return y;
}

template <typename Scalar>
Tensor4<Scalar> Conv2d<Scalar>::backward(const Tensor4<Scalar>& dy) {
  if (kernel_ == 1) {
    require_shape(dy.shape(), Shape4{input_.batch(), out_channels_, input_.height(), input_.width()},
                  "Conv2d::backward");
    Tensor4<Scalar> dx;
    if (input_grad_) dx = Tensor4<Scalar>(input_.shape());
    for (Index n = 0; n < dy.batch(); ++n) {
      const auto gy = dy.sample(n);
      bias.grad.col(0) += gy.rowwise().sum();
      weight.grad.noalias() += gy * input_.sample(n).transpose();
      if (input_grad_) dx.sample(n).noalias() = weight.value.transpose() * gy;
    }
    return dx;
  }

  const Index h = input_shape_.height, w = input_shape_.width;
  require_shape(dy.shape(), Shape4{input_shape_.batch, out_channels_, h, w}, "Conv2d::backward");
  const PaddedGeometry g(h, w, kernel_);
  const Index taps = kernel_ * kernel_;
  Tensor4<Scalar> dx;
  const bool direct = input_grad_ && direct_applicable(in_channels_, w);
  if (input_grad_) dx = Tensor4<Scalar>(input_shape_);
  if (direct) pack_direct(weight.value, in_channels_, out_channels_, taps, true, packed_weights_);
  if (input_grad_ && !direct) {
    tap_weights_.resize(taps * out_channels_, in_channels_);
    for (Index t = 0; t < taps; ++t)
      for (Index c = 0; c < in_channels_; ++c)
        tap_weights_.block(t * out_channels_, c, out_channels_, 1) = weight.value.col(c * taps + t);
  }

  MatrixR<Scalar> tap_grads = MatrixR<Scalar>::Zero(taps * out_channels_, in_channels_);
  // Garbage columns stay zero so they contribute nothing below.
  Eigen::Map<MatrixR<Scalar>> dy_wide(scratch<Scalar>(2, out_channels_ * g.out_cols()), out_channels_, g.out_cols());
  dy_wide.setZero();
  Scalar* dxp = nullptr;
  Scalar* dyp = nullptr;
  if (direct) {
    dyp = scratch<Scalar>(1, out_channels_ * g.plane + kernel_);
    std::fill_n(dyp + out_channels_ * g.plane, kernel_, Scalar(0));
  } else if (input_grad_) {
    dxp = scratch<Scalar>(1, in_channels_ * g.plane + kernel_);
  }

  for (Index n = 0; n < dy.batch(); ++n) {
    const auto gy = dy.sample(n);
    bias.grad.col(0) += gy.rowwise().sum();
    for (Index row = 0; row < h; ++row) dy_wide.middleCols(row * g.padded_w, w) = gy.middleCols(row * w, w);
    const Scalar* xp = padded_input_.data() + n * in_channels_ * g.plane;
    for (Index t = 0; t < taps; ++t) {
      const Eigen::Map<const MatrixR<Scalar>, 0, Eigen::OuterStride<>> shifted(
          xp + g.tap_offset(t / kernel_, t % kernel_), in_channels_, g.out_cols(), Eigen::OuterStride<>(g.plane));
      tap_grads.middleRows(t * out_channels_, out_channels_).noalias() += dy_wide * shifted.transpose();
    }
    if (direct) {
      pad_planes(dy.sample_data(n), out_channels_, g, dyp);
      direct_conv(dyp, out_channels_, in_channels_, kernel_, g, packed_weights_.data(), dx.sample_data(n));
    } else if (input_grad_) {
      std::fill_n(dxp, in_channels_ * g.plane + kernel_, Scalar(0));
      for (Index t = 0; t < taps; ++t) {
        Eigen::Map<MatrixR<Scalar>, 0, Eigen::OuterStride<>> d_shifted(
            dxp + g.tap_offset(t / kernel_, t % kernel_), in_channels_, g.out_cols(), Eigen::OuterStride<>(g.plane));
        d_shifted.noalias() += tap_weights_.middleRows(t * out_channels_, out_channels_).transpose() * dy_wide;
      }
      unpad_planes(dxp, in_channels_, g, dx.sample_data(n));
    }
  }
  for (Index t = 0; t < taps; ++t)
    for (Index c = 0; c < in_channels_; ++c)
      weight.grad.col(c * taps + t) += tap_grads.block(t * out_channels_, c, out_channels_, 1);
  return dx;
}

template <typename Scalar>
void Conv2d<Scalar>::collect(ParamList<Scalar>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ------------------------------------------------------- ConvTranspose2d

template <typename Scalar>
ConvTranspose2d<Scalar>::ConvTranspose2d(const std::string& name, Index in_channels, Index out_channels,
                                         std::mt19937_64& rng)
    : in_channels_(in_channels), out_channels_(out_channels) {
  const Index taps = kKernel * kKernel;
  // PyTorch computes fan-in of a transposed conv from weight dim 1 (out channels).
  const Index fan_in = out_channels * taps;
  weight = make_param<Scalar>(name + ".weight", {in_channels, out_channels, kKernel, kKernel}, in_channels,
                              out_channels * taps);
  bias = make_param<Scalar>(name + ".bias", {out_channels}, out_channels, 1);
  init_uniform(weight.value, fan_in, rng);
  init_uniform(bias.value, fan_in, rng);
}

template <typename Scalar>
Tensor4<Scalar> ConvTranspose2d<Scalar>::forward(const Tensor4<Scalar>& x, const Pass& pass) {
  if (x.channels() != in_channels_) throw std::invalid_argument(weight.name + ": input channel mismatch");
  const Index h = x.height(), w = x.width();
  Tensor4<Scalar> y(x.batch(), out_channels_, 2 * h, 2 * w);
  for (Index n = 0; n < x.batch(); ++n) {
    auto cols = scratch_columns<Scalar>(out_channels_ * kKernel * kKernel, h * w);
    cols.noalias() = weight.value.transpose() * x.sample(n);
    col2im(cols.data(), out_channels_, 2 * h, 2 * w, kKernel, kStride, kPadding, h, w, y.sample_data(n));
    y.sample(n).colwise() += bias.value.col(0);
  }
  if (pass.record) input_ = x;
  return y;
}

template <typename Scalar>
Tensor4<Scalar> ConvTranspose2d<Scalar>::backward(const Tensor4<Scalar>& dy) {
  const Index h = input_.height(), w = input_.width();
  require_shape(dy.shape(), Shape4{input_.batch(), out_channels_, 2 * h, 2 * w}, "ConvTranspose2d::backward");
  Tensor4<Scalar> dx(input_.shape());
  for (Index n = 0; n < dy.batch(); ++n) {
    bias.grad.col(0) += dy.sample(n).rowwise().sum();
    auto cols = scratch_columns<Scalar>(out_channels_ * kKernel * kKernel, h * w);
    im2col(dy.sample_data(n), out_channels_, 2 * h, 2 * w, kKernel, kStride, kPadding, h, w, cols.data());
    weight.grad.noalias() += input_.sample(n) * cols.transpose();
    dx.sample(n).noalias() = weight.value * cols;
  }
  return dx;
}

template <typename Scalar>
void ConvTranspose2d<Scalar>::collect(ParamList<Scalar>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ----------------------------------------------------------- BatchNorm2d

template <typename Scalar>
BatchNorm2d<Scalar>::BatchNorm2d(const std::string& name, Index channels, double eps, double momentum)
    : channels_(channels), eps_(static_cast<Scalar>(eps)), momentum_(static_cast<Scalar>(momentum)) {
  gamma = make_param<Scalar>(name + ".weight", {channels}, channels, 1);
  beta = make_param<Scalar>(name + ".bias", {channels}, channels, 1);
  running_mean = make_param<Scalar>(name + ".running_mean", {channels}, channels, 1, false);
  running_var = make_param<Scalar>(name + ".running_var", {channels}, channels, 1, false);
  gamma.value.setOnes();
  running_var.value.setOnes();
}

template <typename Scalar>
Tensor4<Scalar> BatchNorm2d<Scalar>::forward(const Tensor4<Scalar>& x, const Pass& pass) {
  if (x.channels() != channels_) throw std::invalid_argument(gamma.name + ": channel mismatch");
  const Index count = x.batch() * x.height() * x.width();
  VectorX<Scalar> mean, var;
  if (pass.train_statistics) {
    mean = VectorX<Scalar>::Zero(channels_);
    for (Index n = 0; n < x.batch(); ++n) mean += x.sample(n).rowwise().sum();
    mean /= static_cast<Scalar>(count);
    var = VectorX<Scalar>::Zero(channels_);
    for (Index n = 0; n < x.batch(); ++n)
      var += (x.sample(n).colwise() - mean).array().square().rowwise().sum().matrix();
    var /= static_cast<Scalar>(count);
    const Scalar unbias = count > 1 ? static_cast<Scalar>(count) / static_cast<Scalar>(count - 1) : Scalar(1);
    running_mean.value.col(0) = (Scalar(1) - momentum_) * running_mean.value.col(0) + momentum_ * mean;
    running_var.value.col(0) = (Scalar(1) - momentum_) * running_var.value.col(0) + momentum_ * unbias * var;
  } else {
    mean = running_mean.value.col(0);
    var = running_var.value.col(0);
  }
  const VectorX<Scalar> inv_std = (var.array() + eps_).rsqrt().matrix();
  const VectorX<Scalar> scale = gamma.value.col(0).cwiseProduct(inv_std);
  const VectorX<Scalar> shift = beta.value.col(0) - scale.cwiseProduct(mean);

  Tensor4<Scalar> y(x.shape());
  for (Index n = 0; n < x.batch(); ++n) {
    y.sample(n) = (x.sample(n).array().colwise() * scale.array()).colwise() + shift.array();
  }
  if (pass.record) {
    normalized_ = Tensor4<Scalar>(x.shape());
    for (Index n = 0; n < x.batch(); ++n) {
      normalized_.sample(n) = (x.sample(n).colwise() - mean).array().colwise() * inv_std.array();
    }
    inv_std_ = inv_std;
    batch_stats_ = pass.train_statistics;
  }
  return y;
}

template <typename Scalar>
Tensor4<Scalar> BatchNorm2d<Scalar>::backward(const Tensor4<Scalar>& dy) {
  require_shape(dy.shape(), normalized_.shape(), "BatchNorm2d::backward");
  VectorX<Scalar> sum_dy = VectorX<Scalar>::Zero(channels_);
  VectorX<Scalar> sum_dy_xhat = VectorX<Scalar>::Zero(channels_);
  for (Index n = 0; n < dy.batch(); ++n) {
    sum_dy += dy.sample(n).rowwise().sum();
    sum_dy_xhat += dy.sample(n).cwiseProduct(normalized_.sample(n)).rowwise().sum();
  }
  gamma.grad.col(0) += sum_dy_xhat;
  beta.grad.col(0) += sum_dy;

  const VectorX<Scalar> scale = gamma.value.col(0).cwiseProduct(inv_std_);
  Tensor4<Scalar> dx(dy.shape());
  if (!batch_stats_) {
    for (Index n = 0; n < dy.batch(); ++n) dx.sample(n) = dy.sample(n).array().colwise() * scale.array();
    return dx;
  }
  const Scalar count = static_cast<Scalar>(dy.batch() * dy.height() * dy.width());
  const VectorX<Scalar> mean_dy = sum_dy / count;
  const VectorX<Scalar> mean_dy_xhat = sum_dy_xhat / count;
  for (Index n = 0; n < dy.batch(); ++n) {
    auto centered = (dy.sample(n).colwise() - mean_dy).array() -
                    normalized_.sample(n).array().colwise() * mean_dy_xhat.array();
    dx.sample(n) = centered.colwise() * scale.array();
  }
  return dx;
}

template <typename Scalar>
void BatchNorm2d<Scalar>::collect(ParamList<Scalar>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
  out.push_back(&running_mean);
  out.push_back(&running_var);
}

// ------------------------------------------------------------------ Relu

template <typename Scalar>
Tensor4<Scalar> Relu<Scalar>::forward(const Tensor4<Scalar>& x, const Pass& pass) {
  Tensor4<Scalar> y(x.shape());
  y.values() = x.values().max(Scalar(0));
  if (pass.record) output_ = y;
  return y;
}

template <typename Scalar>
Tensor4<Scalar> Relu<Scalar>::backward(const Tensor4<Scalar>& dy) const {
  require_shape(dy.shape(), output_.shape(), "Relu::backward");
  Tensor4<Scalar> dx(dy.shape());
  dx.values() = (output_.values() > Scalar(0)).select(dy.values(), Scalar(0));
  return dx;
}

// -------------------------------------------------------------- MaxPool2

template <typename Scalar>
Tensor4<Scalar> MaxPool2<Scalar>::forward(const Tensor4<Scalar>& x, const Pass& pass) {
  if (x.height() % 2 != 0 || x.width() % 2 != 0) {
    throw std::invalid_argument("MaxPool2: spatial dims must be even, got " + x.shape().str());
  }
  const Index oh = x.height() / 2, ow = x.width() / 2, w = x.width();
  Tensor4<Scalar> y(x.batch(), x.channels(), oh, ow);
  if (pass.record) {
    input_shape_ = x.shape();
    argmax_.resize(y.size());
  }
  Index o = 0;
  for (Index nc = 0; nc < x.batch() * x.channels(); ++nc) {
    const Scalar* plane = x.data() + nc * x.height() * w;
    const Index plane_offset = nc * x.height() * w;
    for (Index oy = 0; oy < oh; ++oy) {
      for (Index ox = 0; ox < ow; ++ox, ++o) {
        Index best = (2 * oy) * w + 2 * ox;
        for (const Index cand : {best + 1, best + w, best + w + 1}) {
          if (plane[cand] > plane[best]) best = cand;
        }
        y.data()[o] = plane[best];
        if (pass.record) argmax_[o] = plane_offset + best;
      }
    }
  }
  return y;
}

template <typename Scalar>
Tensor4<Scalar> MaxPool2<Scalar>::backward(const Tensor4<Scalar>& dy) const {
  Tensor4<Scalar> dx(input_shape_);
  for (Index o = 0; o < dy.size(); ++o) dx.data()[argmax_[o]] += dy.data()[o];
  return dx;
}

// --------------------------------------------------------- SqueezeExcite

template <typename Scalar>
SqueezeExcite<Scalar>::SqueezeExcite(const std::string& name, Index channels, Index reduction, std::mt19937_64& rng) {
  const Index hidden = std::max<Index>(1, channels / std::max<Index>(reduction, 1));
  reduce_weight = make_param<Scalar>(name + ".fc1.weight", {hidden, channels}, hidden, channels);
  reduce_bias = make_param<Scalar>(name + ".fc1.bias", {hidden}, hidden, 1);
  expand_weight = make_param<Scalar>(name + ".fc2.weight", {channels, hidden}, channels, hidden);
  expand_bias = make_param<Scalar>(name + ".fc2.bias", {channels}, channels, 1);
  init_uniform(reduce_weight.value, channels, rng);
  init_uniform(reduce_bias.value, channels, rng);
  init_uniform(expand_weight.value, hidden, rng);
  init_uniform(expand_bias.value, hidden, rng);
}

template <typename Scalar>
Tensor4<Scalar> SqueezeExcite<Scalar>::forward(const Tensor4<Scalar>& x, const Pass& pass) {
  const Index c = x.channels();
  if (c != expand_weight.value.rows()) throw std::invalid_argument(reduce_weight.name + ": channel mismatch");
  const Scalar inv_plane = Scalar(1) / static_cast<Scalar>(x.height() * x.width());
  MatrixR<Scalar> squeezed(c, x.batch());
  for (Index n = 0; n < x.batch(); ++n) squeezed.col(n) = x.sample(n).rowwise().sum() * inv_plane;
  MatrixR<Scalar> hidden_pre = reduce_weight.value * squeezed;
  hidden_pre.colwise() += reduce_bias.value.col(0);
  MatrixR<Scalar> logits = expand_weight.value * hidden_pre.cwiseMax(Scalar(0));
  logits.colwise() += expand_bias.value.col(0);
  MatrixR<Scalar> gates = logits.unaryExpr([](Scalar v) { return sigmoid(v); });

  Tensor4<Scalar> y(x.shape());
  for (Index n = 0; n < x.batch(); ++n) y.sample(n) = x.sample(n).array().colwise() * gates.col(n).array();
  if (pass.record) {
    input_ = x;
    squeezed_ = std::move(squeezed);
    hidden_pre_ = std::move(hidden_pre);
  }
  gates_ = std::move(gates);
  return y;
}

template <typename Scalar>
Tensor4<Scalar> SqueezeExcite<Scalar>::backward(const Tensor4<Scalar>& dy) {
  require_shape(dy.shape(), input_.shape(), "SqueezeExcite::backward");
  const Index batch = dy.batch();
  const Scalar inv_plane = Scalar(1) / static_cast<Scalar>(dy.height() * dy.width());
  MatrixR<Scalar> dgates(dy.channels(), batch);
  for (Index n = 0; n < batch; ++n) dgates.col(n) = dy.sample(n).cwiseProduct(input_.sample(n)).rowwise().sum();
  const MatrixR<Scalar> dlogits = dgates.cwiseProduct(gates_.cwiseProduct((Scalar(1) - gates_.array()).matrix()));
  const MatrixR<Scalar> hidden = hidden_pre_.cwiseMax(Scalar(0));
  expand_weight.grad.noalias() += dlogits * hidden.transpose();
  expand_bias.grad.col(0) += dlogits.rowwise().sum();
  const MatrixR<Scalar> dhidden =
      (expand_weight.value.transpose() * dlogits).array() * (hidden_pre_.array() > Scalar(0)).template cast<Scalar>();
  reduce_weight.grad.noalias() += dhidden * squeezed_.transpose();
  reduce_bias.grad.col(0) += dhidden.rowwise().sum();
  const MatrixR<Scalar> dsqueezed = reduce_weight.value.transpose() * dhidden * inv_plane;

  Tensor4<Scalar> dx(dy.shape());
  for (Index n = 0; n < batch; ++n) {
    dx.sample(n) = (dy.sample(n).array().colwise() * gates_.col(n).array()).colwise() + dsqueezed.col(n).array();
  }
  return dx;
}

template <typename Scalar>
void SqueezeExcite<Scalar>::collect(ParamList<Scalar>& out) {
  out.push_back(&reduce_weight);
  out.push_back(&reduce_bias);
  out.push_back(&expand_weight);
  out.push_back(&expand_bias);
}

template class Conv2d<float>;
template class Conv2d<double>;
template class ConvTranspose2d<float>;
template class ConvTranspose2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class Relu<float>;
template class Relu<double>;
template class MaxPool2<float>;
template class MaxPool2<double>;
template class SqueezeExcite<float>;
template class SqueezeExcite<double>;

}  // namespace fanet::nn
