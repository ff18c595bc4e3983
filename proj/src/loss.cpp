#include "fanet/loss.hpp"

#include "fanet/mask.hpp"

#include <cmath>

namespace fanet {

namespace {

template <typename Scalar>
void check(const Tensor4<Scalar>& pred, const Tensor4<Scalar>& target) {
  if (!(pred.shape() == target.shape())) {
    throw ShapeError("loss: prediction " + pred.shape().str() + " vs target " + target.shape().str());
  }
  if (pred.size() == 0) throw ShapeError("loss: empty input");
}

struct DiceSums {
  double intersection = 0.0, pred = 0.0, target = 0.0;
};

template <typename Scalar>
DiceSums dice_sums(const Tensor4<Scalar>& pred, const Tensor4<Scalar>& target) {
  const auto p = pred.values().template cast<double>();
  const auto t = target.values().template cast<double>();
  return {(p * t).sum(), p.sum(), t.sum()};
}

}  // namespace

template <typename Scalar>
double dice_loss(const Tensor4<Scalar>& pred, const Tensor4<Scalar>& target, double smooth) {
  check(pred, target);
  const DiceSums s = dice_sums(pred, target);
  return 1.0 - (2.0 * s.intersection + smooth) / (s.pred + s.target + smooth);
}

template <typename Scalar>
double bce_loss(const Tensor4<Scalar>& pred, const Tensor4<Scalar>& target, double eps) {
  check(pred, target);
  const auto p = pred.values().template cast<double>().max(eps).min(1.0 - eps);
  const auto t = target.values().template cast<double>();
  return -(t * p.log() + (1.0 - t) * (1.0 - p).log()).mean();
}

template <typename Scalar>
LossResult<Scalar> combined_loss(const Tensor4<Scalar>& pred, const Tensor4<Scalar>& target, double smooth,
                                 bool want_grad, double eps) {
  LossResult<Scalar> result;
  result.bce = bce_loss(pred, target, eps);
  result.dice = dice_loss(pred, target, smooth);
  result.total = result.bce + result.dice;
  if (!want_grad) return result;

  const DiceSums s = dice_sums(pred, target);
  const double denom = s.pred + s.target + smooth;
  const double numer = 2.0 * s.intersection + smooth;
  const double inv_n = 1.0 / static_cast<double>(pred.size());

  result.grad = Tensor4<Scalar>(pred.shape());
  const auto& p = pred.values();
  const auto& t = target.values();
  auto& g = result.grad.values();
  for (Index i = 0; i < p.size(); ++i) {
    const double pi = p[i], ti = t[i];
    double d = -(2.0 * ti * denom - numer) / (denom * denom);
    if (pi > eps && pi < 1.0 - eps) d -= (ti / pi - (1.0 - ti) / (1.0 - pi)) * inv_n;
    g[i] = static_cast<Scalar>(d);
  }
  return result;
}

template double dice_loss(const Tensor4<float>&, const Tensor4<float>&, double);
template double dice_loss(const Tensor4<double>&, const Tensor4<double>&, double);
template double bce_loss(const Tensor4<float>&, const Tensor4<float>&, double);
template double bce_loss(const Tensor4<double>&, const Tensor4<double>&, double);
template LossResult<float> combined_loss(const Tensor4<float>&, const Tensor4<float>&, double, bool, double);
template LossResult<double> combined_loss(const Tensor4<double>&, const Tensor4<double>&, double, bool, double);

}  // namespace fanet
