#ifndef FANET_LOSS_HPP
#define FANET_LOSS_HPP

#include "fanet/tensor.hpp"

namespace fanet {

/// Probability clamp used by the cross-entropy term.
inline constexpr double kBceEpsilon = 1e-7;

/// 1 - (2 sum(p t) + smooth) / (sum(p) + sum(t) + smooth), over all elements.
template <typename Scalar>
double dice_loss(const Tensor4<Scalar>& pred, const Tensor4<Scalar>& target, double smooth = 1.0);

/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
template <typename Scalar>
double bce_loss(const Tensor4<Scalar>& pred, const Tensor4<Scalar>& target, double eps = kBceEpsilon);

template <typename Scalar>
struct LossResult {
  double bce = 0.0;
  double dice = 0.0;
  double total = 0.0;
  Tensor4<Scalar> grad;  // dL/dpred; empty unless requested
};

/// Mean BCE plus dice loss. With `want_grad`, also dL/dpred (zero where the
/// clamp is active for the BCE term).
template <typename Scalar>
LossResult<Scalar> combined_loss(const Tensor4<Scalar>& pred, const Tensor4<Scalar>& target, double smooth = 1.0,
                                 bool want_grad = false, double eps = kBceEpsilon);

}  // namespace fanet

#endif  // FANET_LOSS_HPP
