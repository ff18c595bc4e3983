#include "fanet/optim.hpp"

#include <algorithm>
#include <cmath>

namespace fanet {

template <typename Scalar>
void Adam<Scalar>::step(const nn::ParamList<Scalar>& params) {
  if (m_.size() != params.size()) {
    m_.clear();
    v_.clear();
    for (const auto* p : params) {
      m_.push_back(MatrixR<Scalar>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(MatrixR<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++steps_;
  const Scalar b1 = static_cast<Scalar>(options_.beta1);
  const Scalar b2 = static_cast<Scalar>(options_.beta2);
  const Scalar correction1 = static_cast<Scalar>(1.0 - std::pow(options_.beta1, static_cast<double>(steps_)));
  const Scalar correction2 = static_cast<Scalar>(1.0 - std::pow(options_.beta2, static_cast<double>(steps_)));
  const Scalar step_size = static_cast<Scalar>(options_.learning_rate) / correction1;
  const Scalar eps = static_cast<Scalar>(options_.eps);
  const Scalar sqrt_c2 = std::sqrt(correction2);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    if (!p.trainable) continue;
    auto m = m_[i].array();
    auto v = v_[i].array();
    const auto g = p.grad.array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    p.value.array() -= step_size * m / (v.sqrt() / sqrt_c2 + eps);
  }
}

double PlateauScheduler::step(double metric, double current_lr) {
  if (metric < best_ * (1.0 - options_.threshold) || !std::isfinite(best_)) {
    best_ = metric;
    bad_epochs_ = 0;
  } else {
    ++bad_epochs_;
  }
  if (bad_epochs_ > options_.patience) {
    bad_epochs_ = 0;
    const double reduced = std::max(current_lr * options_.factor, options_.min_lr);
    if (reduced < current_lr) ++reductions_;
    return reduced;
  }
  return current_lr;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace fanet
