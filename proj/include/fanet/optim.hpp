#ifndef FANET_OPTIM_HPP
#define FANET_OPTIM_HPP

#include "fanet/nn/layers.hpp"

#include <limits>
#include <vector>

namespace fanet {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are allocated lazily to match the
/// parameter list handed to step().
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(const nn::ParamList<Scalar>& params);

  double learning_rate() const { return options_.learning_rate; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  long steps() const { return steps_; }

  /// First and second moments, one pair per parameter, same order as step().
  std::vector<MatrixR<Scalar>>& first_moments() { return m_; }
  std::vector<MatrixR<Scalar>>& second_moments() { return v_; }
  void set_steps(long steps) { steps_ = steps; }

 private:
  AdamOptions options_;
  long steps_ = 0;
  std::vector<MatrixR<Scalar>> m_, v_;
};

struct PlateauOptions {
  double factor = 0.1;
  int patience = 5;
  double min_lr = 1e-7;
  /// Relative improvement needed to count as better.
  double threshold = 1e-4;
};

/// Learning-rate reduction on a stalled metric (lower is better). After more
/// than `patience` consecutive epochs without improvement the rate is
/// multiplied by `factor` (floored at `min_lr`) and the counter restarts.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(PlateauOptions options = {}) : options_(options) {}

  /// Returns the learning rate to use from the next epoch on.
  double step(double metric, double current_lr);

  int bad_epochs() const { return bad_epochs_; }
  double best() const { return best_; }
  int reductions() const { return reductions_; }

 private:
  PlateauOptions options_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
  int reductions_ = 0;
};

}  // namespace fanet

#endif  // FANET_OPTIM_HPP
