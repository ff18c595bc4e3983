#include <doctest.h>

#include "fanet/loss.hpp"
#include "fanet/optim.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace fanet;

namespace {

Tensor4<double> half_target(Index h, Index w) {
  Tensor4<double> t(1, 1, h, w);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = i % 2;
  return t;
}

Tensor4<double> masks_to_tensor_like(const BinaryMask& m, Index batch = 1) {
  // Splits a tall mask into `batch` equal samples.
  const Index h = m.height() / batch;
  Tensor4<double> t(batch, 1, h, m.width());
  for (Index n = 0; n < batch; ++n)
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < m.width(); ++x) t(n, 0, y, x) = m(n * h + y, x);
  return t;
}

Tensor4<double> constant(Shape4 s, double v) {
  Tensor4<double> t(s);
  t.values().setConstant(v);
  return t;
}

}  // namespace

TEST_CASE("dice loss examples") {
  std::mt19937_64 rng(1);
  for (double p : {0.05, 0.3, 0.8}) {
    const auto target = masks_to_tensor_like(oracle::random_mask(16, 16, rng, p));
    CHECK(dice_loss(target, target) == doctest::Approx(0.0).epsilon(1e-15));
  }
  Tensor4<double> pred(1, 1, 100, 100), target(1, 1, 100, 100);
  pred.values().head(5000).setOnes();
  target.values().tail(5000).setOnes();
  CHECK(dice_loss(pred, target) == doctest::Approx(1.0 - 1.0 / 10001.0));
  CHECK(dice_loss(constant({1, 1, 8, 8}, 0.5), half_target(8, 8), 1e-8) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK_THROWS(dice_loss(pred, half_target(8, 8)));
}

TEST_CASE("combined loss examples") {
  const auto target = half_target(8, 8);
  const auto r = combined_loss(constant(target.shape(), 0.5), target);
  CHECK(r.bce == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(r.dice == doctest::Approx(1.0 - 33.0 / 65.0).epsilon(1e-12));
  CHECK(r.total == doctest::Approx(std::log(2.0) + 1.0 - 33.0 / 65.0));
  // With negligible smoothing the total approaches ln 2 + 0.5.
  CHECK(combined_loss(constant(target.shape(), 0.5), target, 1e-8).total == doctest::Approx(1.1931).epsilon(1e-4));

  const double eps = 1e-6;
  Tensor4<double> near(target.shape());
  for (Index i = 0; i < near.size(); ++i) near.data()[i] = target.data()[i] > 0 ? 1 - eps : eps;
  const double total = combined_loss(near, target, 1.0, false, 1e-7).total;
  CHECK(total >= 0);
  CHECK(total <= 2 * eps * std::log(1 / eps) + 10 * eps);
}

TEST_CASE("combined loss gradient matches finite differences on a 4x4 case") {
  std::mt19937_64 rng(2);
  const auto pred = oracle::random_tensor<double>({1, 1, 4, 4}, rng, 0.05, 0.95);
  const auto target = masks_to_tensor_like(oracle::random_mask(4, 4, rng));
  const auto r = combined_loss(pred, target, 1.0, true);
  const double h = 1e-7;
  for (Index i = 0; i < pred.size(); ++i) {
    auto p = pred, m = pred;
    p.data()[i] += h;
    m.data()[i] -= h;
    const double fd = (combined_loss(p, target).total - combined_loss(m, target).total) / (2 * h);
    CHECK(oracle::relative_error(r.grad.data()[i], fd) < 1e-6);
  }
}

TEST_CASE("loss is non-negative, bounded and permutation invariant") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pred = oracle::random_tensor<double>({2, 1, 6, 6}, rng, 0.0, 1.0);
    const auto target = masks_to_tensor_like(oracle::random_mask(12, 6, rng, trial / 200.0), 2);
    const auto r = combined_loss(pred, target);
    REQUIRE(r.total >= 0);
    REQUIRE(r.dice >= 0);
    REQUIRE(r.dice < 1);
    std::vector<Index> perm(pred.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor4<double> pp(pred.shape()), tp(target.shape());
    for (Index i = 0; i < pred.size(); ++i) {
      pp.data()[i] = pred.data()[perm[i]];
      tp.data()[i] = target.data()[perm[i]];
    }
    REQUIRE(combined_loss(pp, tp).total == doctest::Approx(r.total).epsilon(1e-12));
  }
}

TEST_CASE("adam matches a hand-rolled reference update") {
  nn::Param<double> p{"p", {3}, MatrixR<double>(3, 1), MatrixR<double>(3, 1), true};
  p.value << 1.0, -2.0, 0.5;
  Adam<double> adam(AdamOptions{0.01, 0.9, 0.999, 1e-8});
  Eigen::Vector3d x(1.0, -2.0, 0.5), m = Eigen::Vector3d::Zero(), v = Eigen::Vector3d::Zero();
  for (int t = 1; t <= 5; ++t) {
    const Eigen::Vector3d g = 2 * x + Eigen::Vector3d::Constant(0.1 * t);
    p.grad = g;
    adam.step({&p});
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g.cwiseProduct(g);
    const Eigen::Vector3d mh = m / (1 - std::pow(0.9, t));
    const Eigen::Vector3d vh = v / (1 - std::pow(0.999, t));
    x.array() -= 0.01 * mh.array() / (vh.array().sqrt() + 1e-8);
    CHECK((p.value.col(0) - x).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK(adam.steps() == 5);
}

TEST_CASE("plateau scheduler reduces once after patience + 1 flat epochs") {
  PlateauScheduler sched(PlateauOptions{0.1, 5, 1e-7, 1e-4});
  double lr = 1e-3;
  lr = sched.step(1.0, lr);  // first value becomes the best
  for (int e = 0; e < 5; ++e) {
    lr = sched.step(1.0, lr);
    CHECK(lr == 1e-3);
  }
  lr = sched.step(1.0, lr);
  CHECK(lr == doctest::Approx(1e-4));
  CHECK(sched.reductions() == 1);
  for (int e = 0; e < 5; ++e) lr = sched.step(1.0, lr);
  CHECK(sched.reductions() == 1);
  CHECK(sched.step(0.5, lr) == lr);
  CHECK(sched.bad_epochs() == 0);
}

TEST_CASE("plateau scheduler respects the floor and the relative threshold") {
  PlateauScheduler sched(PlateauOptions{0.1, 0, 1e-7, 1e-4});
  double lr = 1e-6;
  lr = sched.step(1.0, lr);
  lr = sched.step(0.99995, lr);  // below the relative threshold: not an improvement
  CHECK(lr == doctest::Approx(1e-7));
  lr = sched.step(1.0, lr);
  CHECK(lr == doctest::Approx(1e-7));
}
