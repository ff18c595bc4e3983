#ifndef FANET_TESTS_GRADCHECK_HPP
#define FANET_TESTS_GRADCHECK_HPP

// Whole-network finite-difference check of the combined loss.

#include "fanet/fanet.hpp"
#include "fanet/loss.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <random>
#include <string>
#include <vector>

namespace fanet::oracle {

struct GradcheckEntry {
  std::string name;
  Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  int resampled = 0;  // draws whose perturbation flipped a hard gate
  double max_rel_error = 0.0;
};

// Parameters behind the binarised attention map receive no gradient by design.
inline bool on_differentiable_path(const std::string& name) {
  return name.find(".attention.") == std::string::npos && name.find(".attention_logit.") == std::string::npos;
}

inline std::vector<std::vector<BinaryMask>> gate_snapshot(FanetModel<double>& model) {
  std::vector<std::vector<BinaryMask>> out;
  for (auto* mix : model.mixpool_blocks()) out.push_back(mix->intermediates().attention);
  return out;
}

/// Samples `count` parameter entries uniformly over the differentiable
/// trainable scalars and compares the analytic gradient with central
/// differences of step `h`. Batch norm runs on batch statistics throughout.
inline GradcheckReport gradcheck_model(FanetModel<double>& model, const Tensor4<double>& images,
                                       const std::vector<BinaryMask>& prev_masks, const Tensor4<double>& target,
                                       int count, std::uint64_t seed, double h = 1e-5, double floor = 1e-8) {
  for (auto* mix : model.mixpool_blocks()) mix->keep_intermediates = true;
  const nn::Pass probe{true, false};

  model.zero_grad();
  const Tensor4<double> pred = model.forward(images, prev_masks, nn::Pass::training());
  const auto loss = combined_loss(pred, target, 1.0, true);
  model.backward(loss.grad);
  const auto base_gates = gate_snapshot(model);

  std::vector<nn::Param<double>*> pool;
  std::vector<Index> offsets{0};
  for (auto* p : model.trainable_parameters()) {
    if (!on_differentiable_path(p->name)) continue;
    pool.push_back(p);
    offsets.push_back(offsets.back() + p->size());
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(0, offsets.back() - 1);

  GradcheckReport report;
  while (static_cast<int>(report.entries.size()) < count) {
    const Index flat = pick(rng);
    const auto slot = std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin() - 1;
    nn::Param<double>& p = *pool[slot];
    const Index i = flat - offsets[slot];
    const double saved = p.value.data()[i];

    p.value.data()[i] = saved + h;
    const double plus = combined_loss(model.forward(images, prev_masks, probe), target).total;
    const bool plus_same = gate_snapshot(model) == base_gates;
    p.value.data()[i] = saved - h;
    const double minus = combined_loss(model.forward(images, prev_masks, probe), target).total;
    const bool minus_same = gate_snapshot(model) == base_gates;
    p.value.data()[i] = saved;
    if (!plus_same || !minus_same) {
      ++report.resampled;
      continue;
    }
    GradcheckEntry e{p.name, i, p.grad.data()[i], (plus - minus) / (2 * h), 0.0};
    e.rel_error = relative_error(e.analytic, e.numeric, floor);
    report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace fanet::oracle

#endif  // FANET_TESTS_GRADCHECK_HPP
