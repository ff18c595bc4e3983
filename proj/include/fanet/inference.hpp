#ifndef FANET_INFERENCE_HPP
#define FANET_INFERENCE_HPP

#include "fanet/fanet.hpp"
#include "fanet/image.hpp"
#include "fanet/metrics.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace fanet {

struct InferenceOptions {
  int iterations = 10;
  /// Stop as soon as a refinement reproduces its input mask (unbatched only).
  bool early_stop = false;

  void validate() const;
  bool operator==(const InferenceOptions&) const = default;
};

/// Entry 0 is the prediction seeded with the Otsu mask; entry t + 1 is the
/// prediction fed with mask t.
struct RefinementTrace {
  BinaryMask initial;  // the Otsu seed
  std::vector<Plane> probabilities;
  std::vector<BinaryMask> masks;
  std::vector<MetricSuite> metrics;  // per entry, when ground truth was given
  std::optional<int> converged_at;   // first t with masks[t + 1] == masks[t]

  std::size_t size() const { return masks.size(); }
  const BinaryMask& final_mask() const { return masks.back(); }
};

/// 1 where p >= threshold.
BinaryMask binarize(const Plane& probabilities, double threshold = 0.5);

/// Runs the iterative refinement with batch norm on running statistics.
/// When the model's config disables feedback at inference, every entry is
/// fed the Otsu seed instead of the previous prediction. Throws
/// std::invalid_argument for fewer than one iteration.
RefinementTrace iterative_predict(FanetModel<float>& model, const Image& image, const InferenceOptions& options = {},
                                  const BinaryMask* ground_truth = nullptr);

/// The same refinement for several images at once, in lockstep; early
/// stopping is not applied.
std::vector<RefinementTrace> iterative_predict_batch(FanetModel<float>& model, const std::vector<const Image*>& images,
                                                     const InferenceOptions& options = {},
                                                     const std::vector<const BinaryMask*>& ground_truth = {});

/// Dataset metrics at every iteration: row t aggregates masks[t] of every trace.
std::vector<DatasetReport> iteration_reports(const std::vector<RefinementTrace>& traces,
                                             const std::vector<BinaryMask>& targets, const EvalOptions& options = {});

/// CSV with columns iteration, F1, mIoU, Recall, Precision, Specificity,
/// Accuracy, F2.
void write_trace_csv(std::ostream& out, const std::vector<DatasetReport>& per_iteration);

}  // namespace fanet

#endif  // FANET_INFERENCE_HPP
