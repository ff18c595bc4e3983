#include "fanet/inference.hpp"

#include "fanet/otsu.hpp"
#include "fanet/training.hpp"

#include <ostream>
#include <stdexcept>

namespace fanet {

namespace {

Plane sample_plane(const Tensor4<float>& t, Index n) {
  return Eigen::Map<const Plane>(t.sample_data(n), t.height(), t.width());
}

}  // namespace

void InferenceOptions::validate() const {
  if (iterations < 1) throw std::invalid_argument("inference.iterations must be >= 1");
}

BinaryMask binarize(const Plane& probabilities, double threshold) {
  MaskArray out(probabilities.rows(), probabilities.cols());
  const auto t = static_cast<float>(threshold);
  for (Index i = 0; i < out.size(); ++i) out.data()[i] = probabilities.data()[i] >= t ? 1 : 0;
  return BinaryMask(std::move(out));
}

std::vector<RefinementTrace> iterative_predict_batch(FanetModel<float>& model, const std::vector<const Image*>& images,
                                                     const InferenceOptions& options,
                                                     const std::vector<const BinaryMask*>& ground_truth) {
  options.validate();
  if (images.empty()) return {};
  if (!ground_truth.empty() && ground_truth.size() != images.size()) {
    throw std::invalid_argument("iterative_predict: one ground-truth mask per image required");
  }
  const NetworkConfig& cfg = model.config();
  const Tensor4<float> batch = images_to_tensor(images);

  std::vector<RefinementTrace> traces(images.size());
  std::vector<BinaryMask> feed;
  for (std::size_t i = 0; i < images.size(); ++i) {
    traces[i].initial = otsu_mask(*images[i]);
    feed.push_back(traces[i].initial);
  }
  const std::vector<BinaryMask> none;
  for (int t = 0; t <= options.iterations; ++t) {
    const Tensor4<float> prob = model.forward(batch, cfg.uses_feedback() ? feed : none, nn::Pass::inference());
    for (std::size_t i = 0; i < images.size(); ++i) {
      auto& trace = traces[i];
      trace.probabilities.push_back(sample_plane(prob, static_cast<Index>(i)));
      trace.masks.push_back(binarize(trace.probabilities.back(), cfg.binarize_threshold));
      if (!ground_truth.empty()) trace.metrics.push_back(metric_suite(confusion(trace.masks.back(), *ground_truth[i])));
      if (t > 0 && !trace.converged_at && trace.masks[t] == trace.masks[t - 1]) trace.converged_at = t - 1;
      if (cfg.feedback_at_inference) feed[i] = trace.masks.back();
    }
  }
  return traces;
}

RefinementTrace iterative_predict(FanetModel<float>& model, const Image& image, const InferenceOptions& options,
                                  const BinaryMask* ground_truth) {
  options.validate();
  if (!options.early_stop) {
    std::vector<const BinaryMask*> gt;
    if (ground_truth) gt.push_back(ground_truth);
    return std::move(iterative_predict_batch(model, {&image}, options, gt).front());
  }
  // One step at a time so the loop can stop at a fixed point.
  const NetworkConfig& cfg = model.config();
  const std::vector<const Image*> images{&image};
  const Tensor4<float> batch = images_to_tensor(images);
  RefinementTrace trace;
  trace.initial = otsu_mask(image);
  BinaryMask feed = trace.initial;
  for (int t = 0; t <= options.iterations; ++t) {
    std::vector<BinaryMask> prev;
    if (cfg.uses_feedback()) prev.push_back(feed);
    const Tensor4<float> prob = model.forward(batch, prev, nn::Pass::inference());
    trace.probabilities.push_back(sample_plane(prob, 0));
    trace.masks.push_back(binarize(trace.probabilities.back(), cfg.binarize_threshold));
    if (ground_truth) trace.metrics.push_back(metric_suite(confusion(trace.masks.back(), *ground_truth)));
    if (cfg.feedback_at_inference) feed = trace.masks.back();
    if (t > 0 && trace.masks[t] == trace.masks[t - 1]) {
      trace.converged_at = t - 1;
      break;
    }
  }
  return trace;
}

std::vector<DatasetReport> iteration_reports(const std::vector<RefinementTrace>& traces,
                                             const std::vector<BinaryMask>& targets, const EvalOptions& options) {
  if (traces.empty()) return {};
  std::size_t length = traces.front().size();
  for (const auto& t : traces) length = std::min(length, t.size());
  std::vector<DatasetReport> out;
  for (std::size_t i = 0; i < length; ++i) {
    std::vector<BinaryMask> preds;
    for (const auto& t : traces) preds.push_back(t.masks[i]);
    out.push_back(evaluate_dataset(preds, targets, options));
  }
  return out;
}

void write_trace_csv(std::ostream& out, const std::vector<DatasetReport>& per_iteration) {
  out << "iteration,F1,mIoU,Recall,Precision,Specificity,Accuracy,F2\n";
  for (std::size_t i = 0; i < per_iteration.size(); ++i) {
    const auto& r = per_iteration[i];
    const auto& m = r.summary;
    out << i;
    for (double v : {m.f1, r.miou, m.recall, m.precision, m.specificity, m.accuracy, m.f2}) out << ',' << format_metric(v);
    out << '\n';
  }
}

}  // namespace fanet
