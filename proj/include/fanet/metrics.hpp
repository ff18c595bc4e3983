#ifndef FANET_METRICS_HPP
#define FANET_METRICS_HPP

#include "fanet/mask.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace fanet {

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Pixel counts of `pred` against `target`; throws ShapeError on size mismatch.
ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& target);

/// Ratios from confusion counts. A ratio whose denominator is zero is 1 when
/// the corresponding error count is also zero (nothing to get wrong) and 0
/// otherwise; for f1, iou and f2 this means empty-vs-empty scores 1.
struct MetricSuite {
  double f1 = 0, iou = 0, precision = 0, recall = 0, specificity = 0, accuracy = 0, f2 = 0;
};
MetricSuite metric_suite(const ConfusionCounts& counts);

/// IoU of the background class, with the same degenerate-case convention.
double background_iou(const ConfusionCounts& counts);

enum class Aggregation { per_image, pooled };
enum class MiouMode { foreground, two_class };

struct EvalOptions {
  Aggregation aggregation = Aggregation::per_image;
  MiouMode miou = MiouMode::foreground;
};

struct DatasetReport {
  std::vector<ConfusionCounts> per_image_counts;
  std::vector<MetricSuite> per_image;
  MetricSuite summary;  // mean over images, or pooled counts
  double miou = 0;
};

/// Aligned predictions and targets; throws std::invalid_argument when the
/// counts differ or the list is empty.
DatasetReport evaluate_dataset(const std::vector<BinaryMask>& predictions, const std::vector<BinaryMask>& targets,
                               const EvalOptions& options = {});

std::string to_string(Aggregation aggregation);
Aggregation parse_aggregation(const std::string& text);
std::string to_string(MiouMode mode);
MiouMode parse_miou_mode(const std::string& text);

/// Fixed four-decimal rendering used in every report.
std::string format_metric(double value);

struct ReportRow {
  std::string method;
  MetricSuite metrics;
  double miou = 0;
  std::vector<std::string> extra;  // values for ReportTable::extra_columns
};

struct ReportTable {
  std::vector<std::string> extra_columns;
  std::vector<ReportRow> rows;
};

/// Columns: method, F1, mIoU, Recall, Precision, Specificity, Accuracy, F2,
/// then any extra columns.
void write_report_csv(std::ostream& out, const ReportTable& table);
void write_report_markdown(std::ostream& out, const ReportTable& table);

/// One line per image: id, F1, mIoU (foreground IoU), Recall, Precision,
/// Specificity, Accuracy, F2.
void write_per_image_csv(std::ostream& out, const std::vector<std::string>& ids, const DatasetReport& report);

}  // namespace fanet

#endif  // FANET_METRICS_HPP
