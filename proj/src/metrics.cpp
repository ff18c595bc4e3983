#include "fanet/metrics.hpp"

#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace fanet {

namespace {

double ratio(std::int64_t num, std::int64_t den, std::int64_t errors) {
  if (den == 0) return errors == 0 ? 1.0 : 0.0;
  return static_cast<double>(num) / static_cast<double>(den);
}

const char* const kColumns[] = {"F1", "mIoU", "Recall", "Precision", "Specificity", "Accuracy", "F2"};

std::vector<std::string> row_cells(const ReportRow& row) {
  const auto& m = row.metrics;
  std::vector<std::string> cells{row.method};
  for (double v : {m.f1, row.miou, m.recall, m.precision, m.specificity, m.accuracy, m.f2}) {
    cells.push_back(format_metric(v));
  }
  cells.insert(cells.end(), row.extra.begin(), row.extra.end());
  return cells;
}

std::vector<std::string> header(const ReportTable& table) {
  std::vector<std::string> h{"method"};
  h.insert(h.end(), std::begin(kColumns), std::end(kColumns));
  h.insert(h.end(), table.extra_columns.begin(), table.extra_columns.end());
  return h;
}

void join(std::ostream& out, const std::vector<std::string>& cells, const char* sep, const char* open,
          const char* close) {
  out << open;
  for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? sep : "") << cells[i];
  out << close << '\n';
}

}  // namespace

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& target) {
  if (pred.height() != target.height() || pred.width() != target.width()) {
    throw ShapeError("confusion: prediction " + std::to_string(pred.height()) + "x" + std::to_string(pred.width()) +
                     " vs target " + std::to_string(target.height()) + "x" + std::to_string(target.width()));
  }
  ConfusionCounts c;
  const std::uint8_t* p = pred.data();
  const std::uint8_t* t = target.data();
  std::int64_t both = 0, pred_on = 0, target_on = 0;
  for (Index i = 0; i < pred.size(); ++i) {
    both += p[i] & t[i];
    pred_on += p[i];
    target_on += t[i];
  }
  c.tp = both;
  c.fp = pred_on - both;
  c.fn = target_on - both;
  c.tn = pred.size() - c.tp - c.fp - c.fn;
  return c;
}

MetricSuite metric_suite(const ConfusionCounts& c) {
  MetricSuite m;
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, c.fp + c.fn);
  m.iou = ratio(c.tp, c.tp + c.fp + c.fn, c.fp + c.fn);
  m.precision = ratio(c.tp, c.tp + c.fp, c.fn);
  m.recall = ratio(c.tp, c.tp + c.fn, c.fp);
  m.specificity = ratio(c.tn, c.tn + c.fp, c.fn);
  m.accuracy = ratio(c.tp + c.tn, c.total(), 0);
  m.f2 = ratio(5 * c.tp, 5 * c.tp + 4 * c.fn + c.fp, c.fp + c.fn);
  return m;
}

double background_iou(const ConfusionCounts& c) { return ratio(c.tn, c.tn + c.fp + c.fn, c.fp + c.fn); }

DatasetReport evaluate_dataset(const std::vector<BinaryMask>& predictions, const std::vector<BinaryMask>& targets,
                               const EvalOptions& options) {
  if (predictions.size() != targets.size()) {
    throw std::invalid_argument("evaluate_dataset: " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(targets.size()) + " targets");
  }
  if (predictions.empty()) throw std::invalid_argument("evaluate_dataset: no images");

  DatasetReport report;
  ConfusionCounts pooled;
  double miou_sum = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const ConfusionCounts c = confusion(predictions[i], targets[i]);
    const MetricSuite m = metric_suite(c);
    report.per_image_counts.push_back(c);
    report.per_image.push_back(m);
    pooled += c;
    miou_sum += options.miou == MiouMode::two_class ? 0.5 * (m.iou + background_iou(c)) : m.iou;
  }

  if (options.aggregation == Aggregation::pooled) {
    report.summary = metric_suite(pooled);
    report.miou = options.miou == MiouMode::two_class ? 0.5 * (report.summary.iou + background_iou(pooled))
                                                       : report.summary.iou;
    return report;
  }
  const double n = static_cast<double>(predictions.size());
  MetricSuite& s = report.summary;
  for (const auto& m : report.per_image) {
    s.f1 += m.f1;
    s.iou += m.iou;
    s.precision += m.precision;
    s.recall += m.recall;
    s.specificity += m.specificity;
    s.accuracy += m.accuracy;
    s.f2 += m.f2;
  }
  for (double* v : {&s.f1, &s.iou, &s.precision, &s.recall, &s.specificity, &s.accuracy, &s.f2}) *v /= n;
  report.miou = miou_sum / n;
  return report;
}

std::string to_string(Aggregation aggregation) {
  return aggregation == Aggregation::pooled ? "pooled" : "per_image";
}

Aggregation parse_aggregation(const std::string& text) {
  if (text == "per_image") return Aggregation::per_image;
  if (text == "pooled") return Aggregation::pooled;
  throw std::invalid_argument("unknown aggregation '" + text + "' (expected per_image or pooled)");
}

std::string to_string(MiouMode mode) { return mode == MiouMode::two_class ? "two_class" : "foreground"; }

MiouMode parse_miou_mode(const std::string& text) {
  if (text == "foreground") return MiouMode::foreground;
  if (text == "two_class") return MiouMode::two_class;
  throw std::invalid_argument("unknown miou mode '" + text + "' (expected foreground or two_class)");
}

std::string format_metric(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

void write_report_csv(std::ostream& out, const ReportTable& table) {
  join(out, header(table), ",", "", "");
  for (const auto& row : table.rows) join(out, row_cells(row), ",", "", "");
}

void write_report_markdown(std::ostream& out, const ReportTable& table) {
  const auto h = header(table);
  join(out, h, " | ", "| ", " |");
  join(out, std::vector<std::string>(h.size(), "---"), " | ", "| ", " |");
  for (const auto& row : table.rows) join(out, row_cells(row), " | ", "| ", " |");
}

void write_per_image_csv(std::ostream& out, const std::vector<std::string>& ids, const DatasetReport& report) {
  if (ids.size() != report.per_image.size()) throw std::invalid_argument("write_per_image_csv: id count mismatch");
  out << "sample_id,F1,mIoU,Recall,Precision,Specificity,Accuracy,F2\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& m = report.per_image[i];
    out << ids[i];
    for (double v : {m.f1, m.iou, m.recall, m.precision, m.specificity, m.accuracy, m.f2}) out << ',' << format_metric(v);
    out << '\n';
  }
}

}  // namespace fanet
