#include <cmath>

#include "adagtcn/errors.hpp"
#include "adagtcn/harness.hpp"

namespace adagtcn {

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw ConfigError("compute_metrics: prediction/label sizes disagree or empty");
  }
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred = predictions[i] == 1;
    const bool truth = labels[i] == 1;
    if (pred && truth) ++tp;
    if (pred && !truth) ++fp;
    if (!pred && truth) ++fn;
    if (!pred && !truth) ++tn;
  }
  const double total = static_cast<double>(predictions.size());

  Metrics m;
  m.accuracy = static_cast<double>(tp + tn) / total;
  m.precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);

  // micro-F1 pools per-class counts: micro-precision = micro-recall =
  // (tp + tn) / total in the single-label binary setting.
  const double micro_tp = static_cast<double>(tp + tn);
  const double micro_fp = static_cast<double>(fp + fn);
  const double micro_fn = static_cast<double>(fn + fp);
  const double denom = 2.0 * micro_tp + micro_fp + micro_fn;
  m.micro_f1 = denom == 0.0 ? 0.0 : 2.0 * micro_tp / denom;
  return m;
}

MetricsReport summarize_repetitions(const std::vector<Metrics>& repetitions) {
  if (repetitions.empty()) throw ConfigError("summarize_repetitions: no repetitions");
  MetricsReport report;
  report.per_repetition = repetitions;
  const double n = static_cast<double>(repetitions.size());

  const auto accumulate = [&](auto member) {
    double mean = 0.0;
    for (const Metrics& m : repetitions) mean += m.*member;
    mean /= n;
    double var = 0.0;
    for (const Metrics& m : repetitions) var += (m.*member - mean) * (m.*member - mean);
    return std::make_pair(mean, std::sqrt(var / n));
  };

  std::tie(report.mean.accuracy, report.stddev.accuracy) = accumulate(&Metrics::accuracy);
  std::tie(report.mean.precision, report.stddev.precision) = accumulate(&Metrics::precision);
  std::tie(report.mean.recall, report.stddev.recall) = accumulate(&Metrics::recall);
  std::tie(report.mean.micro_f1, report.stddev.micro_f1) = accumulate(&Metrics::micro_f1);
  return report;
}

}  // namespace adagtcn
