#pragma once

// Confusion-matrix evaluation: per-class precision/recall/F1 and the
// class-proportion-weighted F1 score.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace arn {

struct MetricsReport {
  int classes = 0;
  std::vector<std::int64_t> confusion;  // [K*K], rows = true, cols = predicted
  std::vector<double> precision;        // per class; 0/0 -> 0
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<double> weight;  // N_g / N_total (0 for absent classes)
  double weighted_f1 = 0.0;

  std::int64_t at(int true_class, int predicted) const {
    return confusion[static_cast<std::size_t>(true_class) * classes + predicted];
  }
};

/// Entry [i,j] counts samples with true class i predicted j.
std::vector<std::int64_t> confusion_matrix(std::span<const int> true_labels,
                                           std::span<const int> predicted_labels, int classes);

/// p = diag/col-sum, r = diag/row-sum, f1 = 2pr/(p+r); any 0/0 -> 0.
MetricsReport per_class_prf(const std::vector<std::int64_t>& confusion, int classes);

/// F_w = sum_g w_g * 2 p_g r_g / (p_g + r_g), w_g = row-sum_g / total.
double weighted_f1(const std::vector<std::int64_t>& confusion, int classes);

/// Full report from labels.
MetricsReport evaluate_labels(std::span<const int> true_labels,
                              std::span<const int> predicted_labels, int classes);

/// Key-value header plus a row-per-line confusion block; parse inverts it.
void write_report(std::ostream& os, const MetricsReport& report);
MetricsReport parse_report(std::istream& is);

}  // namespace arn
