#include "arn/metrics.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "arn/tensor.hpp"

namespace arn {

std::vector<std::int64_t> confusion_matrix(std::span<const int> true_labels,
                                           std::span<const int> predicted_labels, int classes) {
  if (true_labels.size() != predicted_labels.size())
    throw ShapeError("confusion_matrix: label vectors differ in length");
  if (classes < 1) throw ConfigError("confusion_matrix: class count must be positive");
  std::vector<std::int64_t> m(static_cast<std::size_t>(classes) * classes, 0);
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const int t = true_labels[i], p = predicted_labels[i];
    if (t < 0 || t >= classes || p < 0 || p >= classes)
      throw ConfigError("confusion_matrix: label out of range at index " + std::to_string(i));
    ++m[static_cast<std::size_t>(t) * classes + p];
  }
  return m;
}

MetricsReport per_class_prf(const std::vector<std::int64_t>& confusion, int classes) {
  if (confusion.size() != static_cast<std::size_t>(classes) * classes)
    throw ShapeError("per_class_prf: confusion matrix size does not match class count");
  MetricsReport r;
  r.classes = classes;
  r.confusion = confusion;
  r.precision.assign(classes, 0.0);
  r.recall.assign(classes, 0.0);
  r.f1.assign(classes, 0.0);
  r.weight.assign(classes, 0.0);

  std::int64_t total = 0;
  for (auto v : confusion) {
    if (v < 0) throw NumericError("per_class_prf: negative confusion count");
    total += v;
  }
  if (total == 0) throw ConfigError("per_class_prf: empty confusion matrix");

  for (int g = 0; g < classes; ++g) {
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < classes; ++j) {
      row += confusion[static_cast<std::size_t>(g) * classes + j];
      col += confusion[static_cast<std::size_t>(j) * classes + g];
    }
    const auto diag = static_cast<double>(confusion[static_cast<std::size_t>(g) * classes + g]);
    r.precision[g] = col > 0 ? diag / static_cast<double>(col) : 0.0;
    r.recall[g] = row > 0 ? diag / static_cast<double>(row) : 0.0;
    const double pr = r.precision[g] + r.recall[g];
    r.f1[g] = pr > 0.0 ? 2.0 * r.precision[g] * r.recall[g] / pr : 0.0;
    r.weight[g] = static_cast<double>(row) / static_cast<double>(total);
  }
  double fw = 0.0;
  for (int g = 0; g < classes; ++g) fw += r.weight[g] * r.f1[g];
  r.weighted_f1 = fw;
  return r;
}

double weighted_f1(const std::vector<std::int64_t>& confusion, int classes) {
  return per_class_prf(confusion, classes).weighted_f1;
}

MetricsReport evaluate_labels(std::span<const int> true_labels,
                              std::span<const int> predicted_labels, int classes) {
  return per_class_prf(confusion_matrix(true_labels, predicted_labels, classes), classes);
}

void write_report(std::ostream& os, const MetricsReport& r) {
  os << "classes=" << r.classes << '\n';
  os << std::setprecision(17);
  os << "weighted_f1=" << r.weighted_f1 << '\n';
  for (int g = 0; g < r.classes; ++g)
    os << "class_" << g << "= p " << r.precision[g] << " r " << r.recall[g] << " f1 " << r.f1[g]
       << " w " << r.weight[g] << '\n';
  os << "confusion:\n";
  for (int i = 0; i < r.classes; ++i) {
    for (int j = 0; j < r.classes; ++j) {
      if (j) os << ' ';
      os << r.at(i, j);
    }
    os << '\n';
  }
}

MetricsReport parse_report(std::istream& is) {
  std::string line;
  int classes = -1;
  while (std::getline(is, line)) {
    if (line.rfind("classes=", 0) == 0) {
      classes = std::stoi(line.substr(8));
    } else if (line == "confusion:") {
      break;
    }
  }
  if (classes < 1) throw IoError("parse_report: missing classes header");
  std::vector<std::int64_t> m;
  m.reserve(static_cast<std::size_t>(classes) * classes);
  for (int i = 0; i < classes; ++i) {
    if (!std::getline(is, line)) throw IoError("parse_report: truncated confusion block");
    std::istringstream row(line);
    std::int64_t v;
    for (int j = 0; j < classes; ++j) {
      if (!(row >> v)) throw IoError("parse_report: bad confusion row " + std::to_string(i));
      m.push_back(v);
    }
  }
  return per_class_prf(m, classes);
}

}  // namespace arn
