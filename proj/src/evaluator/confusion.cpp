#include "evaluator/confusion.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "common/error.hpp"

namespace derm {

PredictionPair PredictionPair::from_scores(std::string record_id, DiseaseLabel truth, const ScoreVector& scores) {
  return {std::move(record_id), truth, scores.argmax(), scores};
}

std::size_t ConfusionMatrix::row_total(DiseaseLabel actual) const {
  const auto& row = counts[index_of(actual)];
  return std::accumulate(row.begin(), row.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (auto label : kAllLabels) n += row_total(label);
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < kNumLabels; ++i) n += counts[i][i];
  return n;
}

std::array<double, kNumLabels> row_percentages_for(const std::array<std::size_t, kNumLabels>& row) {
  std::array<double, kNumLabels> out{};
  const auto total = std::accumulate(row.begin(), row.end(), std::size_t{0});
  if (total == 0) return out;

  // Exact arithmetic in units of 1/total tenths: cell i is 1000*c/total.
  std::array<std::size_t, kNumLabels> tenths{};
  std::array<std::size_t, kNumLabels> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    tenths[i] = 1000 * row[i] / total;
    remainder[i] = 1000 * row[i] % total;
    assigned += tenths[i];
  }
  std::array<std::size_t, kNumLabels> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < 1000; ++k) {
    ++tenths[order[k]];
    ++assigned;
  }
  for (std::size_t i = 0; i < kNumLabels; ++i) out[i] = static_cast<double>(tenths[i]) / 10.0;
  return out;
}

ConfusionMatrix confusion_from_counts(const CountGrid& counts) {
  ConfusionMatrix m;
  m.counts = counts;
  for (std::size_t a = 0; a < kNumLabels; ++a) {
    m.row_percentages[a] = row_percentages_for(counts[a]);
    m.has_samples[a] = m.row_total(label_at(a)) > 0;
  }
  return m;
}

ConfusionMatrix confusion_matrix(std::span<const PredictionPair> pairs) {
  if (pairs.empty()) fail(ErrorCode::kInvalidArgument, "confusion matrix of an empty prediction set");
  CountGrid counts{};
  for (const auto& p : pairs) ++counts[index_of(p.true_label)][index_of(p.predicted_label)];
  return confusion_from_counts(counts);
}

double top1_accuracy(std::span<const PredictionPair> pairs) {
  if (pairs.empty()) fail(ErrorCode::kInvalidArgument, "top-1 accuracy of an empty prediction set");
  std::size_t correct = 0;
  for (const auto& p : pairs) correct += p.true_label == p.predicted_label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

std::array<double, kNumLabels> per_class_accuracy(const ConfusionMatrix& m) {
  std::array<double, kNumLabels> out{};
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    const auto n = m.row_total(label_at(i));
    out[i] = n ? static_cast<double>(m.counts[i][i]) / static_cast<double>(n) : 0.0;
  }
  return out;
}

double macro_accuracy(const ConfusionMatrix& m) {
  const auto per_class = per_class_accuracy(m);
  double sum = 0.0;
  std::size_t classes = 0;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (!m.has_samples[i]) continue;
    sum += per_class[i];
    ++classes;
  }
  return classes ? sum / static_cast<double>(classes) : 0.0;
}

std::string render_confusion(const ConfusionMatrix& m) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-18s", "Actual \\ Predicted");
  out << buf;
  for (auto label : kAllLabels) {
    const auto name = to_string(label);
    std::snprintf(buf, sizeof(buf), " %10.10s", std::string(name).c_str());
    out << buf;
  }
  out << '\n';
  for (auto actual : kAllLabels) {
    const auto a = index_of(actual);
    std::snprintf(buf, sizeof(buf), "%-18s", std::string(to_string(actual)).c_str());
    out << buf;
    for (std::size_t p = 0; p < kNumLabels; ++p) {
      std::snprintf(buf, sizeof(buf), " %9.1f%%", m.row_percentages[a][p]);
      out << buf;
    }
    if (!m.has_samples[a]) out << "  (no samples)";
    out << '\n';
  }
  return out.str();
}

}  // namespace derm
