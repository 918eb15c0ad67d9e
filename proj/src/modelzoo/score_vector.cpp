#include "modelzoo/score_vector.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace derm {

std::vector<std::pair<DiseaseLabel, double>> ScoreVector::ranked() const {
  std::vector<std::pair<DiseaseLabel, double>> out;
  out.reserve(kNumLabels);
  for (auto label : kAllLabels) out.emplace_back(label, probabilities[index_of(label)]);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

ScoreVector ScoreVector::uniform() {
  ScoreVector s;
  s.probabilities.fill(1.0 / static_cast<double>(kNumLabels));
  return s;
}

ScoreVector ScoreVector::from_logits(std::span<const double> logits) {
  if (logits.size() != kNumLabels) {
    fail(ErrorCode::kInvalidArgument, "expected " + std::to_string(kNumLabels) + " logits, got " +
                                          std::to_string(logits.size()));
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(peak)) fail(ErrorCode::kNumerical, "non-finite logits");
  ScoreVector s;
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    s.probabilities[i] = std::exp(logits[i] - peak);
    sum += s.probabilities[i];
  }
  for (auto& p : s.probabilities) p /= sum;
  return s;
}

}  // namespace derm
