#include "trainer/loss.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace derm {

double cross_entropy_loss(const ScoreVector& scores, DiseaseLabel true_label) {
  const double p = scores[true_label];
  if (std::isnan(p)) fail(ErrorCode::kNumerical, "score vector contains NaN");
  return -std::log(std::max(p, kProbabilityFloor));
}

double cross_entropy_loss(std::span<const std::pair<ScoreVector, DiseaseLabel>> batch) {
  if (batch.empty()) fail(ErrorCode::kInvalidArgument, "cross-entropy of an empty batch");
  double sum = 0.0;
  for (const auto& [scores, label] : batch) sum += cross_entropy_loss(scores, label);
  return sum / static_cast<double>(batch.size());
}

}  // namespace derm
