#pragma once

#include <span>
#include <utility>

#include "modelzoo/score_vector.hpp"

namespace derm {

// Probabilities below this are clamped before the log, so the loss of a
// confidently wrong prediction is -log(1e-12) ~= 27.63 rather than infinity.
inline constexpr double kProbabilityFloor = 1e-12;

double cross_entropy_loss(const ScoreVector& scores, DiseaseLabel true_label);

// Mean over the batch; throws on an empty batch.
double cross_entropy_loss(std::span<const std::pair<ScoreVector, DiseaseLabel>> batch);

}  // namespace derm
