#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "modelzoo/score_vector.hpp"

namespace derm {

struct PredictionPair {
  std::string record_id;
  DiseaseLabel true_label = DiseaseLabel::kAcne;
  DiseaseLabel predicted_label = DiseaseLabel::kAcne;
  ScoreVector scores;

  // predicted_label = argmax(scores).
  static PredictionPair from_scores(std::string record_id, DiseaseLabel truth, const ScoreVector& scores);
};

using CountGrid = std::array<std::array<std::size_t, kNumLabels>, kNumLabels>;
using PercentGrid = std::array<std::array<double, kNumLabels>, kNumLabels>;

struct ConfusionMatrix {
  // counts[actual][predicted]
  CountGrid counts{};
  // One decimal per cell; see row_percentages_for.
  PercentGrid row_percentages{};
  // False marks a "no samples" row (all percentages zero).
  std::array<bool, kNumLabels> has_samples{};

  std::size_t row_total(DiseaseLabel actual) const;
  std::size_t total() const;
  std::size_t trace() const;
};

// Percentages of one row in tenths of a percent, apportioned by largest
// remainder so the row sums to exactly 100.0 and every cell is the exact
// value rounded up or down to one decimal. Ties go to the lower index.
std::array<double, kNumLabels> row_percentages_for(const std::array<std::size_t, kNumLabels>& row);

// Throws kInvalidArgument on empty input.
ConfusionMatrix confusion_matrix(std::span<const PredictionPair> pairs);
ConfusionMatrix confusion_from_counts(const CountGrid& counts);

// correct / total (micro average).
double top1_accuracy(std::span<const PredictionPair> pairs);
// Mean of per-class recall over classes that have samples.
double macro_accuracy(const ConfusionMatrix& matrix);
std::array<double, kNumLabels> per_class_accuracy(const ConfusionMatrix& matrix);

std::string render_confusion(const ConfusionMatrix& matrix);

}  // namespace derm
