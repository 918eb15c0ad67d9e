#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>

#include "corpus/labels.hpp"

namespace derm {

// Softmax output of one forward pass, indexed by canonical label order.
struct ScoreVector {
  std::array<double, kNumLabels> probabilities{};

  // Highest probability; ties resolve to the lowest canonical index.
  DiseaseLabel argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < kNumLabels; ++i) {
      if (probabilities[i] > probabilities[best]) best = i;
    }
    return label_at(best);
  }

  double operator[](DiseaseLabel label) const { return probabilities[index_of(label)]; }

  // Labels with their scores, highest first (stable on ties).
  std::vector<std::pair<DiseaseLabel, double>> ranked() const;

  static ScoreVector uniform();
  // Numerically stable softmax computed in double precision.
  static ScoreVector from_logits(std::span<const double> logits);
};

// Anything that turns a decoded image into scores: a model handle, or a stub
// in tests and benchmarks.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual ScoreVector score(const cv::Mat& bgr_image) = 0;
};

}  // namespace derm
