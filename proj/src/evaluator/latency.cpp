#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "common/error.hpp"
#include "evaluator/evaluate.hpp"

namespace derm {
namespace {

double nearest_rank(const std::vector<double>& sorted, double q) {
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

}  // namespace

LatencyStats latency_benchmark(Scorer& scorer, std::span<const cv::Mat> samples, std::size_t repetitions) {
  if (samples.empty()) fail(ErrorCode::kInvalidArgument, "latency benchmark needs at least one sample");
  if (repetitions < kMinLatencyRepetitions) {
    fail(ErrorCode::kInvalidArgument, "insufficient repetitions: need at least " +
                                          std::to_string(kMinLatencyRepetitions) + ", got " +
                                          std::to_string(repetitions));
  }
  for (const auto& image : samples) (void)scorer.score(image);

  std::vector<double> timings;
  timings.reserve(samples.size() * repetitions);
  for (std::size_t r = 0; r < repetitions; ++r) {
    for (const auto& image : samples) {
      const auto start = std::chrono::steady_clock::now();
      (void)scorer.score(image);
      timings.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
  }
  LatencyStats stats;
  stats.samples = samples.size();
  stats.repetitions = repetitions;
  stats.mean_seconds = std::accumulate(timings.begin(), timings.end(), 0.0) / static_cast<double>(timings.size());
  std::sort(timings.begin(), timings.end());
  stats.p50_seconds = nearest_rank(timings, 0.50);
  stats.p95_seconds = nearest_rank(timings, 0.95);
  return stats;
}

}  // namespace derm
