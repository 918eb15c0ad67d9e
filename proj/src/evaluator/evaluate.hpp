#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "corpus/manifest.hpp"
#include "evaluator/confusion.hpp"
#include "modelzoo/score_vector.hpp"

namespace derm {

struct LatencyStats {
  double mean_seconds = 0.0;
  double p50_seconds = 0.0;
  double p95_seconds = 0.0;
  std::size_t samples = 0;
  std::size_t repetitions = 0;
  std::string device = "CPU";
};

inline constexpr std::size_t kMinLatencyRepetitions = 3;

// Serial, batch size 1. One discarded warm-up pass over the samples, then
// `repetitions` timed passes. Percentiles use the nearest-rank rule over
// all timed calls.
LatencyStats latency_benchmark(Scorer& scorer, std::span<const cv::Mat> samples, std::size_t repetitions);

struct EvalFailure {
  std::string record_id;
  std::string path;
  std::string reason;
};

struct EvalOptions {
  std::string network;
  std::string model_digest;
  // Images timed by the latency harness (first N decodable test images).
  std::size_t latency_samples = 5;
  std::size_t latency_repetitions = kMinLatencyRepetitions;
};

struct EvalReport {
  std::string network;
  std::string model_digest;
  double top1_accuracy = 0.0;   // micro average
  double macro_accuracy = 0.0;  // mean per-class recall
  std::array<double, kNumLabels> per_class_accuracy{};
  ConfusionMatrix confusion;
  LatencyStats latency;
  std::size_t evaluated = 0;
  std::vector<EvalFailure> failures;
  std::vector<PredictionPair> predictions;
};

// One forward pass per TEST record. Undecodable images are recorded as
// failures and excluded from every denominator.
EvalReport evaluate(Scorer& scorer, const std::vector<ImageRecord>& test_records, const EvalOptions& options = {});

std::string render_eval_report(const EvalReport& report);
void write_eval_report(const std::filesystem::path& path, const EvalReport& report);

// The machine-readable part of a written report (predictions omitted).
EvalReport read_eval_report(const std::filesystem::path& path);

struct ComparisonEntry {
  std::string network;
  std::string strategy;
  double validation_accuracy = 0.0;  // fraction
  double training_minutes = 0.0;
  std::optional<double> test_top1;  // fraction
};

struct ComparisonTable {
  std::vector<ComparisonEntry> rows;

  std::string to_text() const;
  // Tab-separated with a header row.
  std::string to_tsv() const;
};

// Rows sorted by validation accuracy, highest first; ties keep input order.
ComparisonTable compare_runs(std::vector<ComparisonEntry> entries);

}  // namespace derm
