#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace derm {

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double epoch_seconds = 0.0;
  double learning_rate = 0.0;

  bool operator==(const EpochMetrics&) const = default;
};

// `epoch=3<TAB>train_loss=...<TAB>...`, values in shortest round-trip form.
// Without timing the line is a pure function of the training trajectory.
std::string format_epoch_line(const EpochMetrics& m, bool include_timing = true);
EpochMetrics parse_epoch_line(const std::string& line);

// One row of the network / strategy / validation / minutes comparison.
struct RunSummary {
  std::string run_name;
  std::string network;
  std::string strategy;
  double validation_accuracy = 0.0;  // fraction
  double total_minutes = 0.0;
  int best_epoch = 0;
  bool stopped_early = false;
  // "single_split" or "cv_mean"
  std::string evaluation = "single_split";
  std::string checkpoint;
};

void write_run_summary(const std::filesystem::path& path, const RunSummary& summary);
RunSummary read_run_summary(const std::filesystem::path& path);

}  // namespace derm
