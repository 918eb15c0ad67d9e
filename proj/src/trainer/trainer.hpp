#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "corpus/manifest.hpp"
#include "modelzoo/checkpoint.hpp"
#include "modelzoo/model_handle.hpp"
#include "trainer/run_log.hpp"
#include "trainer/train_config.hpp"

namespace derm {

struct TrainingRun {
  TrainConfig config;
  std::string network;
  TuningStrategy strategy = TuningStrategy::kFull;
  std::vector<EpochMetrics> history;
  int best_epoch = 0;  // 1-based, first minimum of val_loss
  CheckpointMetadata best_checkpoint;
  // Empty when the run was not asked to persist checkpoints.
  std::filesystem::path best_checkpoint_path;
  double total_minutes = 0.0;
  bool stopped_early = false;

  const EpochMetrics& best() const { return history.at(static_cast<std::size_t>(best_epoch - 1)); }
  RunSummary summary(const std::string& run_name) const;
};

struct TrainOptions {
  // Checkpoint stem written at every new validation-loss minimum.
  std::optional<std::filesystem::path> checkpoint_path;
  std::string config_digest;
  std::function<void(const EpochMetrics&)> on_epoch;
  // Decoded images are kept in memory when the run has at most this many.
  std::size_t cache_limit = 4096;
};

// Mini-batch SGD with momentum on the handle's trainable parameters,
// step-decayed learning rate, early stopping on validation loss. The handle
// ends holding the best-epoch weights, in evaluation mode.
TrainingRun train(ModelHandle& handle, const std::vector<ImageRecord>& train_records,
                  const std::vector<ImageRecord>& val_records, const TrainConfig& config,
                  const TrainOptions& options = {});

// Mean cross-entropy and top-1 accuracy of a handle over records, in
// evaluation mode.
std::pair<double, double> evaluate_loss(ModelHandle& handle, const std::vector<ImageRecord>& records,
                                        std::size_t batch_size);

using HandleFactory = std::function<ModelHandle()>;

struct CrossValidationResult {
  std::vector<TrainingRun> runs;
  double mean_val_accuracy = 0.0;
  // Sample standard deviation (n - 1) of the per-fold best validation accuracy.
  double std_val_accuracy = 0.0;
  std::size_t best_fold = 0;  // lowest best-epoch validation loss
  std::filesystem::path best_checkpoint_path;
};

struct CrossValidationOptions {
  // Fold checkpoints go to `<dir>/<run_name>-fold<i>`; the selected one is
  // copied to `<dir>/<run_name>-cv-best`.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::string run_name = "cv";
  std::string config_digest;
  std::function<void(std::size_t fold, const EpochMetrics&)> on_epoch;
};

// Fold i validates on folds[i] and trains on the union of the others; early
// stopping monitors the held-out fold.
CrossValidationResult cross_validate(const HandleFactory& factory, const std::vector<std::vector<ImageRecord>>& folds,
                                     const TrainConfig& config, const CrossValidationOptions& options = {});

}  // namespace derm
