#include <cmath>
#include <filesystem>

#include "common/error.hpp"
#include "trainer/trainer.hpp"

namespace fs = std::filesystem;

namespace derm {

CrossValidationResult cross_validate(const HandleFactory& factory, const std::vector<std::vector<ImageRecord>>& folds,
                                     const TrainConfig& config, const CrossValidationOptions& options) {
  if (folds.size() < 2) fail(ErrorCode::kInvalidArgument, "cross-validation needs at least 2 folds");
  config.validate();

  CrossValidationResult result;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    std::vector<ImageRecord> train_records;
    for (std::size_t j = 0; j < folds.size(); ++j) {
      if (j != i) train_records.insert(train_records.end(), folds[j].begin(), folds[j].end());
    }
    ModelHandle handle = factory();
    TrainOptions train_options;
    train_options.config_digest = options.config_digest;
    if (options.checkpoint_dir) {
      train_options.checkpoint_path = *options.checkpoint_dir / (options.run_name + "-fold" + std::to_string(i + 1));
    }
    if (options.on_epoch) {
      train_options.on_epoch = [&options, i](const EpochMetrics& m) { options.on_epoch(i, m); };
    }
    result.runs.push_back(train(handle, train_records, folds[i], config, train_options));
  }

  double sum = 0.0;
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    sum += result.runs[i].best().val_accuracy;
    if (result.runs[i].best().val_loss < result.runs[result.best_fold].best().val_loss) result.best_fold = i;
  }
  const auto n = static_cast<double>(result.runs.size());
  result.mean_val_accuracy = sum / n;
  double sq = 0.0;
  for (const auto& r : result.runs) sq += std::pow(r.best().val_accuracy - result.mean_val_accuracy, 2);
  result.std_val_accuracy = std::sqrt(sq / (n - 1.0));

  if (options.checkpoint_dir) {
    const auto& best = result.runs[result.best_fold];
    const auto src = CheckpointPaths::from(best.best_checkpoint_path);
    const auto dst = CheckpointPaths::from(*options.checkpoint_dir / (options.run_name + "-cv-best"));
    fs::copy_file(src.weights, dst.weights, fs::copy_options::overwrite_existing);
    fs::copy_file(src.meta, dst.meta, fs::copy_options::overwrite_existing);
    result.best_checkpoint_path = dst.weights;
  }
  return result;
}

}  // namespace derm
