#include <cmath>

#include "common/digest.hpp"
#include "common/error.hpp"
#include "common/text.hpp"
#include "trainer/train_config.hpp"

namespace derm {

void TrainConfig::validate() const {
  if (batch_size < 1) fail(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail(ErrorCode::kInvalidArgument, "learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail(ErrorCode::kInvalidArgument, "momentum must lie in [0, 1)");
  if (!(lr_decay.factor > 0.0 && lr_decay.factor < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "lr decay factor must lie in (0, 1)");
  }
  if (lr_decay.every_n_epochs < 1) fail(ErrorCode::kInvalidArgument, "lr decay period must be >= 1 epoch");
  if (max_epochs < 1) fail(ErrorCode::kInvalidArgument, "max_epochs must be >= 1");
  if (early_stop_patience < 1) fail(ErrorCode::kInvalidArgument, "early_stop_patience must be >= 1");
  if (k_folds < 2) fail(ErrorCode::kInvalidArgument, "k_folds must be >= 2");
  if (threads < 0) fail(ErrorCode::kInvalidArgument, "threads must be >= 0");
}

std::string TrainConfig::canonical_text() const {
  return "batch_size=" + std::to_string(batch_size) + "\nlearning_rate=" + text::format_double(learning_rate) +
         "\nmomentum=" + text::format_double(momentum) + "\nlr_decay_factor=" + text::format_double(lr_decay.factor) +
         "\nlr_decay_every=" + std::to_string(lr_decay.every_n_epochs) + "\nmax_epochs=" + std::to_string(max_epochs) +
         "\nearly_stop_patience=" + std::to_string(early_stop_patience) + "\nk_folds=" + std::to_string(k_folds) +
         "\nseed=" + std::to_string(seed) + "\n";
}

std::string TrainConfig::digest() const { return sha256_hex(canonical_text()).substr(0, 16); }

double lr_at_epoch(const TrainConfig& config, int epoch) {
  if (epoch < 0) fail(ErrorCode::kInvalidArgument, "epoch must be >= 0");
  const int steps = epoch / config.lr_decay.every_n_epochs;
  return config.learning_rate * std::pow(config.lr_decay.factor, steps);
}

std::size_t best_epoch_index(std::span<const double> history) {
  if (history.empty()) fail(ErrorCode::kInvalidArgument, "empty validation loss history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] < history[best]) best = i;
  }
  return best;
}

EarlyStopDecision early_stop_check(std::span<const double> history, int patience) {
  if (patience < 1) fail(ErrorCode::kInvalidArgument, "patience must be >= 1");
  const auto best = best_epoch_index(history);
  const auto since = history.size() - 1 - best;
  return since >= static_cast<std::size_t>(patience) ? EarlyStopDecision::kStop : EarlyStopDecision::kContinue;
}

}  // namespace derm
