#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace derm {

struct LrDecay {
  double factor = 0.1;
  int every_n_epochs = 7;
};

struct TrainConfig {
  std::size_t batch_size = 16;
  double learning_rate = 0.001;
  double momentum = 0.9;
  LrDecay lr_decay;
  int max_epochs = 25;
  int early_stop_patience = 5;
  std::size_t k_folds = 5;
  std::uint64_t seed = 0;
  // Intra-op threads for the tensor library; 0 keeps its default. Use 1 for
  // bit-reproducible histories.
  int threads = 0;

  void validate() const;
  // key=value text, one per line, in fixed key order.
  std::string canonical_text() const;
  std::string digest() const;
};

// learning_rate * factor^(floor(epoch / every_n_epochs)), epoch counted from 0.
double lr_at_epoch(const TrainConfig& config, int epoch);

enum class EarlyStopDecision { kContinue, kStop };

// Stop once `patience` consecutive epochs pass without a strict improvement
// over the best loss seen so far.
EarlyStopDecision early_stop_check(std::span<const double> val_loss_history, int patience);

// 0-based index of the first minimum.
std::size_t best_epoch_index(std::span<const double> val_loss_history);

}  // namespace derm
