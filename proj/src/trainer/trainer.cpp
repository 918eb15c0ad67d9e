#include "trainer/trainer.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "common/text.hpp"
#include "corpus/image_io.hpp"

namespace F = torch::nn::functional;
using Clock = std::chrono::steady_clock;

namespace derm {
namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

class ImageLoader {
 public:
  ImageLoader(const std::vector<ImageRecord>& records, std::size_t cache_limit)
      : records_(records), cache_(records.size() <= cache_limit) {}

  cv::Mat get(std::size_t i) {
    if (!cache_) return decode_image_file(records_[i].path);
    auto it = decoded_.find(i);
    if (it == decoded_.end()) it = decoded_.emplace(i, decode_image_file(records_[i].path)).first;
    return it->second;
  }

 private:
  const std::vector<ImageRecord>& records_;
  bool cache_;
  std::map<std::size_t, cv::Mat> decoded_;
};

void check_records(const std::vector<ImageRecord>& records, const ModelHandle& handle, const char* which) {
  if (records.empty()) fail(ErrorCode::kInvalidArgument, std::string(which) + " split is empty");
  for (const auto& r : records) {
    if (static_cast<std::int64_t>(index_of(r.label)) >= handle.num_classes()) {
      fail(ErrorCode::kInvalidArgument, "record " + r.id + " has a label outside the model's class set");
    }
  }
}

struct BatchStats {
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::size_t count = 0;

  double mean_loss() const { return count ? loss_sum / static_cast<double>(count) : 0.0; }
  double accuracy() const { return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0; }
};

torch::Tensor stack_batch(ModelHandle& handle, ImageLoader& loader, std::span<const std::size_t> indices,
                          bool training, SeededRng* rng) {
  std::vector<torch::Tensor> items;
  items.reserve(indices.size());
  for (auto i : indices) items.push_back(handle.input_tensor(loader.get(i), training, rng));
  return torch::stack(items);
}

torch::Tensor label_tensor(const std::vector<ImageRecord>& records, std::span<const std::size_t> indices) {
  std::vector<std::int64_t> labels;
  labels.reserve(indices.size());
  for (auto i : indices) labels.push_back(static_cast<std::int64_t>(index_of(records[i].label)));
  return torch::tensor(labels, torch::kInt64);
}

void accumulate(BatchStats& stats, const torch::Tensor& logits, const torch::Tensor& labels, const torch::Tensor& loss) {
  const auto n = static_cast<std::size_t>(labels.size(0));
  stats.loss_sum += loss.item<double>() * static_cast<double>(n);
  stats.correct += static_cast<std::size_t>(logits.argmax(1).eq(labels).sum().item<std::int64_t>());
  stats.count += n;
}

BatchStats run_validation(ModelHandle& handle, const std::vector<ImageRecord>& records, ImageLoader& loader,
                          std::size_t batch_size) {
  torch::NoGradGuard no_grad;
  handle.set_training(false);
  BatchStats stats;
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const auto span = std::span(order).subspan(start, std::min(batch_size, order.size() - start));
    const auto labels = label_tensor(records, span);
    const auto logits = handle.logits(stack_batch(handle, loader, span, false, nullptr));
    accumulate(stats, logits, labels, F::cross_entropy(logits, labels));
  }
  return stats;
}

// Batch-norm in training mode cannot normalise a single sample, so a
// trailing batch of one joins the batch before it.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) out.emplace_back(start, std::min(batch_size, n - start));
  if (out.size() > 1 && out.back().second == 1) {
    out.pop_back();
    ++out.back().second;
  }
  return out;
}

using WeightSnapshot = std::vector<torch::Tensor>;

WeightSnapshot snapshot(ModelHandle& handle) {
  torch::NoGradGuard no_grad;
  WeightSnapshot out;
  for (const auto& p : handle.network().parameters()) out.push_back(p.detach().clone());
  for (const auto& b : handle.network().buffers()) out.push_back(b.detach().clone());
  return out;
}

void restore(ModelHandle& handle, const WeightSnapshot& snap) {
  torch::NoGradGuard no_grad;
  std::size_t i = 0;
  for (auto& p : handle.network().parameters()) p.copy_(snap[i++]);
  for (auto& b : handle.network().buffers()) b.copy_(snap[i++]);
}

}  // namespace

RunSummary TrainingRun::summary(const std::string& run_name) const {
  RunSummary s;
  s.run_name = run_name;
  s.network = network;
  s.strategy = std::string(to_string(strategy));
  s.validation_accuracy = history.empty() ? 0.0 : best().val_accuracy;
  s.total_minutes = total_minutes;
  s.best_epoch = best_epoch;
  s.stopped_early = stopped_early;
  s.evaluation = "single_split";
  s.checkpoint = best_checkpoint_path.string();
  return s;
}

std::pair<double, double> evaluate_loss(ModelHandle& handle, const std::vector<ImageRecord>& records,
                                        std::size_t batch_size) {
  ImageLoader loader(records, 0);
  const auto stats = run_validation(handle, records, loader, batch_size);
  return {stats.mean_loss(), stats.accuracy()};
}

TrainingRun train(ModelHandle& handle, const std::vector<ImageRecord>& train_records,
                  const std::vector<ImageRecord>& val_records, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  if (!handle.initialized()) fail(ErrorCode::kInvalidArgument, "model handle is not initialised");
  check_records(train_records, handle, "training");
  check_records(val_records, handle, "validation");

  const auto started = Clock::now();
  if (config.threads > 0) torch::set_num_threads(config.threads);
  torch::manual_seed(config.seed);

  TrainingRun run;
  run.config = config;
  run.network = std::string(handle.backbone().display_name);
  run.strategy = handle.strategy();

  auto params = handle.trainable_parameters();
  if (params.empty()) fail(ErrorCode::kInvalidArgument, "model has no trainable parameters");
  torch::optim::SGD optimizer(params, torch::optim::SGDOptions(config.learning_rate).momentum(config.momentum));

  ImageLoader train_loader(train_records, options.cache_limit);
  ImageLoader val_loader(val_records, options.cache_limit);
  std::vector<std::size_t> order(train_records.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> val_history;
  WeightSnapshot best_weights;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto epoch_started = Clock::now();
    const double lr = lr_at_epoch(config, epoch);
    for (auto& group : optimizer.param_groups()) {
      static_cast<torch::optim::SGDOptions&>(group.options()).lr(lr);
    }

    handle.set_training(true);
    SeededRng shuffle_rng(config.seed, 0x5EED'0000ULL + static_cast<std::uint64_t>(epoch));
    SeededRng crop_rng(config.seed, 0xC209'0000ULL + static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(std::span(order));

    BatchStats train_stats;
    for (const auto& [start, size] : batch_ranges(order.size(), config.batch_size)) {
      const auto span = std::span(order).subspan(start, size);
      const auto labels = label_tensor(train_records, span);
      const auto logits = handle.logits(stack_batch(handle, train_loader, span, true, &crop_rng));
      auto loss = F::cross_entropy(logits, labels);
      const double loss_value = loss.item<double>();
      if (!std::isfinite(loss_value)) {
        fail(ErrorCode::kNumerical, "non-finite training loss at epoch " + std::to_string(epoch + 1) +
                                        ", batch starting at " + std::to_string(start) + " (lr " +
                                        text::format_double(lr) + ", loss " + text::format_double(loss_value) + ")");
      }
      optimizer.zero_grad();
      loss.backward();
      optimizer.step();
      accumulate(train_stats, logits.detach(), labels, loss.detach());
    }

    const auto val_stats = run_validation(handle, val_records, val_loader, config.batch_size);
    if (!std::isfinite(val_stats.mean_loss())) {
      fail(ErrorCode::kNumerical, "non-finite validation loss at epoch " + std::to_string(epoch + 1));
    }

    EpochMetrics m;
    m.epoch = epoch + 1;
    m.train_loss = train_stats.mean_loss();
    m.train_accuracy = train_stats.accuracy();
    m.val_loss = val_stats.mean_loss();
    m.val_accuracy = val_stats.accuracy();
    m.learning_rate = lr;

    const bool improved = val_history.empty() || m.val_loss < val_history[best_epoch_index(val_history)];
    val_history.push_back(m.val_loss);
    if (improved) {
      run.best_epoch = m.epoch;
      best_weights = snapshot(handle);
      CheckpointMetadata meta;
      meta.config_digest = options.config_digest.empty() ? config.digest() : options.config_digest;
      meta.best_val_loss = m.val_loss;
      meta.best_val_accuracy = m.val_accuracy;
      meta.best_epoch = m.epoch;
      if (options.checkpoint_path) {
        run.best_checkpoint = save_checkpoint(handle, meta, *options.checkpoint_path);
        run.best_checkpoint_path = CheckpointPaths::from(*options.checkpoint_path).weights;
      } else {
        meta.backbone = run.network;
        meta.strategy = run.strategy;
        run.best_checkpoint = meta;
      }
    }
    m.epoch_seconds = seconds_since(epoch_started);
    run.history.push_back(m);
    if (options.on_epoch) options.on_epoch(m);

    if (early_stop_check(val_history, config.early_stop_patience) == EarlyStopDecision::kStop) {
      run.stopped_early = true;
      break;
    }
  }

  restore(handle, best_weights);
  handle.set_training(false);
  run.total_minutes = seconds_since(started) / 60.0;
  return run;
}

}  // namespace derm
