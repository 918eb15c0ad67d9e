#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "common/rng.hpp"
#include "modelzoo/backbones.hpp"
#include "modelzoo/score_vector.hpp"

namespace derm {

enum class TuningStrategy { kHeadOnly, kFull };

std::string_view to_string(TuningStrategy strategy);
std::optional<TuningStrategy> parse_strategy(std::string_view s);

// Resize the shorter side, then crop a square (centre at evaluation, random
// position during training), convert to RGB and normalise per channel.
struct Preprocessing {
  int resize_shorter = 256;
  int crop_side = 224;
  // ImageNet channel statistics, RGB order.
  std::array<float, 3> mean = {0.485f, 0.456f, 0.406f};
  std::array<float, 3> stddev = {0.229f, 0.224f, 0.225f};

  void validate() const;
  // Returns a [3, crop, crop] float tensor. `rng` is required when training.
  torch::Tensor to_tensor(const cv::Mat& bgr, bool training, SeededRng* rng) const;
};

enum class WeightInit {
  // Backbone weights from `<weights_dir>/<name>.pretrained.pt`.
  kPretrained,
  // Seeded random backbone; for desk-scale smoke runs and tests only.
  kRandom,
};

struct BuildOptions {
  WeightInit init = WeightInit::kPretrained;
  std::filesystem::path weights_dir = "weights";
  std::uint64_t seed = 0;
  Preprocessing preprocessing;
};

std::filesystem::path pretrained_weights_path(const std::filesystem::path& weights_dir, BackboneName name);

struct LayerFlag {
  std::string name;
  std::int64_t numel = 0;
  bool trainable = false;
};

struct ParameterReport {
  std::int64_t trainable_count = 0;
  std::int64_t frozen_count = 0;
  std::vector<LayerFlag> layers;
};

// Owns one classifier network. Move-only; use clone() for an independent
// copy. A default-constructed handle is uninitialised and refuses to predict.
class ModelHandle : public Scorer {
 public:
  ModelHandle() = default;
  ModelHandle(ModelHandle&&) noexcept = default;
  ModelHandle& operator=(ModelHandle&&) noexcept = default;
  ModelHandle(const ModelHandle&) = delete;
  ModelHandle& operator=(const ModelHandle&) = delete;

  static ModelHandle build(std::string_view backbone_name, std::int64_t num_classes, TuningStrategy strategy,
                           const BuildOptions& options = {});
  // Same architecture with default (random) initialisation; used when
  // weights are about to be restored from a checkpoint.
  static ModelHandle blank(BackboneName name, std::int64_t num_classes, TuningStrategy strategy,
                           const Preprocessing& preprocessing);

  bool initialized() const { return net_ != nullptr; }
  const BackboneSpec& backbone() const;
  std::int64_t num_classes() const { return num_classes_; }
  TuningStrategy strategy() const { return strategy_; }
  const Preprocessing& preprocessing() const { return preprocessing_; }
  const std::string& pretrained_source() const { return pretrained_source_; }
  void set_pretrained_source(std::string source) { pretrained_source_ = std::move(source); }

  // Reapplies requires_grad flags.
  void set_strategy(TuningStrategy strategy);

  ClassifierNetImpl& network();
  const ClassifierNetImpl& network() const;
  std::shared_ptr<ClassifierNetImpl> network_ptr() const { return net_; }

  // Parameters the optimiser may update under the current strategy.
  std::vector<torch::Tensor> trainable_parameters() const;
  // Backbone (non-head) parameters by name.
  std::vector<std::pair<std::string, torch::Tensor>> backbone_parameters() const;
  ParameterReport parameter_report() const;

  // Training mode. Under HEAD_ONLY the backbone stays in evaluation mode so
  // its batch-norm statistics never move.
  void set_training(bool training);

  // Forward pass on a preprocessed batch [N, 3, H, W]. Under HEAD_ONLY the
  // backbone runs without autograd.
  torch::Tensor logits(const torch::Tensor& batch);

  torch::Tensor input_tensor(const cv::Mat& bgr, bool training, SeededRng* rng) const;

  // Evaluation-mode forward pass; deterministic for fixed weights.
  ScoreVector predict_scores(const cv::Mat& bgr_image);
  ScoreVector score(const cv::Mat& bgr_image) override { return predict_scores(bgr_image); }

  void zero_head();
  ModelHandle clone() const;

  // Copies every parameter and buffer from `other` (same architecture).
  void copy_weights_from(const ModelHandle& other);

  // Identifier of the weights this handle was loaded from, empty otherwise.
  const std::string& digest() const { return digest_; }
  void set_digest(std::string digest) { digest_ = std::move(digest); }

 private:
  void require_initialized() const;

  std::shared_ptr<ClassifierNetImpl> net_;
  BackboneName name_ = BackboneName::kResNet18;
  std::int64_t num_classes_ = 0;
  TuningStrategy strategy_ = TuningStrategy::kFull;
  Preprocessing preprocessing_;
  std::string pretrained_source_;
  std::string digest_;
};

}  // namespace derm
