#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>

#include "modelzoo/model_handle.hpp"

namespace derm {

inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointMetadata {
  int format_version = kCheckpointFormatVersion;
  std::string backbone;
  TuningStrategy strategy = TuningStrategy::kFull;
  std::int64_t num_classes = static_cast<std::int64_t>(kNumLabels);
  std::string label_order = canonical_label_order();
  std::string config_digest;
  double best_val_loss = std::numeric_limits<double>::quiet_NaN();
  double best_val_accuracy = std::numeric_limits<double>::quiet_NaN();
  int best_epoch = -1;
  std::string created_at;
  std::string pretrained_source;
  Preprocessing preprocessing;
  // SHA-256 of the .weights file.
  std::string weights_sha256;

  // Short identifier handed out to cases and reports.
  std::string digest() const { return weights_sha256.substr(0, 16); }

  std::string serialize() const;
  static CheckpointMetadata parse(const std::string& text);
};

// `<stem>.weights` + `<stem>.meta`. Accepts the stem or either file path.
struct CheckpointPaths {
  std::filesystem::path weights;
  std::filesystem::path meta;

  static CheckpointPaths from(const std::filesystem::path& any);
};

struct LoadedCheckpoint {
  ModelHandle handle;
  CheckpointMetadata metadata;
};

// Fills backbone, strategy, num_classes, preprocessing, pretrained source,
// label order and weights digest from the handle; keeps the caller's metrics
// and config digest.
CheckpointMetadata save_checkpoint(const ModelHandle& handle, CheckpointMetadata metadata,
                                   const std::filesystem::path& path);

CheckpointMetadata read_checkpoint_metadata(const std::filesystem::path& path);

// Errors: kNotFound (missing files), kCorrupt (unreadable meta or weights,
// digest mismatch), kBackboneMismatch (expected_backbone differs),
// kLabelOrderMismatch.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 std::optional<BackboneName> expected_backbone = std::nullopt);

}  // namespace derm
