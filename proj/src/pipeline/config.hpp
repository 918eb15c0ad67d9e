#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "corpus/corpus.hpp"
#include "modelzoo/model_handle.hpp"
#include "trainer/train_config.hpp"

namespace derm {

struct PipelinePaths {
  std::filesystem::path corpus_dir = "corpus";
  std::filesystem::path manifest = "manifest.tsv";
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path store_dir = "store";
  std::filesystem::path runs_dir = "runs";
  std::filesystem::path reports_dir = "reports";
  std::filesystem::path augment_dir = "augmented";
  std::filesystem::path weights_dir = "weights";
};

// Everything one pipeline invocation needs. Text form: `key = value` lines,
// `#` starts a comment line. Keys are dotted (`train.batch_size`); see
// config_keys() for the full list.
struct PipelineConfig {
  PipelinePaths paths;
  std::uint64_t seed = 0;
  SplitSpec split;
  AugmentationPlan augment;
  TrainConfig train;
  std::string backbone = "resnet18";
  TuningStrategy strategy = TuningStrategy::kFull;
  WeightInit init = WeightInit::kPretrained;
  Preprocessing preprocessing;
  // Run name for train / crossval; derived from backbone and strategy when empty.
  std::string run_name;
  // Model for evaluate and serve.
  std::optional<std::filesystem::path> checkpoint;
  std::string listen = "127.0.0.1:8080";

  // Throws kInvalidArgument for an unknown key or malformed value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  void validate() const;
  // Sorted `key=value` lines over every key.
  std::string canonical_text() const;
  std::string digest() const;

  std::string effective_run_name(bool cross_validation) const;
  BuildOptions build_options() const;
  std::pair<std::string, int> listen_address() const;
};

const std::vector<std::string>& config_keys();

// Applies each line of `text` on top of `base`. Errors name the line.
PipelineConfig parse_pipeline_config(const std::string& text, PipelineConfig base = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path, PipelineConfig base = {});

}  // namespace derm
