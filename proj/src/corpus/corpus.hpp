#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "common/rng.hpp"
#include "corpus/manifest.hpp"

namespace derm {

// Directory / sidecar label strings to labels. Lookup is exact first, then
// case- and punctuation-insensitive.
class LabelMapping {
 public:
  // Canonical names plus the spellings used in clinical tables
  // ("P. Maculae", "Pigmented Maculae", "Ulcers").
  static LabelMapping defaults();

  void add(const std::string& name, DiseaseLabel label);
  std::optional<DiseaseLabel> lookup(const std::string& name) const;

 private:
  static std::string normalise(const std::string& name);
  std::map<std::string, DiseaseLabel> exact_;
  std::map<std::string, DiseaseLabel> normalised_;
};

struct IngestResult {
  DatasetManifest manifest;
  // Files with image extensions that failed to decode.
  std::vector<std::filesystem::path> unreadable;
};

// Walks one sub-directory per label. If the root holds a `labels.tsv`
// sidecar (`relative_path<TAB>label` per line) it is used instead.
// Records are ORIGINAL / UNASSIGNED, sorted by id (the path relative to root).
IngestResult ingest(const std::filesystem::path& root, const LabelMapping& mapping);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
  std::size_t unassigned = 0;

  std::size_t total() const { return train + validation + test + unassigned; }
  bool operator==(const SplitCounts&) const = default;
};

using ClassDistribution = std::array<SplitCounts, kNumLabels>;

ClassDistribution class_distribution(const DatasetManifest& manifest);
std::string render_distribution(const ClassDistribution& distribution);

struct SplitSpec {
  double train_fraction = 0.90;
  double validation_fraction = 0.10;
  std::size_t test_count_per_class = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

DatasetManifest reserve_test_set(const DatasetManifest& manifest, const SplitSpec& spec);

// Round-half-up share of `n` (validation count for the 90:10 split).
std::size_t rounded_share(std::size_t n, double fraction);

DatasetManifest stratified_split(const DatasetManifest& manifest, const SplitSpec& spec);

struct AugmentationOps {
  bool horizontal_flip = true;
  bool rotation = true;
  double rotation_degrees = 20.0;
  bool random_crop = true;
  double crop_scale_min = 0.8;
  double crop_scale_max = 1.0;
  bool brightness_jitter = true;
  double brightness_range = 0.10;
};

struct AugmentationPlan {
  std::size_t target_per_class = 4600;
  AugmentationOps ops;
  std::uint64_t seed = 0;
  // Generated images go to `<output_dir>/<label>/`; beside their source when unset.
  std::optional<std::filesystem::path> output_dir;

  void validate() const;
};

// One sampled transform; its text form is stored on the AUGMENTED record.
struct AugmentTransform {
  bool flip = false;
  double rotation_degrees = 0.0;
  double crop_scale = 1.0;
  // Crop origin as a fraction of the free margin, in [0, 1].
  double crop_x = 0.0;
  double crop_y = 0.0;
  double brightness = 1.0;

  std::string to_string() const;
  static AugmentTransform parse(const std::string& text);
};

AugmentTransform sample_transform(const AugmentationOps& ops, SeededRng& rng);

// Image is assumed 3-channel 8-bit; output keeps the input size.
cv::Mat apply_transform(const cv::Mat& image, const AugmentTransform& transform);

struct AugmentReport {
  std::array<std::size_t, kNumLabels> added{};
  std::size_t total_added() const;
};

// Adds AUGMENTED/TRAIN records per class until each class's TRAIN count
// reaches the target. Generated images are named `<stem>__aug<N>.png`.
DatasetManifest augment_to_target(const DatasetManifest& manifest, const AugmentationPlan& plan,
                                  AugmentReport* report = nullptr);

// Each fold holds indices into manifest.records.
using Fold = std::vector<std::size_t>;

// Stratified k-fold over TRAIN and VALIDATION records.
std::vector<Fold> kfold_partitions(const DatasetManifest& manifest, std::size_t k, std::uint64_t seed);

}  // namespace derm
