#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "corpus/corpus.hpp"

namespace derm {
namespace {

// Per-class record indices, each list ordered by id so the shuffle input is
// independent of manifest line order.
std::array<std::vector<std::size_t>, kNumLabels> indices_by_class(
    const DatasetManifest& manifest, auto&& predicate) {
  std::array<std::vector<std::size_t>, kNumLabels> out;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (predicate(manifest.records[i])) out[index_of(manifest.records[i].label)].push_back(i);
  }
  for (auto& list : out) {
    std::sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
      return manifest.records[a].id < manifest.records[b].id;
    });
  }
  return out;
}

}  // namespace

void SplitSpec::validate() const {
  if (!(train_fraction >= 0.0 && validation_fraction >= 0.0)) {
    fail(ErrorCode::kInvalidArgument, "split fractions must be non-negative");
  }
  if (std::abs(train_fraction + validation_fraction - 1.0) > 1e-12) {
    fail(ErrorCode::kInvalidArgument, "train_fraction + validation_fraction must equal 1");
  }
}

DatasetManifest reserve_test_set(const DatasetManifest& manifest, const SplitSpec& spec) {
  spec.validate();
  DatasetManifest out = manifest;
  if (spec.test_count_per_class == 0) return out;
  for (const auto& r : manifest.records) {
    if (r.split == Split::kTest) fail(ErrorCode::kInvalidArgument, "test set already reserved");
  }
  auto by_class = indices_by_class(manifest, [](const ImageRecord& r) {
    return r.origin == Origin::kOriginal && r.split == Split::kUnassigned;
  });
  for (auto label : kAllLabels) {
    const auto& pool = by_class[index_of(label)];
    if (pool.size() < spec.test_count_per_class) {
      fail(ErrorCode::kInvalidArgument,
           "class " + std::string(to_string(label)) + " has " + std::to_string(pool.size()) +
               " original records, fewer than the " + std::to_string(spec.test_count_per_class) +
               " requested for the test set");
    }
  }
  for (auto label : kAllLabels) {
    auto pool = by_class[index_of(label)];
    SeededRng rng(spec.seed, 0x7E57'0000ULL + index_of(label));
    rng.shuffle(std::span(pool));
    for (std::size_t i = 0; i < spec.test_count_per_class; ++i) {
      out.records[pool[i]].split = Split::kTest;
    }
  }
  out.seed = spec.seed;
  return out;
}

std::size_t rounded_share(std::size_t n, double fraction) {
  // The small bias keeps exact halves (995 * 0.1) from falling below .5
  // through binary representation error.
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 0.5 + 1e-9));
}

DatasetManifest stratified_split(const DatasetManifest& manifest, const SplitSpec& spec) {
  spec.validate();
  DatasetManifest out = manifest;
  for (const auto& r : manifest.records) {
    if (r.split == Split::kTrain || r.split == Split::kValidation) {
      fail(ErrorCode::kInvalidArgument, "record " + r.id + " already has a train/validation assignment");
    }
  }
  auto by_class = indices_by_class(manifest, [](const ImageRecord& r) { return r.split != Split::kTest; });
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    const auto n = by_class[c].size();
    if (n == 0) continue;
    if (n < 2) {
      fail(ErrorCode::kInvalidArgument,
           "class " + std::string(to_string(label_at(c))) + " has fewer than 2 non-test records");
    }
  }
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    auto pool = by_class[c];
    if (pool.empty()) continue;
    SeededRng rng(spec.seed, 0x5B17'0000ULL + c);
    rng.shuffle(std::span(pool));
    const auto n_val = rounded_share(pool.size(), spec.validation_fraction);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      out.records[pool[i]].split = i < n_val ? Split::kValidation : Split::kTrain;
    }
  }
  out.seed = spec.seed;
  return out;
}

std::vector<Fold> kfold_partitions(const DatasetManifest& manifest, std::size_t k, std::uint64_t seed) {
  if (k < 2) fail(ErrorCode::kInvalidArgument, "k-fold requires k >= 2");
  auto by_class = indices_by_class(manifest, [](const ImageRecord& r) {
    return r.split == Split::kTrain || r.split == Split::kValidation;
  });
  std::size_t total = 0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    const auto n = by_class[c].size();
    total += n;
    if (n > 0 && n < k) {
      fail(ErrorCode::kInvalidArgument, "class " + std::string(to_string(label_at(c))) + " has " +
                                            std::to_string(n) + " records, fewer than k=" + std::to_string(k));
    }
  }
  if (total == 0) fail(ErrorCode::kInvalidArgument, "k-fold: no TRAIN or VALIDATION records");

  std::vector<Fold> folds(k);
  // Rotating the starting fold per class keeps overall fold sizes balanced
  // as well as per-class sizes.
  std::size_t offset = 0;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    auto pool = by_class[c];
    SeededRng rng(seed, 0xF01D'0000ULL + c);
    rng.shuffle(std::span(pool));
    for (std::size_t i = 0; i < pool.size(); ++i) folds[(offset + i) % k].push_back(pool[i]);
    offset = (offset + pool.size()) % k;
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

}  // namespace derm
