#pragma once

#include <chrono>
#include <filesystem>
#include <thread>

#include "corpus/corpus.hpp"
#include "corpus/manifest.hpp"
#include "modelzoo/model_handle.hpp"
#include "synthetic.hpp"

namespace testsupport {

// Manifest of ORIGINAL/UNASSIGNED records with `counts[c]` records of class
// c. Paths are fictitious; nothing is decoded.
derm::DatasetManifest counted_manifest(const std::array<std::size_t, 9>& counts, const std::string& prefix = "");

// Ingests a freshly written class tree.
derm::DatasetManifest ingested_tree(const std::filesystem::path& root, std::size_t per_class, int side = 64);

// Small inputs keep CPU tests fast; the architectures accept any side >= 32.
derm::BuildOptions small_random_build(std::uint64_t seed = 1, int crop = 32);

class FixedScorer : public derm::Scorer {
 public:
  explicit FixedScorer(derm::ScoreVector v) : v_(v) {}
  derm::ScoreVector score(const cv::Mat&) override { return v_; }

 private:
  derm::ScoreVector v_;
};

class SleepingScorer : public derm::Scorer {
 public:
  explicit SleepingScorer(std::chrono::microseconds d) : d_(d) {}
  derm::ScoreVector score(const cv::Mat&) override {
    std::this_thread::sleep_for(d_);
    return derm::ScoreVector::uniform();
  }

 private:
  std::chrono::microseconds d_;
};

}  // namespace testsupport

namespace testsupport {

// Records backed by a freshly written class tree; every record is TRAIN.
std::vector<derm::ImageRecord> image_records(const std::filesystem::path& root, std::size_t per_class, int side = 16);

// Largest relative error between autograd gradients of the mean
// cross-entropy with respect to the head parameters and central finite
// differences, everything in double precision on a copy of `handle`.
// `max_entries` weight entries are sampled (all bias entries are checked).
double head_gradient_relative_error(const derm::ModelHandle& handle, const std::vector<cv::Mat>& images,
                                    const std::vector<derm::DiseaseLabel>& labels, std::size_t max_entries,
                                    std::uint64_t seed);

// Batch loss before and after one plain SGD step (no momentum) at `lr`, in
// evaluation mode on a copy of `handle`.
std::pair<double, double> single_step_losses(const derm::ModelHandle& handle, const std::vector<cv::Mat>& images,
                                             const std::vector<derm::DiseaseLabel>& labels, double lr);

}  // namespace testsupport
