#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "service/case_store.hpp"

namespace derm {

struct ActiveModelInfo {
  std::string digest;
  std::string network;
  std::filesystem::path checkpoint;
};

struct IncorporationReport {
  // (case id, manifest record id) pairs added in this run.
  std::vector<std::pair<std::string, std::string>> incorporated;
  // Cases whose record was already in the manifest; only their status moved.
  std::vector<std::string> reconciled;
  std::filesystem::path manifest;
};

struct ServiceOptions {
  std::filesystem::path store_dir = "store";
  std::filesystem::path manifest_path = "manifest.tsv";
  // Searched when a checkpoint is activated by digest.
  std::optional<std::filesystem::path> checkpoint_dir;
};

// Submission, vetting and corpus feedback around one active model. Every
// case records the digest of the model that scored it; activation swaps the
// model atomically and in-flight predictions finish on the old one.
class TriageService {
 public:
  explicit TriageService(ServiceOptions options);

  // kNotFound / kCorrupt / mismatch errors leave the current model active.
  ActiveModelInfo activate_checkpoint(const std::filesystem::path& checkpoint);
  ActiveModelInfo activate_digest(const std::string& digest);
  // Installs any scorer (tests, alternative runtimes).
  void activate_scorer(std::shared_ptr<Scorer> scorer, ActiveModelInfo info);
  std::optional<ActiveModelInfo> active_model() const;

  // kInvalidArgument for undecodable bytes (store untouched), kUnavailable
  // without an active model.
  Case submit_case(std::span<const std::uint8_t> image_bytes);
  Case record_vetting(const VettingDecision& decision);
  // Adds one VETTED/TRAIN manifest record per vetted case, then marks the
  // cases INCORPORATED. The manifest is replaced atomically before any case
  // status changes; a failed write leaves every case as it was.
  IncorporationReport incorporate_vetted();
  IncorporationReport incorporate_vetted(const std::filesystem::path& manifest_path);

  CaseStore& store() { return store_; }
  const CaseStore& store() const { return store_; }
  const ServiceOptions& options() const { return options_; }

 private:
  struct Active {
    std::shared_ptr<Scorer> scorer;
    ActiveModelInfo info;
    std::mutex scoring;
  };

  std::shared_ptr<Active> current() const;

  ServiceOptions options_;
  CaseStore store_;
  mutable std::mutex active_mutex_;
  std::shared_ptr<Active> active_;
  std::mutex incorporate_mutex_;
};

}  // namespace derm
