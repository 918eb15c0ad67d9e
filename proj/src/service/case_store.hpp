#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "service/case.hpp"

namespace derm {

// Append-only event log (`events.log`, one JSON object per line) plus an
// `images/` directory. Case state is derived by replaying the log; replay
// rejects any event that would move a case backwards. Single writer, many
// readers.
class CaseStore {
 public:
  explicit CaseStore(std::filesystem::path directory);

  const std::filesystem::path& directory() const { return directory_; }

  // Persists the image bytes and a `submitted` event.
  Case add_case(std::span<const std::uint8_t> image_bytes, const ScoreVector& scores, const std::string& model_digest);

  // kNotFound for an unknown case, kConflict when a decision exists already.
  Case record_decision(VettingDecision decision);

  // Appends one `incorporated` event per (case_id, manifest record id).
  void mark_incorporated(const std::vector<std::pair<std::string, std::string>>& entries);

  std::optional<Case> get(const std::string& case_id) const;
  // Submission order (oldest first). No filter lists every case.
  std::vector<Case> list(std::optional<CaseStatus> status = std::nullopt) const;
  std::size_t count(CaseStatus status) const;
  std::size_t size() const;
  std::size_t event_count() const;

  std::filesystem::path image_path(const std::string& case_id) const;
  void flush();

 private:
  void replay();
  void apply(const nlohmann::json& event, std::size_t line_no);
  void append(nlohmann::json event);

  std::filesystem::path directory_;
  std::filesystem::path log_path_;
  std::ofstream log_;
  mutable std::shared_mutex mutex_;
  std::vector<std::string> order_;
  std::map<std::string, Case> cases_;
  std::size_t events_ = 0;
  std::uint64_t next_serial_ = 1;
};

}  // namespace derm
