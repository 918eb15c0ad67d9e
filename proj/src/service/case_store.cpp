#include "service/case_store.hpp"

#include <cstdio>
#include <sstream>

#include "common/error.hpp"
#include "common/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace derm {
namespace {

std::string image_extension(std::span<const std::uint8_t> b) {
  if (b.size() >= 8 && b[0] == 0x89 && b[1] == 'P' && b[2] == 'N' && b[3] == 'G') return ".png";
  if (b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF) return ".jpg";
  if (b.size() >= 2 && b[0] == 'B' && b[1] == 'M') return ".bmp";
  if (b.size() >= 12 && b[0] == 'R' && b[1] == 'I' && b[2] == 'F' && b[3] == 'F' && b[8] == 'W') return ".webp";
  if (b.size() >= 4 && ((b[0] == 'I' && b[1] == 'I') || (b[0] == 'M' && b[1] == 'M'))) return ".tif";
  return ".img";
}

std::uint64_t serial_of(const std::string& case_id) {
  const auto dash = case_id.rfind('-');
  if (dash == std::string::npos) return 0;
  try {
    return static_cast<std::uint64_t>(std::stoull(case_id.substr(dash + 1)));
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace

CaseStore::CaseStore(fs::path directory) : directory_(std::move(directory)), log_path_(directory_ / "events.log") {
  fs::create_directories(directory_ / "images");
  replay();
  log_.open(log_path_, std::ios::app | std::ios::binary);
  if (!log_) fail(ErrorCode::kIo, "cannot open case log " + log_path_.string());
}

void CaseStore::replay() {
  if (!fs::exists(log_path_)) return;
  std::ifstream in(log_path_, std::ios::binary);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json event;
    try {
      event = json::parse(line);
    } catch (const json::exception&) {
      fail(ErrorCode::kCorrupt, log_path_.string() + ":" + std::to_string(line_no) + ": not JSON");
    }
    apply(event, line_no);
  }
}

void CaseStore::apply(const json& event, std::size_t line_no) {
  const auto where = log_path_.string() + ":" + std::to_string(line_no) + ": ";
  const auto type = event.value("event", "");
  if (type == "submitted") {
    auto c = case_from_json(event.at("case"));
    if (c.status != CaseStatus::kPendingVetting) fail(ErrorCode::kCorrupt, where + "submitted case is not pending");
    if (cases_.contains(c.case_id)) fail(ErrorCode::kCorrupt, where + "duplicate case " + c.case_id);
    next_serial_ = std::max(next_serial_, serial_of(c.case_id) + 1);
    order_.push_back(c.case_id);
    cases_.emplace(c.case_id, std::move(c));
  } else if (type == "vetted") {
    auto d = decision_from_json(event.at("decision"));
    auto it = cases_.find(d.case_id);
    if (it == cases_.end()) fail(ErrorCode::kCorrupt, where + "decision for unknown case " + d.case_id);
    auto& c = it->second;
    if (c.status != CaseStatus::kPendingVetting) fail(ErrorCode::kCorrupt, where + "second decision for " + d.case_id);
    switch (d.verdict) {
      case Verdict::kConfirm: c.final_label = c.predicted_label; c.status = CaseStatus::kVetted; break;
      case Verdict::kCorrect: c.final_label = d.corrected_label; c.status = CaseStatus::kVetted; break;
      case Verdict::kReject: c.final_label.reset(); c.status = CaseStatus::kRejected; break;
    }
    c.decision = std::move(d);
  } else if (type == "incorporated") {
    const auto id = event.at("case_id").get<std::string>();
    auto it = cases_.find(id);
    if (it == cases_.end()) fail(ErrorCode::kCorrupt, where + "incorporation of unknown case " + id);
    if (it->second.status != CaseStatus::kVetted) {
      fail(ErrorCode::kCorrupt, where + "case " + id + " incorporated from status " +
                                    std::string(to_string(it->second.status)));
    }
    it->second.status = CaseStatus::kIncorporated;
    it->second.manifest_record_id = event.at("record_id").get<std::string>();
  } else {
    fail(ErrorCode::kCorrupt, where + "unknown event '" + type + "'");
  }
  ++events_;
}

void CaseStore::append(json event) {
  event["seq"] = events_ + 1;
  event["at"] = text::utc_timestamp();
  // Apply first: a rejected event never reaches the log.
  apply(event, events_ + 1);
  log_ << event.dump() << '\n';
  log_.flush();
  if (!log_) fail(ErrorCode::kIo, "cannot append to " + log_path_.string());
}

Case CaseStore::add_case(std::span<const std::uint8_t> image_bytes, const ScoreVector& scores,
                         const std::string& model_digest) {
  std::unique_lock lock(mutex_);
  char id[32];
  std::snprintf(id, sizeof(id), "case-%06llu", static_cast<unsigned long long>(next_serial_));
  Case c;
  c.case_id = id;
  const auto image = directory_ / "images" / (c.case_id + image_extension(image_bytes));
  {
    std::ofstream out(image, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(image_bytes.data()), static_cast<std::streamsize>(image_bytes.size()));
    if (!out) fail(ErrorCode::kIo, "cannot store image " + image.string());
  }
  c.image_ref = fs::absolute(image).lexically_normal().generic_string();
  c.submitted_at = text::utc_timestamp();
  c.scores = scores;
  c.predicted_label = scores.argmax();
  c.model_digest = model_digest;
  c.status = CaseStatus::kPendingVetting;
  append({{"event", "submitted"}, {"case", to_json(c)}});
  return cases_.at(c.case_id);
}

Case CaseStore::record_decision(VettingDecision decision) {
  decision.validate();
  std::unique_lock lock(mutex_);
  auto it = cases_.find(decision.case_id);
  if (it == cases_.end()) fail(ErrorCode::kNotFound, "unknown case " + decision.case_id);
  if (it->second.status != CaseStatus::kPendingVetting) {
    fail(ErrorCode::kConflict, "already vetted: " + decision.case_id);
  }
  if (decision.decided_at.empty()) decision.decided_at = text::utc_timestamp();
  append({{"event", "vetted"}, {"decision", to_json(decision)}});
  return cases_.at(decision.case_id);
}

void CaseStore::mark_incorporated(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::unique_lock lock(mutex_);
  for (const auto& [case_id, record_id] : entries) {
    append({{"event", "incorporated"}, {"case_id", case_id}, {"record_id", record_id}});
  }
}

std::optional<Case> CaseStore::get(const std::string& case_id) const {
  std::shared_lock lock(mutex_);
  auto it = cases_.find(case_id);
  if (it == cases_.end()) return std::nullopt;
  return it->second;
}

std::vector<Case> CaseStore::list(std::optional<CaseStatus> status) const {
  std::shared_lock lock(mutex_);
  std::vector<Case> out;
  for (const auto& id : order_) {
    const auto& c = cases_.at(id);
    if (!status || c.status == *status) out.push_back(c);
  }
  return out;
}

std::size_t CaseStore::count(CaseStatus status) const {
  std::shared_lock lock(mutex_);
  std::size_t n = 0;
  for (const auto& [id, c] : cases_) n += c.status == status ? 1 : 0;
  return n;
}

std::size_t CaseStore::size() const {
  std::shared_lock lock(mutex_);
  return cases_.size();
}

std::size_t CaseStore::event_count() const {
  std::shared_lock lock(mutex_);
  return events_;
}

fs::path CaseStore::image_path(const std::string& case_id) const {
  auto c = get(case_id);
  if (!c) fail(ErrorCode::kNotFound, "unknown case " + case_id);
  return c->image_ref;
}

void CaseStore::flush() {
  std::unique_lock lock(mutex_);
  log_.flush();
}

}  // namespace derm
