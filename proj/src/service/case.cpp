#include "service/case.hpp"

#include "common/error.hpp"
#include "common/text.hpp"

using nlohmann::json;

namespace derm {

std::string_view to_string(CaseStatus status) {
  switch (status) {
    case CaseStatus::kPendingVetting: return "pending_vetting";
    case CaseStatus::kVetted: return "vetted";
    case CaseStatus::kRejected: return "rejected";
    case CaseStatus::kIncorporated: return "incorporated";
  }
  return "?";
}

std::optional<CaseStatus> parse_case_status(std::string_view s) {
  const auto v = text::lower(s);
  for (auto st : {CaseStatus::kPendingVetting, CaseStatus::kVetted, CaseStatus::kRejected, CaseStatus::kIncorporated}) {
    if (to_string(st) == v) return st;
  }
  return std::nullopt;
}

int lifecycle_rank(CaseStatus status) {
  switch (status) {
    case CaseStatus::kPendingVetting: return 0;
    case CaseStatus::kVetted: return 1;
    case CaseStatus::kRejected: return 2;
    case CaseStatus::kIncorporated: return 2;
  }
  return -1;
}

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kConfirm: return "CONFIRM";
    case Verdict::kCorrect: return "CORRECT";
    case Verdict::kReject: return "REJECT";
  }
  return "?";
}

std::optional<Verdict> parse_verdict(std::string_view s) {
  const auto v = text::lower(s);
  if (v == "confirm") return Verdict::kConfirm;
  if (v == "correct") return Verdict::kCorrect;
  if (v == "reject") return Verdict::kReject;
  return std::nullopt;
}

void VettingDecision::validate() const {
  if (case_id.empty()) fail(ErrorCode::kInvalidArgument, "vetting decision without case_id");
  if (vetter_id.empty()) fail(ErrorCode::kInvalidArgument, "vetting decision without vetter_id");
  if (verdict == Verdict::kCorrect && !corrected_label) {
    fail(ErrorCode::kInvalidArgument, "CORRECT verdict requires corrected_label");
  }
  if (verdict != Verdict::kCorrect && corrected_label) {
    fail(ErrorCode::kInvalidArgument, "corrected_label is only allowed with a CORRECT verdict");
  }
}

json ranked_scores_json(const ScoreVector& scores, std::size_t limit) {
  json out = json::array();
  for (const auto& [label, score] : scores.ranked()) {
    if (out.size() >= limit) break;
    out.push_back({{"label", std::string(to_string(label))}, {"score", score}});
  }
  return out;
}

json to_json(const VettingDecision& d) {
  json j = {{"case_id", d.case_id},
            {"verdict", std::string(to_string(d.verdict))},
            {"vetter_id", d.vetter_id},
            {"note", d.note},
            {"decided_at", d.decided_at}};
  j["corrected_label"] = d.corrected_label ? json(std::string(to_string(*d.corrected_label))) : json(nullptr);
  return j;
}

json to_json(const Case& c) {
  json j = {{"case_id", c.case_id},
            {"image_ref", c.image_ref},
            {"submitted_at", c.submitted_at},
            {"scores", ranked_scores_json(c.scores)},
            {"score_vector", c.scores.probabilities},
            {"predicted_label", std::string(to_string(c.predicted_label))},
            {"model_digest", c.model_digest},
            {"status", std::string(to_string(c.status))}};
  j["final_label"] = c.final_label ? json(std::string(to_string(*c.final_label))) : json(nullptr);
  j["decision"] = c.decision ? to_json(*c.decision) : json(nullptr);
  j["manifest_record_id"] = c.manifest_record_id ? json(*c.manifest_record_id) : json(nullptr);
  return j;
}

namespace {

DiseaseLabel label_from(const json& j) {
  const auto name = j.get<std::string>();
  auto label = parse_label(name);
  if (!label) fail(ErrorCode::kInvalidArgument, "unknown label '" + name + "'");
  return *label;
}

}  // namespace

VettingDecision decision_from_json(const json& j) {
  VettingDecision d;
  try {
    d.case_id = j.value("case_id", "");
    const auto verdict = j.at("verdict").get<std::string>();
    auto v = parse_verdict(verdict);
    if (!v) fail(ErrorCode::kInvalidArgument, "unknown verdict '" + verdict + "'");
    d.verdict = *v;
    if (j.contains("corrected_label") && !j["corrected_label"].is_null()) d.corrected_label = label_from(j["corrected_label"]);
    d.vetter_id = j.value("vetter_id", "");
    d.note = j.value("note", "");
    d.decided_at = j.value("decided_at", "");
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("malformed vetting decision: ") + e.what());
  }
  return d;
}

Case case_from_json(const json& j) {
  Case c;
  try {
    c.case_id = j.at("case_id").get<std::string>();
    c.image_ref = j.at("image_ref").get<std::string>();
    c.submitted_at = j.at("submitted_at").get<std::string>();
    c.scores.probabilities = j.at("score_vector").get<std::array<double, kNumLabels>>();
    c.predicted_label = label_from(j.at("predicted_label"));
    c.model_digest = j.at("model_digest").get<std::string>();
    auto status = parse_case_status(j.at("status").get<std::string>());
    if (!status) fail(ErrorCode::kCorrupt, "bad case status");
    c.status = *status;
    if (j.contains("final_label") && !j["final_label"].is_null()) c.final_label = label_from(j["final_label"]);
    if (j.contains("decision") && !j["decision"].is_null()) c.decision = decision_from_json(j["decision"]);
    if (j.contains("manifest_record_id") && !j["manifest_record_id"].is_null()) {
      c.manifest_record_id = j["manifest_record_id"].get<std::string>();
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorrupt, std::string("malformed case: ") + e.what());
  }
  return c;
}

}  // namespace derm
