#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "modelzoo/score_vector.hpp"

namespace derm {

// PENDING_VETTING -> VETTED -> INCORPORATED, or PENDING_VETTING -> REJECTED.
enum class CaseStatus { kPendingVetting, kVetted, kRejected, kIncorporated };

std::string_view to_string(CaseStatus status);
std::optional<CaseStatus> parse_case_status(std::string_view s);
// Position along the lifecycle; a transition must strictly increase it.
int lifecycle_rank(CaseStatus status);

enum class Verdict { kConfirm, kCorrect, kReject };

std::string_view to_string(Verdict verdict);
std::optional<Verdict> parse_verdict(std::string_view s);

struct VettingDecision {
  std::string case_id;
  Verdict verdict = Verdict::kConfirm;
  std::optional<DiseaseLabel> corrected_label;
  std::string vetter_id;
  std::string note;
  std::string decided_at;

  // Throws kInvalidArgument when CORRECT lacks a label or the vetter is unnamed.
  void validate() const;
};

struct Case {
  std::string case_id;
  std::string image_ref;
  std::string submitted_at;
  ScoreVector scores;
  DiseaseLabel predicted_label = DiseaseLabel::kAcne;
  std::string model_digest;
  CaseStatus status = CaseStatus::kPendingVetting;
  std::optional<DiseaseLabel> final_label;
  std::optional<VettingDecision> decision;
  std::optional<std::string> manifest_record_id;
};

nlohmann::json to_json(const Case& c);
nlohmann::json to_json(const VettingDecision& d);
Case case_from_json(const nlohmann::json& j);
VettingDecision decision_from_json(const nlohmann::json& j);
nlohmann::json ranked_scores_json(const ScoreVector& scores, std::size_t limit = kNumLabels);

}  // namespace derm
