#include "service/triage_service.hpp"

#include <set>

#include "common/error.hpp"
#include "corpus/image_io.hpp"
#include "corpus/manifest.hpp"
#include "modelzoo/checkpoint.hpp"

namespace fs = std::filesystem;

namespace derm {
namespace {

class HandleScorer : public Scorer {
 public:
  explicit HandleScorer(ModelHandle handle) : handle_(std::move(handle)) {}
  ScoreVector score(const cv::Mat& image) override { return handle_.predict_scores(image); }

 private:
  ModelHandle handle_;
};

}  // namespace

TriageService::TriageService(ServiceOptions options)
    : options_(std::move(options)), store_(options_.store_dir) {}

std::shared_ptr<TriageService::Active> TriageService::current() const {
  std::lock_guard lock(active_mutex_);
  return active_;
}

std::optional<ActiveModelInfo> TriageService::active_model() const {
  auto a = current();
  if (!a) return std::nullopt;
  return a->info;
}

void TriageService::activate_scorer(std::shared_ptr<Scorer> scorer, ActiveModelInfo info) {
  auto next = std::make_shared<Active>();
  next->scorer = std::move(scorer);
  next->info = std::move(info);
  std::lock_guard lock(active_mutex_);
  active_ = std::move(next);
}

ActiveModelInfo TriageService::activate_checkpoint(const fs::path& checkpoint) {
  const auto meta = read_checkpoint_metadata(checkpoint);
  if (auto a = current(); a && a->info.digest == meta.digest()) return a->info;
  auto loaded = load_checkpoint(checkpoint);
  ActiveModelInfo info{loaded.metadata.digest(), loaded.metadata.backbone,
                       CheckpointPaths::from(checkpoint).weights};
  activate_scorer(std::make_shared<HandleScorer>(std::move(loaded.handle)), info);
  return info;
}

ActiveModelInfo TriageService::activate_digest(const std::string& digest) {
  if (!options_.checkpoint_dir || !fs::is_directory(*options_.checkpoint_dir)) {
    fail(ErrorCode::kNotFound, "no checkpoint directory configured to resolve digest " + digest);
  }
  for (const auto& entry : fs::directory_iterator(*options_.checkpoint_dir)) {
    if (entry.path().extension() != ".meta") continue;
    try {
      if (read_checkpoint_metadata(entry.path()).digest() == digest) return activate_checkpoint(entry.path());
    } catch (const Error&) {
      continue;
    }
  }
  fail(ErrorCode::kNotFound, "no checkpoint with digest " + digest);
}

Case TriageService::submit_case(std::span<const std::uint8_t> image_bytes) {
  cv::Mat image;
  try {
    image = decode_image_bytes(image_bytes);
  } catch (const Error& e) {
    fail(ErrorCode::kInvalidArgument, e.what());
  }
  auto active = current();
  if (!active) fail(ErrorCode::kUnavailable, "no active model");
  ScoreVector scores;
  {
    std::lock_guard lock(active->scoring);
    scores = active->scorer->score(image);
  }
  return store_.add_case(image_bytes, scores, active->info.digest);
}

Case TriageService::record_vetting(const VettingDecision& decision) { return store_.record_decision(decision); }

IncorporationReport TriageService::incorporate_vetted() { return incorporate_vetted(options_.manifest_path); }

IncorporationReport TriageService::incorporate_vetted(const fs::path& manifest_path) {
  std::lock_guard lock(incorporate_mutex_);
  IncorporationReport report;
  report.manifest = manifest_path;
  const auto vetted = store_.list(CaseStatus::kVetted);
  if (vetted.empty()) return report;

  auto manifest = load_manifest(manifest_path);
  std::map<std::string, std::string> existing;
  for (const auto& r : manifest.records) {
    if (r.origin == Origin::kVetted && r.source_id) existing[*r.source_id] = r.id;
  }
  std::vector<std::pair<std::string, std::string>> to_mark;
  for (const auto& c : vetted) {
    if (auto it = existing.find(c.case_id); it != existing.end()) {
      report.reconciled.push_back(c.case_id);
      to_mark.emplace_back(c.case_id, it->second);
      continue;
    }
    ImageRecord r;
    r.id = "vetted/" + c.case_id;
    r.path = c.image_ref;
    r.label = *c.final_label;
    r.origin = Origin::kVetted;
    r.source_id = c.case_id;
    r.split = Split::kTrain;
    manifest.records.push_back(r);
    report.incorporated.emplace_back(c.case_id, r.id);
    to_mark.emplace_back(c.case_id, r.id);
  }
  if (!report.incorporated.empty()) save_manifest(manifest, manifest_path);
  store_.mark_incorporated(to_mark);
  return report;
}

}  // namespace derm
