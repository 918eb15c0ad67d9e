#include <sstream>

#include <json.hpp>

#include "common/error.hpp"
#include "common/text.hpp"
#include "evaluator/evaluate.hpp"

using nlohmann::json;

namespace derm {
namespace {

constexpr std::string_view kBegin = "-----BEGIN MACHINE-READABLE-----";
constexpr std::string_view kEnd = "-----END MACHINE-READABLE-----";

json to_json(const EvalReport& r) {
  json j;
  j["network"] = r.network;
  j["model_digest"] = r.model_digest;
  j["label_order"] = canonical_label_order();
  j["evaluated"] = r.evaluated;
  j["top1_accuracy"] = r.top1_accuracy;
  j["macro_accuracy"] = r.macro_accuracy;
  j["per_class_accuracy"] = r.per_class_accuracy;
  j["counts"] = r.confusion.counts;
  j["row_percentages"] = r.confusion.row_percentages;
  j["latency"] = {{"mean_seconds", r.latency.mean_seconds}, {"p50_seconds", r.latency.p50_seconds},
                  {"p95_seconds", r.latency.p95_seconds}, {"samples", r.latency.samples},
                  {"repetitions", r.latency.repetitions}, {"device", r.latency.device}};
  j["failures"] = json::array();
  for (const auto& f : r.failures) j["failures"].push_back({{"id", f.record_id}, {"path", f.path}, {"reason", f.reason}});
  return j;
}

}  // namespace

std::string render_eval_report(const EvalReport& r) {
  std::ostringstream out;
  out << "Evaluation report\n"
      << "network:          " << r.network << '\n'
      << "model digest:     " << r.model_digest << '\n'
      << "evaluated images: " << r.evaluated << '\n'
      << "failures:         " << r.failures.size() << '\n'
      << "top-1 (micro):    " << text::format_fixed(r.top1_accuracy * 100.0, 2) << "%\n"
      << "top-1 (macro):    " << text::format_fixed(r.macro_accuracy * 100.0, 2) << "%\n"
      << "latency (" << r.latency.device << ", batch 1): mean " << text::format_fixed(r.latency.mean_seconds, 4)
      << " s, p50 " << text::format_fixed(r.latency.p50_seconds, 4) << " s, p95 "
      << text::format_fixed(r.latency.p95_seconds, 4) << " s over " << r.latency.samples << " images x "
      << r.latency.repetitions << " repetitions\n\n"
      << "Confusion matrix (row percentages, rounded to one decimal)\n"
      << render_confusion(r.confusion) << '\n';
  for (const auto& f : r.failures) out << "failed: " << f.record_id << " (" << f.reason << ")\n";
  out << kBegin << '\n' << to_json(r).dump(2) << '\n' << kEnd << '\n';
  return out.str();
}

void write_eval_report(const std::filesystem::path& path, const EvalReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  text::write_file_atomic(path, render_eval_report(report));
}

EvalReport read_eval_report(const std::filesystem::path& path) {
  const auto content = text::read_file(path);
  const auto begin = content.find(kBegin);
  const auto end = content.find(kEnd);
  if (begin == std::string::npos || end == std::string::npos || end < begin) {
    fail(ErrorCode::kCorrupt, "no machine-readable block in " + path.string());
  }
  EvalReport r;
  try {
    const auto j = json::parse(content.substr(begin + kBegin.size(), end - begin - kBegin.size()));
    if (j.at("label_order").get<std::string>() != canonical_label_order()) {
      fail(ErrorCode::kLabelOrderMismatch, "eval report label order differs: " + path.string());
    }
    r.network = j.at("network").get<std::string>();
    r.model_digest = j.at("model_digest").get<std::string>();
    r.evaluated = j.at("evaluated").get<std::size_t>();
    r.top1_accuracy = j.at("top1_accuracy").get<double>();
    r.macro_accuracy = j.at("macro_accuracy").get<double>();
    r.per_class_accuracy = j.at("per_class_accuracy").get<std::array<double, kNumLabels>>();
    r.confusion = confusion_from_counts(j.at("counts").get<CountGrid>());
    const auto& lat = j.at("latency");
    r.latency.mean_seconds = lat.at("mean_seconds").get<double>();
    r.latency.p50_seconds = lat.at("p50_seconds").get<double>();
    r.latency.p95_seconds = lat.at("p95_seconds").get<double>();
    r.latency.samples = lat.at("samples").get<std::size_t>();
    r.latency.repetitions = lat.at("repetitions").get<std::size_t>();
    r.latency.device = lat.at("device").get<std::string>();
    for (const auto& f : j.at("failures")) {
      r.failures.push_back({f.at("id").get<std::string>(), f.at("path").get<std::string>(),
                            f.at("reason").get<std::string>()});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorrupt, "malformed machine-readable block in " + path.string() + ": " + e.what());
  }
  return r;
}

}  // namespace derm
