#include "evaluator/evaluate.hpp"

#include "common/error.hpp"
#include "corpus/image_io.hpp"

namespace derm {

EvalReport evaluate(Scorer& scorer, const std::vector<ImageRecord>& test_records, const EvalOptions& options) {
  if (test_records.empty()) fail(ErrorCode::kInvalidArgument, "empty test set");
  for (const auto& r : test_records) {
    if (r.split != Split::kTest) fail(ErrorCode::kInvalidArgument, "record " + r.id + " is not in the TEST split");
  }

  EvalReport report;
  report.network = options.network;
  report.model_digest = options.model_digest;
  std::vector<cv::Mat> latency_images;
  for (const auto& r : test_records) {
    cv::Mat image;
    try {
      image = decode_image_file(r.path);
    } catch (const Error& e) {
      report.failures.push_back({r.id, r.path, e.what()});
      continue;
    }
    report.predictions.push_back(PredictionPair::from_scores(r.id, r.label, scorer.score(image)));
    if (latency_images.size() < options.latency_samples) latency_images.push_back(image);
  }
  if (report.predictions.empty()) {
    fail(ErrorCode::kInvalidArgument, "no test image could be decoded (" + std::to_string(report.failures.size()) +
                                          " failures)");
  }
  report.evaluated = report.predictions.size();
  report.confusion = confusion_matrix(report.predictions);
  report.top1_accuracy = top1_accuracy(report.predictions);
  report.per_class_accuracy = per_class_accuracy(report.confusion);
  report.macro_accuracy = macro_accuracy(report.confusion);
  if (!latency_images.empty() && options.latency_repetitions > 0) {
    report.latency = latency_benchmark(scorer, latency_images, options.latency_repetitions);
  }
  return report;
}

}  // namespace derm
