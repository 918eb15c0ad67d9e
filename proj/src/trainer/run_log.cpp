#include "trainer/run_log.hpp"

#include <sstream>

#include "common/error.hpp"
#include "common/text.hpp"

namespace derm {

std::string format_epoch_line(const EpochMetrics& m, bool include_timing) {
  using text::format_double;
  std::string line = "epoch=" + std::to_string(m.epoch) + "\ttrain_loss=" + format_double(m.train_loss) +
                     "\ttrain_accuracy=" + format_double(m.train_accuracy) + "\tval_loss=" +
                     format_double(m.val_loss) + "\tval_accuracy=" + format_double(m.val_accuracy);
  if (include_timing) line += "\tepoch_seconds=" + format_double(m.epoch_seconds);
  return line + "\tlearning_rate=" + format_double(m.learning_rate);
}

EpochMetrics parse_epoch_line(const std::string& line) {
  const auto f = text::parse_fields(line);
  auto get = [&](const char* key) -> const std::string& {
    auto it = f.find(key);
    if (it == f.end()) fail(ErrorCode::kCorrupt, std::string("epoch line missing ") + key);
    return it->second;
  };
  EpochMetrics m;
  m.epoch = static_cast<int>(text::parse_int(get("epoch"), "epoch"));
  m.train_loss = text::parse_double(get("train_loss"), "train_loss");
  m.train_accuracy = text::parse_double(get("train_accuracy"), "train_accuracy");
  m.val_loss = text::parse_double(get("val_loss"), "val_loss");
  m.val_accuracy = text::parse_double(get("val_accuracy"), "val_accuracy");
  if (f.contains("epoch_seconds")) m.epoch_seconds = text::parse_double(get("epoch_seconds"), "epoch_seconds");
  m.learning_rate = text::parse_double(get("learning_rate"), "learning_rate");
  return m;
}

namespace {
constexpr const char* kSummaryHeader =
    "run\tnetwork\tstrategy\tvalidation_accuracy\ttotal_minutes\tbest_epoch\tstopped_early\tevaluation\tcheckpoint";
}

void write_run_summary(const std::filesystem::path& path, const RunSummary& s) {
  std::ostringstream out;
  out << kSummaryHeader << '\n'
      << text::escape_field(s.run_name) << '\t' << s.network << '\t' << s.strategy << '\t'
      << text::format_double(s.validation_accuracy) << '\t' << text::format_double(s.total_minutes) << '\t'
      << s.best_epoch << '\t' << (s.stopped_early ? "true" : "false") << '\t' << s.evaluation << '\t'
      << text::escape_field(s.checkpoint) << '\n';
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  text::write_file_atomic(path, out.str());
}

RunSummary read_run_summary(const std::filesystem::path& path) {
  std::istringstream in(text::read_file(path));
  std::string header, row;
  if (!std::getline(in, header) || header != kSummaryHeader || !std::getline(in, row)) {
    fail(ErrorCode::kCorrupt, "not a run summary file: " + path.string());
  }
  const auto cols = text::split(row, '\t');
  if (cols.size() != 9) fail(ErrorCode::kCorrupt, "run summary row has wrong column count: " + path.string());
  RunSummary s;
  s.run_name = text::unescape_field(cols[0]);
  s.network = cols[1];
  s.strategy = cols[2];
  s.validation_accuracy = text::parse_double(cols[3], "validation_accuracy");
  s.total_minutes = text::parse_double(cols[4], "total_minutes");
  s.best_epoch = static_cast<int>(text::parse_int(cols[5], "best_epoch"));
  s.stopped_early = cols[6] == "true";
  s.evaluation = cols[7];
  s.checkpoint = text::unescape_field(cols[8]);
  return s;
}

}  // namespace derm
