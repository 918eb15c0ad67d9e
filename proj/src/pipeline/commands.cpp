#include "pipeline/commands.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "common/error.hpp"
#include "common/text.hpp"
#include "corpus/corpus.hpp"
#include "corpus/manifest.hpp"
#include "evaluator/evaluate.hpp"
#include "modelzoo/checkpoint.hpp"
#include "trainer/trainer.hpp"

namespace fs = std::filesystem;

namespace derm {
namespace {

void emit(const LogSink& log, const std::string& line) {
  if (log) log(line);
}

std::vector<ImageRecord> records_in(const DatasetManifest& m, Split split) {
  std::vector<ImageRecord> out;
  for (const auto& r : m.records) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

void log_distribution(const LogSink& log, const DatasetManifest& m) {
  std::istringstream in(render_distribution(class_distribution(m)));
  for (std::string line; std::getline(in, line);) emit(log, line);
}

std::string epoch_log_line(const std::string& prefix, const EpochMetrics& m) {
  return prefix + "epoch " + std::to_string(m.epoch) + " train_loss=" + text::format_fixed(m.train_loss, 4) +
         " train_acc=" + text::format_fixed(m.train_accuracy, 4) + " val_loss=" + text::format_fixed(m.val_loss, 4) +
         " val_acc=" + text::format_fixed(m.val_accuracy, 4) + " lr=" + text::format_double(m.learning_rate) +
         " (" + text::format_fixed(m.epoch_seconds, 1) + " s)";
}

// `<run>.log` keeps timings; `<run>.history` is timing-free so identical
// runs produce identical files.
std::vector<fs::path> write_history(const fs::path& runs_dir, const std::string& run,
                                    const std::vector<EpochMetrics>& history) {
  fs::create_directories(runs_dir);
  std::string log, hist;
  for (const auto& m : history) {
    log += format_epoch_line(m) + "\n";
    hist += format_epoch_line(m, false) + "\n";
  }
  const auto log_path = runs_dir / (run + ".log");
  const auto hist_path = runs_dir / (run + ".history");
  text::write_file_atomic(log_path, log);
  text::write_file_atomic(hist_path, hist);
  return {log_path, hist_path};
}

void apply_threads(const TrainConfig& train) {
  if (train.threads > 0) torch::set_num_threads(train.threads);
}

ModelHandle build_handle(const PipelineConfig& config, const LogSink& log) {
  if (config.init == WeightInit::kRandom) {
    emit(log, "warning: backbone initialised randomly (model.init=random); results are not transfer learning");
  }
  return ModelHandle::build(config.backbone, static_cast<std::int64_t>(kNumLabels), config.strategy,
                            config.build_options());
}

std::string lines(const std::vector<fs::path>& paths) {
  std::string out;
  for (const auto& p : paths) out += p.generic_string() + "\n";
  return out;
}

}  // namespace

const std::vector<CommandInfo>& pipeline_commands() {
  static const std::vector<CommandInfo> commands = {
      {"ingest", "Scan the corpus directory and write a manifest of ORIGINAL records", "idempotent"},
      {"split", "Reserve the per-class test set, then split the rest into train/validation", "idempotent"},
      {"augment", "Generate AUGMENTED train records until every class reaches the target size", "idempotent"},
      {"train", "Train one network on train, early-stopping on validation; writes the best checkpoint",
       "idempotent"},
      {"crossval", "k-fold cross-validation over train+validation; keeps the best fold's checkpoint",
       "idempotent"},
      {"evaluate", "Score the test set with a checkpoint; writes the evaluation report", "idempotent"},
      {"serve", "Run the triage HTTP service until interrupted", "append-only"},
      {"incorporate", "Add vetted cases to the manifest as VETTED train records", "idempotent"},
      {"report", "Render the network comparison table from recorded runs", "idempotent"},
  };
  return commands;
}

const CommandInfo* find_command(std::string_view name) {
  for (const auto& c : pipeline_commands()) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

CommandResult run_command(std::string_view name, const PipelineConfig& config, const LogSink& log) {
  config.validate();
  if (name == "ingest") return run_ingest(config, log);
  if (name == "split") return run_split(config, log);
  if (name == "augment") return run_augment(config, log);
  if (name == "train") return run_train(config, log);
  if (name == "crossval") return run_crossval(config, log);
  if (name == "evaluate") return run_evaluate(config, log);
  if (name == "incorporate") return run_incorporate(config, log);
  if (name == "report") return run_report(config, log);
  if (name == "serve") fail(ErrorCode::kInvalidArgument, "serve is not a batch command; use a serve session");
  fail(ErrorCode::kInvalidArgument, "unknown subcommand '" + std::string(name) + "'");
}

CommandResult run_ingest(const PipelineConfig& config, const LogSink& log) {
  auto result = ingest(config.paths.corpus_dir, LabelMapping::defaults());
  for (const auto& p : result.unreadable) emit(log, "skipped unreadable image: " + p.generic_string());
  auto manifest = std::move(result.manifest);
  manifest.seed = config.seed;
  // Vetted records live outside the corpus tree; carry them over.
  if (fs::exists(config.paths.manifest)) {
    const auto previous = load_manifest(config.paths.manifest);
    std::size_t kept = 0;
    for (const auto& r : previous.records) {
      if (r.origin != Origin::kVetted) continue;
      auto copy = r;
      copy.split = Split::kTrain;
      manifest.records.push_back(std::move(copy));
      ++kept;
    }
    if (kept > 0) emit(log, "kept " + std::to_string(kept) + " VETTED records from the previous manifest");
  }
  save_manifest(manifest, config.paths.manifest);
  emit(log, "ingested " + std::to_string(manifest.records.size()) + " records");
  log_distribution(log, manifest);
  return {lines({config.paths.manifest})};
}

CommandResult run_split(const PipelineConfig& config, const LogSink& log) {
  const auto loaded = load_manifest(config.paths.manifest);
  // Re-splitting starts from the ingested state: augmentations depend on the
  // split and are dropped, vetted records stay in train.
  DatasetManifest base;
  base.seed = config.seed;
  std::vector<ImageRecord> vetted;
  std::size_t dropped = 0;
  for (const auto& r : loaded.records) {
    if (r.origin == Origin::kAugmented) {
      ++dropped;
    } else if (r.origin == Origin::kVetted) {
      vetted.push_back(r);
    } else {
      auto copy = r;
      copy.split = Split::kUnassigned;
      base.records.push_back(std::move(copy));
    }
  }
  if (dropped > 0) emit(log, "dropped " + std::to_string(dropped) + " AUGMENTED records; re-run augment");
  auto spec = config.split;
  spec.seed = config.seed;
  auto manifest = base;
  if (spec.test_count_per_class > 0) manifest = reserve_test_set(manifest, spec);
  manifest = stratified_split(manifest, spec);
  for (auto& r : vetted) {
    r.split = Split::kTrain;
    manifest.records.push_back(std::move(r));
  }
  manifest.seed = config.seed;
  save_manifest(manifest, config.paths.manifest);
  log_distribution(log, manifest);
  return {lines({config.paths.manifest})};
}

CommandResult run_augment(const PipelineConfig& config, const LogSink& log) {
  const auto loaded = load_manifest(config.paths.manifest);
  DatasetManifest base = loaded;
  base.records.clear();
  for (const auto& r : loaded.records) {
    if (r.origin != Origin::kAugmented) base.records.push_back(r);
  }
  auto plan = config.augment;
  plan.seed = config.seed;
  plan.output_dir = config.paths.augment_dir;
  AugmentReport report;
  auto manifest = augment_to_target(base, plan, &report);
  save_manifest(manifest, config.paths.manifest);
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    if (report.added[c] > 0) {
      emit(log, std::string(to_string(label_at(c))) + ": +" + std::to_string(report.added[c]) + " augmented");
    }
  }
  emit(log, "added " + std::to_string(report.total_added()) + " augmented records");
  log_distribution(log, manifest);
  return {lines({config.paths.manifest})};
}

CommandResult run_train(const PipelineConfig& config, const LogSink& log) {
  const auto manifest = load_manifest(config.paths.manifest);
  const auto train_records = records_in(manifest, Split::kTrain);
  const auto val_records = records_in(manifest, Split::kValidation);
  if (train_records.empty()) fail(ErrorCode::kInvalidArgument, "manifest has no TRAIN records; run split first");
  if (val_records.empty()) fail(ErrorCode::kInvalidArgument, "manifest has no VALIDATION records; run split first");
  apply_threads(config.train);

  const auto run = config.effective_run_name(false);
  fs::create_directories(config.paths.checkpoint_dir);
  auto handle = build_handle(config, log);
  emit(log, "training " + run + ": " + std::to_string(train_records.size()) + " train / " +
                std::to_string(val_records.size()) + " validation records");

  auto train_config = config.train;
  train_config.seed = config.seed;
  TrainOptions options;
  options.checkpoint_path = config.paths.checkpoint_dir / run;
  options.config_digest = config.digest();
  options.on_epoch = [&](const EpochMetrics& m) { emit(log, epoch_log_line("", m)); };
  const auto result = train(handle, train_records, val_records, train_config, options);

  auto paths = write_history(config.paths.runs_dir, run, result.history);
  const auto summary_path = config.paths.runs_dir / (run + ".summary.tsv");
  write_run_summary(summary_path, result.summary(run));
  emit(log, "best epoch " + std::to_string(result.best_epoch) + ": val_acc=" +
                text::format_fixed(result.best().val_accuracy, 4) + (result.stopped_early ? " (stopped early)" : ""));
  paths.insert(paths.begin(), summary_path);
  paths.insert(paths.begin(), CheckpointPaths::from(result.best_checkpoint_path).weights);
  return {lines(paths)};
}

CommandResult run_crossval(const PipelineConfig& config, const LogSink& log) {
  const auto manifest = load_manifest(config.paths.manifest);
  const auto partitions = kfold_partitions(manifest, config.train.k_folds, config.seed);
  std::vector<std::vector<ImageRecord>> folds;
  for (const auto& f : partitions) {
    auto& fold = folds.emplace_back();
    for (auto i : f) fold.push_back(manifest.records[i]);
  }
  apply_threads(config.train);

  const auto run = config.effective_run_name(true);
  fs::create_directories(config.paths.checkpoint_dir);
  bool warned = false;
  HandleFactory factory = [&] {
    auto h = build_handle(config, warned ? LogSink{} : log);
    warned = true;
    return h;
  };
  auto train_config = config.train;
  train_config.seed = config.seed;
  CrossValidationOptions options;
  options.checkpoint_dir = config.paths.checkpoint_dir;
  options.run_name = run;
  options.config_digest = config.digest();
  options.on_epoch = [&](std::size_t fold, const EpochMetrics& m) {
    emit(log, epoch_log_line("fold " + std::to_string(fold + 1) + " ", m));
  };
  const auto cv = cross_validate(factory, folds, train_config, options);

  std::vector<fs::path> paths;
  double minutes = 0.0;
  for (std::size_t i = 0; i < cv.runs.size(); ++i) {
    auto p = write_history(config.paths.runs_dir, run + "-fold" + std::to_string(i + 1), cv.runs[i].history);
    paths.insert(paths.end(), p.begin(), p.end());
    minutes += cv.runs[i].total_minutes;
  }
  const auto& best = cv.runs.at(cv.best_fold);
  RunSummary summary = best.summary(run);
  summary.validation_accuracy = cv.mean_val_accuracy;
  summary.total_minutes = minutes;
  summary.evaluation = "cv_mean";
  summary.checkpoint = CheckpointPaths::from(cv.best_checkpoint_path).weights.generic_string();
  const auto summary_path = config.paths.runs_dir / (run + ".summary.tsv");
  write_run_summary(summary_path, summary);
  emit(log, "cross-validation: mean val_acc=" + text::format_fixed(cv.mean_val_accuracy, 4) +
                " std=" + text::format_fixed(cv.std_val_accuracy, 4) + " best fold " +
                std::to_string(cv.best_fold + 1));
  paths.insert(paths.begin(), summary_path);
  paths.insert(paths.begin(), CheckpointPaths::from(cv.best_checkpoint_path).weights);
  return {lines(paths)};
}

CommandResult run_evaluate(const PipelineConfig& config, const LogSink& log) {
  if (!config.checkpoint) fail(ErrorCode::kInvalidArgument, "evaluate needs a checkpoint (--checkpoint)");
  auto loaded = load_checkpoint(*config.checkpoint);
  const auto manifest = load_manifest(config.paths.manifest);
  const auto test_records = records_in(manifest, Split::kTest);
  apply_threads(config.train);

  EvalOptions options;
  options.network = loaded.metadata.backbone;
  options.model_digest = loaded.metadata.digest();
  auto report = evaluate(loaded.handle, test_records, options);
  for (const auto& f : report.failures) emit(log, "evaluation failure " + f.record_id + ": " + f.reason);
  emit(log, "top-1 " + text::format_fixed(100.0 * report.top1_accuracy, 2) + "% over " +
                std::to_string(report.evaluated) + " images; mean latency " +
                text::format_fixed(1000.0 * report.latency.mean_seconds, 1) + " ms");

  const auto stem = CheckpointPaths::from(*config.checkpoint).weights.stem().string();
  const auto path = config.paths.reports_dir / (stem + ".eval.txt");
  write_eval_report(path, report);
  return {lines({path})};
}

CommandResult run_incorporate(const PipelineConfig& config, const LogSink& log) {
  ServiceOptions options;
  options.store_dir = config.paths.store_dir;
  options.manifest_path = config.paths.manifest;
  TriageService service(options);
  const auto report = service.incorporate_vetted();
  emit(log, "incorporated " + std::to_string(report.incorporated.size()) + " cases" +
                (report.reconciled.empty() ? std::string()
                                           : ", reconciled " + std::to_string(report.reconciled.size())));
  return {lines({report.manifest})};
}

CommandResult run_report(const PipelineConfig& config, const LogSink& log) {
  if (!fs::is_directory(config.paths.runs_dir)) {
    fail(ErrorCode::kNotFound, "no runs directory at " + config.paths.runs_dir.string());
  }
  std::vector<fs::path> summaries;
  for (const auto& e : fs::directory_iterator(config.paths.runs_dir)) {
    const auto name = e.path().filename().string();
    if (name.ends_with(".summary.tsv")) summaries.push_back(e.path());
  }
  std::sort(summaries.begin(), summaries.end());
  if (summaries.empty()) fail(ErrorCode::kNotFound, "no run summaries under " + config.paths.runs_dir.string());

  std::vector<ComparisonEntry> entries;
  for (const auto& p : summaries) {
    const auto s = read_run_summary(p);
    ComparisonEntry e;
    e.network = s.network;
    e.strategy = s.strategy;
    e.validation_accuracy = s.validation_accuracy;
    e.training_minutes = s.total_minutes;
    if (!s.checkpoint.empty()) {
      const auto eval = config.paths.reports_dir / (fs::path(s.checkpoint).stem().string() + ".eval.txt");
      if (fs::exists(eval)) e.test_top1 = read_eval_report(eval).top1_accuracy;
    }
    entries.push_back(std::move(e));
  }
  const auto table = compare_runs(std::move(entries));
  fs::create_directories(config.paths.reports_dir);
  const auto txt = config.paths.reports_dir / "comparison.txt";
  const auto tsv = config.paths.reports_dir / "comparison.tsv";
  text::write_file_atomic(txt, table.to_text());
  text::write_file_atomic(tsv, table.to_tsv());
  emit(log, "wrote " + txt.generic_string() + " and " + tsv.generic_string());
  return {table.to_text()};
}

ServeSession::ServeSession(const PipelineConfig& config, const LogSink& log) : config_(config), log_(log) {
  config_.validate();
  ServiceOptions options;
  options.store_dir = config_.paths.store_dir;
  options.manifest_path = config_.paths.manifest;
  options.checkpoint_dir = config_.paths.checkpoint_dir;
  service_ = std::make_unique<TriageService>(options);
  if (config_.checkpoint) {
    const auto info = service_->activate_checkpoint(*config_.checkpoint);
    emit(log_, "active model " + info.digest + " (" + info.network + ")");
  } else {
    emit(log_, "no checkpoint configured; submissions return 503 until POST /admin/model");
  }
  api_ = std::make_unique<HttpApi>(*service_);
}

ServeSession::~ServeSession() { stop(); }

int ServeSession::bind() {
  const auto [host, port] = config_.listen_address();
  const int bound = api_->bind(host, port);
  emit(log_, "listening on " + host + ":" + std::to_string(bound));
  return bound;
}

void ServeSession::serve() {
  api_->serve();
  service_->store().flush();
  emit(log_, "service stopped; store flushed");
}

void ServeSession::stop() {
  if (api_) api_->stop();
}

}  // namespace derm
