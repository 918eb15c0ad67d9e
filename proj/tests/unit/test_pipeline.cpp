#include "doctest_torch.hpp"

#include "common/error.hpp"
#include "common/text.hpp"
#include "corpus/manifest.hpp"
#include "evaluator/evaluate.hpp"
#include "fixtures.hpp"
#include "modelzoo/checkpoint.hpp"
#include "pipeline/commands.hpp"
#include "trainer/trainer.hpp"

using namespace derm;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config(const fs::path& root) {
  PipelineConfig c;
  c.paths.corpus_dir = root / "corpus";
  c.paths.manifest = root / "manifest.tsv";
  c.paths.checkpoint_dir = root / "checkpoints";
  c.paths.store_dir = root / "store";
  c.paths.runs_dir = root / "runs";
  c.paths.reports_dir = root / "reports";
  c.paths.augment_dir = root / "augmented";
  c.paths.weights_dir = root / "weights";
  c.set("seed", "11");
  c.set("model.init", "random");
  c.set("model.resize", "32");
  c.set("model.crop", "32");
  c.set("split.test_per_class", "2");
  c.set("augment.target_per_class", "8");
  c.set("train.max_epochs", "2");
  c.set("train.batch_size", "8");
  c.set("train.learning_rate", "0.01");
  c.set("train.threads", "1");
  return c;
}

std::vector<std::string> output_lines(const CommandResult& r) {
  std::vector<std::string> out;
  std::istringstream in(r.output);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_SUITE("pipeline config") {
  TEST_CASE("text form parses, ignores comments and names bad lines") {
    const auto c = parse_pipeline_config("# a comment\nseed = 7\n\ntrain.batch_size=24\nmodel.backbone = ResNet50\n");
    CHECK(c.seed == 7);
    CHECK(c.split.seed == 7);
    CHECK(c.train.seed == 7);
    CHECK(c.train.batch_size == 24);
    CHECK(c.get("model.backbone") == "resnet50");
    try {
      parse_pipeline_config("seed = 1\ntrain.bogus = 3\n");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidArgument);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
      CHECK(std::string(e.what()).find("train.bogus") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_pipeline_config("train.batch_size = many\n"), Error);
    CHECK_THROWS_AS(parse_pipeline_config("no equals sign\n"), Error);
  }

  TEST_CASE("every key round-trips through get and set") {
    PipelineConfig a;
    PipelineConfig b;
    for (const auto& key : config_keys()) b.set(key, a.get(key));
    CHECK(a.canonical_text() == b.canonical_text());
    CHECK(a.digest() == b.digest());
    CHECK(a.digest().size() == 16);
  }

  TEST_CASE("later values win and the digest ignores line order") {
    TempDir dir;
    text::write_file_atomic(dir / "p.conf", "train.max_epochs = 5\nseed = 3\n");
    auto c = load_pipeline_config(dir / "p.conf");
    CHECK(c.train.max_epochs == 5);
    c.set("train.max_epochs", "9");
    CHECK(c.train.max_epochs == 9);
    const auto reordered = parse_pipeline_config("seed = 3\ntrain.max_epochs = 9\n");
    CHECK(reordered.digest() == c.digest());
    CHECK(parse_pipeline_config("seed = 4\n").digest() != c.digest());
    CHECK_THROWS_AS(load_pipeline_config(dir / "missing.conf"), Error);
  }

  TEST_CASE("validation and derived names") {
    PipelineConfig c;
    CHECK(c.effective_run_name(false) == "resnet18-full");
    c.set("model.strategy", "head_only");
    CHECK(c.effective_run_name(true) == "resnet18-head_only-cv");
    c.set("run.name", "mine");
    CHECK(c.effective_run_name(false) == "mine");
    c.set("service.listen", "0.0.0.0:9000");
    CHECK(c.listen_address() == std::pair<std::string, int>{"0.0.0.0", 9000});
    CHECK_THROWS_AS(c.set("model.backbone", "vgg16"), Error);
    CHECK_THROWS_AS(c.set("model.strategy", "partial"), Error);
    c.set("train.learning_rate", "0");
    CHECK_THROWS_AS(c.validate(), Error);
  }
}

TEST_SUITE("pipeline commands") {
  TEST_CASE("command table") {
    CHECK(pipeline_commands().size() == 9);
    for (const auto& c : pipeline_commands()) {
      CHECK(c.rerun_semantics == (c.name == "serve" ? "append-only" : "idempotent"));
    }
    CHECK(find_command("train"));
    CHECK_FALSE(find_command("deploy"));
    PipelineConfig c;
    CHECK_THROWS_AS(run_command("serve", c), Error);
    CHECK_THROWS_AS(run_command("deploy", c), Error);
  }

  TEST_CASE("end to end on a small synthetic corpus") {
    TempDir dir;
    testsupport::write_class_tree(dir / "corpus", 8, 32);
    const auto config = small_config(dir.path());
    std::vector<std::string> log;
    const LogSink sink = [&](std::string_view l) { log.emplace_back(l); };

    run_command("ingest", config, sink);
    auto manifest = load_manifest(config.paths.manifest);
    CHECK(manifest.records.size() == 72);
    for (const auto& r : manifest.records) CHECK(fs::path(r.path).is_absolute());

    run_command("split", config, sink);
    const auto first_split = text::read_file(config.paths.manifest);
    run_command("split", config, sink);
    CHECK(text::read_file(config.paths.manifest) == first_split);
    manifest = load_manifest(config.paths.manifest);
    const auto dist = class_distribution(manifest);
    for (const auto& d : dist) {
      CHECK(d.test == 2);
      CHECK(d.validation == 1);
      CHECK(d.train == 5);
    }

    run_command("augment", config, sink);
    const auto first_augment = text::read_file(config.paths.manifest);
    for (const auto& d : class_distribution(load_manifest(config.paths.manifest))) CHECK(d.train == 8);
    CHECK(fs::is_directory(config.paths.augment_dir / "Acne"));
    run_command("augment", config, sink);
    CHECK(text::read_file(config.paths.manifest) == first_augment);
    // Re-ingesting does not pick up generated images.
    run_command("ingest", config, sink);
    CHECK(load_manifest(config.paths.manifest).records.size() == 72);
    run_command("split", config, sink);
    run_command("augment", config, sink);
    CHECK(text::read_file(config.paths.manifest) == first_augment);

    log.clear();
    const auto trained = output_lines(run_command("train", config, sink));
    REQUIRE(trained.size() >= 2);
    CHECK(fs::exists(trained[0]));
    CHECK(trained[0] == (config.paths.checkpoint_dir / "resnet18-full.weights").generic_string());
    CHECK(std::any_of(log.begin(), log.end(), [](const std::string& l) { return l.find("warning") == 0; }));
    const auto summary = read_run_summary(config.paths.runs_dir / "resnet18-full.summary.tsv");
    CHECK(summary.network == "ResNet18");
    CHECK(summary.strategy == "FULL");
    CHECK(summary.best_epoch >= 1);
    const auto meta = read_checkpoint_metadata(trained[0]);
    CHECK(meta.config_digest == config.digest());
    const auto history = text::read_file(config.paths.runs_dir / "resnet18-full.history");

    // Same seed, same history.
    run_command("train", config, sink);
    CHECK(text::read_file(config.paths.runs_dir / "resnet18-full.history") == history);

    auto eval_config = config;
    eval_config.checkpoint = trained[0];
    const auto eval_out = output_lines(run_command("evaluate", eval_config, sink));
    REQUIRE(eval_out.size() == 1);
    const auto report = read_eval_report(eval_out[0]);
    CHECK(report.evaluated == 18);
    CHECK(report.model_digest == meta.digest());

    const auto table = run_command("report", config, sink).output;
    CHECK(table.find("ResNet18") != std::string::npos);
    CHECK(fs::exists(config.paths.reports_dir / "comparison.tsv"));
    const auto tsv = text::read_file(config.paths.reports_dir / "comparison.tsv");
    CHECK(tsv.find(text::format_fixed(report.top1_accuracy * 100.0, 2) + "%") != std::string::npos);

    // Serve, vet one case, then incorporate from the batch command.
    {
      ServeSession session(eval_config, sink);
      const auto png = testsupport::encode_png(testsupport::class_image(4, 0, 32));
      const auto c = session.service().submit_case(
          std::span(reinterpret_cast<const std::uint8_t*>(png.data()), png.size()));
      CHECK(c.model_digest == meta.digest());
      VettingDecision d;
      d.case_id = c.case_id;
      d.verdict = Verdict::kCorrect;
      d.corrected_label = DiseaseLabel::kPustule;
      d.vetter_id = "dr-e";
      session.service().record_vetting(d);
      session.service().store().flush();
    }
    run_command("incorporate", config, sink);
    manifest = load_manifest(config.paths.manifest);
    CHECK(std::count_if(manifest.records.begin(), manifest.records.end(),
                        [](const ImageRecord& r) { return r.origin == Origin::kVetted; }) == 1);
    const auto after_incorporate = text::read_file(config.paths.manifest);
    run_command("incorporate", config, sink);
    CHECK(text::read_file(config.paths.manifest) == after_incorporate);

    // The vetted record survives re-ingest and re-split, in train.
    run_command("ingest", config, sink);
    run_command("split", config, sink);
    manifest = load_manifest(config.paths.manifest);
    bool found = false;
    for (const auto& r : manifest.records) {
      if (r.origin != Origin::kVetted) continue;
      found = true;
      CHECK(r.split == Split::kTrain);
      CHECK(r.label == DiseaseLabel::kPustule);
    }
    CHECK(found);
  }

  TEST_CASE("batch commands report missing inputs") {
    TempDir dir;
    const auto config = small_config(dir.path());
    CHECK_THROWS_AS(run_command("ingest", config), Error);
    CHECK_THROWS_AS(run_command("split", config), Error);
    CHECK_THROWS_AS(run_command("evaluate", config), Error);
    CHECK_THROWS_AS(run_command("report", config), Error);
  }
}
