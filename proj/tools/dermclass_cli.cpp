// dermclass command-line front end. Links only the C interface.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>
#include <unistd.h>

#include <CLI11.hpp>

#include "dermclass/dermclass.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Overrides {
  std::optional<std::string> config_file;
  std::vector<std::pair<std::string, std::string>> values;
  std::vector<std::string> raw_sets;
};

struct Failure {
  dc_status status;
  std::string message;
};

void check(dc_status s) {
  if (s != DC_OK) throw Failure{s, dc_last_error()};
}

void on_log(void*, const char* line) { std::fprintf(stderr, "%s\n", line); }

// Registers a flag that becomes `key=value` in the configuration.
void bind_flag(CLI::App* app, Overrides& ov, const std::string& flag, const std::string& key,
               const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&ov, key](const std::string& v) { ov.values.emplace_back(key, v); }, help + " [" + key + "]");
}

void add_common(CLI::App* app, Overrides& ov) {
  app->add_option("--config", ov.config_file, "Configuration file (key = value lines; flags override it)");
  bind_flag(app, ov, "--seed", "seed", "Seed for splitting, augmentation and training");
  bind_flag(app, ov, "--manifest", "paths.manifest", "Dataset manifest path");
  app->add_option("--set", ov.raw_sets, "Override any configuration key, as key=value (repeatable)");
}

void add_model_flags(CLI::App* app, Overrides& ov) {
  bind_flag(app, ov, "--backbone", "model.backbone", "Backbone network");
  bind_flag(app, ov, "--strategy", "model.strategy", "Tuning strategy: head_only or full");
  bind_flag(app, ov, "--run-name", "run.name", "Run name (default <backbone>-<strategy>)");
  bind_flag(app, ov, "--checkpoint-dir", "paths.checkpoint_dir", "Directory for checkpoints");
  bind_flag(app, ov, "--runs-dir", "paths.runs_dir", "Directory for run logs and summaries");
  bind_flag(app, ov, "--weights-dir", "paths.weights_dir", "Directory holding <backbone>.pretrained.pt files");
  bind_flag(app, ov, "--epochs", "train.max_epochs", "Maximum epochs");
  bind_flag(app, ov, "--batch-size", "train.batch_size", "Mini-batch size");
  bind_flag(app, ov, "--lr", "train.learning_rate", "Initial learning rate");
  bind_flag(app, ov, "--patience", "train.patience", "Early-stopping patience in epochs");
  bind_flag(app, ov, "--threads", "train.threads", "Intra-op threads (1 for reproducible histories)");
  app->add_flag_callback(
      "--allow-random-init", [&ov] { ov.values.emplace_back("model.init", "random"); },
      "Initialise the backbone randomly when no pretrained weights are available [model.init]");
}

std::string describe(const char* name) {
  for (size_t i = 0; i < dc_command_count(); ++i) {
    if (std::string(dc_command_name(i)) == name) {
      return std::string(dc_command_summary(i)) + " [" + dc_command_semantics(i) + "]";
    }
  }
  return {};
}

dc_config* make_config(const Overrides& ov) {
  dc_config* config = nullptr;
  check(dc_config_create(&config));
  try {
    if (ov.config_file) check(dc_config_load(config, ov.config_file->c_str()));
    for (const auto& raw : ov.raw_sets) {
      const auto eq = raw.find('=');
      if (eq == std::string::npos) throw Failure{DC_ERR_INVALID_ARGUMENT, "--set expects key=value, got " + raw};
      check(dc_config_set(config, raw.substr(0, eq).c_str(), raw.substr(eq + 1).c_str()));
    }
    for (const auto& [key, value] : ov.values) check(dc_config_set(config, key.c_str(), value.c_str()));
    check(dc_config_validate(config));
  } catch (...) {
    dc_config_destroy(config);
    throw;
  }
  return config;
}

int run_batch(const std::string& command, const Overrides& ov) {
  dc_config* config = make_config(ov);
  char* output = nullptr;
  const auto status = dc_pipeline_run(config, command.c_str(), &output);
  dc_config_destroy(config);
  if (status != DC_OK) throw Failure{status, dc_last_error()};
  std::fputs(output, stdout);
  dc_string_free(output);
  return kExitOk;
}

int run_serve(const Overrides& ov) {
  dc_config* config = make_config(ov);
  dc_service* service = nullptr;
  const auto created = dc_service_create(config, &service);
  dc_config_destroy(config);
  if (created != DC_OK) throw Failure{created, dc_last_error()};

  int port = 0;
  if (dc_service_bind(service, &port) != DC_OK) {
    Failure f{DC_ERR_IO, dc_last_error()};
    dc_service_destroy(service);
    throw f;
  }
  std::printf("http://localhost:%d\n", port);
  std::fflush(stdout);

  // Termination signals are taken synchronously on this thread; the server
  // thread inherits the blocked mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  dc_status run_status = DC_OK;
  std::string run_error;
  std::thread server([&] {
    run_status = dc_service_run(service);
    if (run_status != DC_OK) run_error = dc_last_error();
    kill(getpid(), SIGTERM);
  });
  int received = 0;
  sigwait(&signals, &received);
  dc_service_stop(service);
  server.join();
  dc_service_destroy(service);
  if (run_status != DC_OK) throw Failure{run_status, run_error};
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  dc_set_log_callback(on_log, nullptr);

  CLI::App app{"dermclass: skin-condition image classification pipeline and triage service"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dc_version());
  app.footer(
      "Every subcommand accepts --config, --seed, --manifest and --set key=value.\n"
      "Artifact paths go to standard output, progress to standard error.\n"
      "Exit status: 0 success, 1 operational failure, 2 usage error.");

  Overrides ov;
  std::map<CLI::App*, std::string> names;
  auto sub = [&](const char* name) {
    auto* s = app.add_subcommand(name, describe(name));
    add_common(s, ov);
    names[s] = name;
    return s;
  };

  auto* ingest = sub("ingest");
  bind_flag(ingest, ov, "--corpus", "paths.corpus_dir", "Corpus root (one folder per label, or labels.tsv)");

  auto* split = sub("split");
  bind_flag(split, ov, "--test-per-class", "split.test_per_class", "Test images reserved per class");
  bind_flag(split, ov, "--validation-fraction", "split.validation_fraction", "Validation share of the rest");

  auto* augment = sub("augment");
  bind_flag(augment, ov, "--target", "augment.target_per_class", "Train images per class after augmentation");
  bind_flag(augment, ov, "--augment-dir", "paths.augment_dir", "Directory for generated images");

  auto* train = sub("train");
  add_model_flags(train, ov);

  auto* crossval = sub("crossval");
  add_model_flags(crossval, ov);
  bind_flag(crossval, ov, "--folds", "train.k_folds", "Number of folds");

  auto* evaluate = sub("evaluate");
  bind_flag(evaluate, ov, "--checkpoint", "model.checkpoint", "Checkpoint to evaluate (.weights, .meta or stem)");
  bind_flag(evaluate, ov, "--reports-dir", "paths.reports_dir", "Directory for evaluation reports");
  bind_flag(evaluate, ov, "--threads", "train.threads", "Intra-op threads");

  auto* serve = sub("serve");
  bind_flag(serve, ov, "--checkpoint", "model.checkpoint", "Checkpoint to activate at start-up");
  bind_flag(serve, ov, "--checkpoint-dir", "paths.checkpoint_dir", "Directory searched for activation by digest");
  bind_flag(serve, ov, "--listen", "service.listen", "Listen address host:port (port 0 picks one)");
  bind_flag(serve, ov, "--store", "paths.store_dir", "Case store directory");

  auto* incorporate = sub("incorporate");
  bind_flag(incorporate, ov, "--store", "paths.store_dir", "Case store directory");

  auto* report = sub("report");
  bind_flag(report, ov, "--runs-dir", "paths.runs_dir", "Directory of run summaries");
  bind_flag(report, ov, "--reports-dir", "paths.reports_dir", "Directory of evaluation reports and output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  std::string command;
  for (auto* s : app.get_subcommands()) command = names[s];

  try {
    if (command == "serve") return run_serve(ov);
    return run_batch(command, ov);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return kExitFailure;
  }
}
