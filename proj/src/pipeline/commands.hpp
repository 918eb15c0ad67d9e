#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "pipeline/config.hpp"
#include "service/http_api.hpp"
#include "service/triage_service.hpp"

namespace derm {

using LogSink = std::function<void(std::string_view)>;

struct CommandInfo {
  std::string name;
  std::string summary;
  // "idempotent" or "append-only"
  std::string rerun_semantics;
};

const std::vector<CommandInfo>& pipeline_commands();
const CommandInfo* find_command(std::string_view name);

// Text bound for standard output: artifact paths one per line, or the
// rendered table for `report`. Progress goes to the log sink.
struct CommandResult {
  std::string output;
};

// Runs a batch subcommand (everything except `serve`).
CommandResult run_command(std::string_view name, const PipelineConfig& config, const LogSink& log = {});

CommandResult run_ingest(const PipelineConfig& config, const LogSink& log);
CommandResult run_split(const PipelineConfig& config, const LogSink& log);
CommandResult run_augment(const PipelineConfig& config, const LogSink& log);
CommandResult run_train(const PipelineConfig& config, const LogSink& log);
CommandResult run_crossval(const PipelineConfig& config, const LogSink& log);
CommandResult run_evaluate(const PipelineConfig& config, const LogSink& log);
CommandResult run_incorporate(const PipelineConfig& config, const LogSink& log);
CommandResult run_report(const PipelineConfig& config, const LogSink& log);

// The `serve` subcommand: service plus HTTP front end, activated from
// `model.checkpoint` when set.
class ServeSession {
 public:
  ServeSession(const PipelineConfig& config, const LogSink& log);
  ~ServeSession();

  // Returns the bound port.
  int bind();
  // Blocks until stop(); the store is flushed on return.
  void serve();
  void stop();

  TriageService& service() { return *service_; }

 private:
  PipelineConfig config_;
  LogSink log_;
  std::unique_ptr<TriageService> service_;
  std::unique_ptr<HttpApi> api_;
};

}  // namespace derm
