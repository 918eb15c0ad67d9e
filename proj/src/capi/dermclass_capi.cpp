#include "dermclass/dermclass.h"

#include <cstring>
#include <mutex>
#include <exception>
#include <string>

#include "common/error.hpp"
#include "corpus/corpus.hpp"
#include "corpus/image_io.hpp"
#include "corpus/manifest.hpp"
#include "modelzoo/checkpoint.hpp"
#include "pipeline/commands.hpp"
#include "pipeline/config.hpp"

struct dc_config {
  derm::PipelineConfig config;
};

struct dc_manifest {
  derm::DatasetManifest manifest;
};

struct dc_model {
  derm::ModelHandle handle;
  derm::CheckpointMetadata metadata;
  std::mutex mutex;
};

struct dc_service {
  std::unique_ptr<derm::ServeSession> session;
};

namespace {

thread_local std::string last_error;

std::mutex log_mutex;
dc_log_fn log_fn = nullptr;
void* log_user = nullptr;

void log_line(std::string_view line) {
  std::lock_guard lock(log_mutex);
  if (log_fn) log_fn(log_user, std::string(line).c_str());
}

derm::LogSink sink() { return [](std::string_view line) { log_line(line); }; }

dc_status status_of(derm::ErrorCode code) {
  using derm::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return DC_ERR_INVALID_ARGUMENT;
    case ErrorCode::kNotFound: return DC_ERR_NOT_FOUND;
    case ErrorCode::kIo: return DC_ERR_IO;
    case ErrorCode::kCorrupt: return DC_ERR_CORRUPT;
    case ErrorCode::kBackboneMismatch: return DC_ERR_BACKBONE_MISMATCH;
    case ErrorCode::kLabelOrderMismatch: return DC_ERR_LABEL_ORDER_MISMATCH;
    case ErrorCode::kConflict: return DC_ERR_CONFLICT;
    case ErrorCode::kUnavailable: return DC_ERR_UNAVAILABLE;
    case ErrorCode::kNumerical: return DC_ERR_NUMERICAL;
    case ErrorCode::kInternal: return DC_ERR_INTERNAL;
  }
  return DC_ERR_INTERNAL;
}

template <typename F>
dc_status guard(F&& body) {
  last_error.clear();
  try {
    body();
    return DC_OK;
  } catch (const derm::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return DC_ERR_INTERNAL;
  } catch (const std::filesystem::filesystem_error& e) {
    last_error = e.what();
    return DC_ERR_IO;
  } catch (const std::exception& e) {
    last_error = e.what();
    return DC_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return DC_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) derm::fail(derm::ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  require(out, "output pointer");
  *out = dup(s);
}

void copy_scores(const derm::ScoreVector& v, double* scores) {
  for (std::size_t i = 0; i < derm::kNumLabels; ++i) scores[i] = v.probabilities[i];
}

}  // namespace

extern "C" {

const char* dc_version(void) { return "0.1.0"; }

const char* dc_last_error(void) { return last_error.c_str(); }

const char* dc_status_name(dc_status status) {
  switch (status) {
    case DC_OK: return "ok";
    case DC_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case DC_ERR_NOT_FOUND: return "not_found";
    case DC_ERR_IO: return "io";
    case DC_ERR_CORRUPT: return "corrupt";
    case DC_ERR_BACKBONE_MISMATCH: return "backbone_mismatch";
    case DC_ERR_LABEL_ORDER_MISMATCH: return "label_order_mismatch";
    case DC_ERR_CONFLICT: return "conflict";
    case DC_ERR_UNAVAILABLE: return "unavailable";
    case DC_ERR_NUMERICAL: return "numerical";
    case DC_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void dc_string_free(char* s) { std::free(s); }

void dc_set_log_callback(dc_log_fn fn, void* user) {
  std::lock_guard lock(log_mutex);
  log_fn = fn;
  log_user = user;
}

size_t dc_label_count(void) { return derm::kNumLabels; }

const char* dc_label_name(size_t index) {
  if (index >= derm::kNumLabels) return nullptr;
  return derm::to_string(derm::label_at(index)).data();
}

dc_status dc_config_create(dc_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new dc_config();
  });
}

void dc_config_destroy(dc_config* config) { delete config; }

dc_status dc_config_load(dc_config* config, const char* path) {
  return guard([&] {
    require(config, "config");
    require(path, "path");
    config->config = derm::load_pipeline_config(path, config->config);
  });
}

dc_status dc_config_set(dc_config* config, const char* key, const char* value) {
  return guard([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->config.set(key, value);
  });
}

dc_status dc_config_get(const dc_config* config, const char* key, char** out) {
  return guard([&] {
    require(config, "config");
    require(key, "key");
    put(out, config->config.get(key));
  });
}

dc_status dc_config_validate(const dc_config* config) {
  return guard([&] {
    require(config, "config");
    config->config.validate();
  });
}

dc_status dc_config_canonical_text(const dc_config* config, char** out) {
  return guard([&] {
    require(config, "config");
    put(out, config->config.canonical_text());
  });
}

dc_status dc_config_digest(const dc_config* config, char** out) {
  return guard([&] {
    require(config, "config");
    put(out, config->config.digest());
  });
}

size_t dc_config_key_count(void) { return derm::config_keys().size(); }

const char* dc_config_key_at(size_t index) {
  const auto& keys = derm::config_keys();
  return index < keys.size() ? keys[index].c_str() : nullptr;
}

size_t dc_command_count(void) { return derm::pipeline_commands().size(); }

const char* dc_command_name(size_t index) {
  const auto& c = derm::pipeline_commands();
  return index < c.size() ? c[index].name.c_str() : nullptr;
}

const char* dc_command_summary(size_t index) {
  const auto& c = derm::pipeline_commands();
  return index < c.size() ? c[index].summary.c_str() : nullptr;
}

const char* dc_command_semantics(size_t index) {
  const auto& c = derm::pipeline_commands();
  return index < c.size() ? c[index].rerun_semantics.c_str() : nullptr;
}

dc_status dc_pipeline_run(const dc_config* config, const char* command, char** output) {
  return guard([&] {
    require(config, "config");
    require(command, "command");
    const auto result = derm::run_command(command, config->config, sink());
    if (output) *output = dup(result.output);
  });
}

dc_status dc_manifest_load(const char* path, dc_manifest** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    auto m = std::make_unique<dc_manifest>();
    m->manifest = derm::load_manifest(path);
    *out = m.release();
  });
}

void dc_manifest_destroy(dc_manifest* manifest) { delete manifest; }

size_t dc_manifest_size(const dc_manifest* manifest) { return manifest ? manifest->manifest.records.size() : 0; }

dc_status dc_manifest_count(const dc_manifest* manifest, const char* label, const char* split, size_t* out) {
  return guard([&] {
    require(manifest, "manifest");
    require(out, "out");
    std::optional<derm::DiseaseLabel> want_label;
    if (label) {
      want_label = derm::parse_label(label);
      if (!want_label) derm::fail(derm::ErrorCode::kInvalidArgument, std::string("unknown label ") + label);
    }
    std::optional<derm::Split> want_split;
    if (split) {
      want_split = derm::parse_split(split);
      if (!want_split) derm::fail(derm::ErrorCode::kInvalidArgument, std::string("unknown split ") + split);
    }
    std::size_t n = 0;
    for (const auto& r : manifest->manifest.records) {
      if (want_label && r.label != *want_label) continue;
      if (want_split && r.split != *want_split) continue;
      ++n;
    }
    *out = n;
  });
}

dc_status dc_manifest_distribution(const dc_manifest* manifest, char** out) {
  return guard([&] {
    require(manifest, "manifest");
    put(out, derm::render_distribution(derm::class_distribution(manifest->manifest)));
  });
}

dc_status dc_model_load(const char* checkpoint, dc_model** out) {
  return guard([&] {
    require(checkpoint, "checkpoint");
    require(out, "out");
    auto loaded = derm::load_checkpoint(checkpoint);
    auto m = std::make_unique<dc_model>();
    m->handle = std::move(loaded.handle);
    m->metadata = std::move(loaded.metadata);
    *out = m.release();
  });
}

void dc_model_destroy(dc_model* model) { delete model; }

dc_status dc_model_predict_file(dc_model* model, const char* image_path, double* scores) {
  return guard([&] {
    require(model, "model");
    require(image_path, "image_path");
    require(scores, "scores");
    const auto image = derm::decode_image_file(image_path);
    std::lock_guard lock(model->mutex);
    copy_scores(model->handle.predict_scores(image), scores);
  });
}

dc_status dc_model_predict_bytes(dc_model* model, const uint8_t* data, size_t size, double* scores) {
  return guard([&] {
    require(model, "model");
    require(data, "data");
    require(scores, "scores");
    const auto image = derm::decode_image_bytes(std::span(data, size));
    std::lock_guard lock(model->mutex);
    copy_scores(model->handle.predict_scores(image), scores);
  });
}

dc_status dc_model_digest(const dc_model* model, char** out) {
  return guard([&] {
    require(model, "model");
    put(out, model->metadata.digest());
  });
}

dc_status dc_model_backbone(const dc_model* model, char** out) {
  return guard([&] {
    require(model, "model");
    put(out, model->metadata.backbone);
  });
}

dc_status dc_service_create(const dc_config* config, dc_service** out) {
  return guard([&] {
    require(config, "config");
    require(out, "out");
    auto s = std::make_unique<dc_service>();
    s->session = std::make_unique<derm::ServeSession>(config->config, sink());
    *out = s.release();
  });
}

dc_status dc_service_bind(dc_service* service, int* port) {
  return guard([&] {
    require(service, "service");
    const int bound = service->session->bind();
    if (port) *port = bound;
  });
}

dc_status dc_service_run(dc_service* service) {
  return guard([&] {
    require(service, "service");
    service->session->serve();
  });
}

dc_status dc_service_stop(dc_service* service) {
  return guard([&] {
    require(service, "service");
    service->session->stop();
  });
}

void dc_service_destroy(dc_service* service) { delete service; }

}  // extern "C"
