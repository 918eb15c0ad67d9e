/* C interface to the dermclass pipeline, models and triage service.
 *
 * Every fallible call returns a dc_status. On failure, dc_last_error()
 * returns a message for the calling thread that stays valid until that
 * thread's next dermclass call. Strings returned through char** are owned
 * by the caller and released with dc_string_free(). */
#ifndef DERMCLASS_DERMCLASS_H
#define DERMCLASS_DERMCLASS_H

#include <stddef.h>
#include <stdint.h>

#if defined(DC_BUILDING_LIBRARY)
#define DC_API __attribute__((visibility("default")))
#else
#define DC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dc_status {
  DC_OK = 0,
  DC_ERR_INVALID_ARGUMENT = 1,
  DC_ERR_NOT_FOUND = 2,
  DC_ERR_IO = 3,
  DC_ERR_CORRUPT = 4,
  DC_ERR_BACKBONE_MISMATCH = 5,
  DC_ERR_LABEL_ORDER_MISMATCH = 6,
  DC_ERR_CONFLICT = 7,
  DC_ERR_UNAVAILABLE = 8,
  DC_ERR_NUMERICAL = 9,
  DC_ERR_INTERNAL = 10
} dc_status;

DC_API const char* dc_version(void);
DC_API const char* dc_last_error(void);
DC_API const char* dc_status_name(dc_status status);
DC_API void dc_string_free(char* s);

/* Progress lines from long-running calls. NULL restores silence. */
typedef void (*dc_log_fn)(void* user, const char* line);
DC_API void dc_set_log_callback(dc_log_fn fn, void* user);

/* Labels, in the fixed order used by every score vector. */
DC_API size_t dc_label_count(void);
DC_API const char* dc_label_name(size_t index);

/* Pipeline configuration. */
typedef struct dc_config dc_config;

DC_API dc_status dc_config_create(dc_config** out);
DC_API void dc_config_destroy(dc_config* config);
/* Applies a `key = value` file on top of the current values. */
DC_API dc_status dc_config_load(dc_config* config, const char* path);
DC_API dc_status dc_config_set(dc_config* config, const char* key, const char* value);
DC_API dc_status dc_config_get(const dc_config* config, const char* key, char** out);
DC_API dc_status dc_config_validate(const dc_config* config);
DC_API dc_status dc_config_canonical_text(const dc_config* config, char** out);
DC_API dc_status dc_config_digest(const dc_config* config, char** out);
DC_API size_t dc_config_key_count(void);
DC_API const char* dc_config_key_at(size_t index);

/* Subcommands. Semantics is "idempotent" or "append-only". */
DC_API size_t dc_command_count(void);
DC_API const char* dc_command_name(size_t index);
DC_API const char* dc_command_summary(size_t index);
DC_API const char* dc_command_semantics(size_t index);

/* Runs a batch subcommand. `output` (may be NULL) receives the text meant
 * for standard output: artifact paths or the rendered report. */
DC_API dc_status dc_pipeline_run(const dc_config* config, const char* command, char** output);

/* Dataset manifests. */
typedef struct dc_manifest dc_manifest;

DC_API dc_status dc_manifest_load(const char* path, dc_manifest** out);
DC_API void dc_manifest_destroy(dc_manifest* manifest);
DC_API size_t dc_manifest_size(const dc_manifest* manifest);
/* split: "UNASSIGNED", "TRAIN", "VALIDATION", "TEST" or NULL for all. */
DC_API dc_status dc_manifest_count(const dc_manifest* manifest, const char* label, const char* split,
                                   size_t* out);
DC_API dc_status dc_manifest_distribution(const dc_manifest* manifest, char** out);

/* Trained models. */
typedef struct dc_model dc_model;

DC_API dc_status dc_model_load(const char* checkpoint, dc_model** out);
DC_API void dc_model_destroy(dc_model* model);
/* `scores` must hold dc_label_count() doubles. */
DC_API dc_status dc_model_predict_file(dc_model* model, const char* image_path, double* scores);
DC_API dc_status dc_model_predict_bytes(dc_model* model, const uint8_t* data, size_t size, double* scores);
DC_API dc_status dc_model_digest(const dc_model* model, char** out);
DC_API dc_status dc_model_backbone(const dc_model* model, char** out);

/* Triage service over HTTP. */
typedef struct dc_service dc_service;

DC_API dc_status dc_service_create(const dc_config* config, dc_service** out);
/* Binds the configured address; `port` (may be NULL) receives the bound port. */
DC_API dc_status dc_service_bind(dc_service* service, int* port);
/* Blocks until dc_service_stop() is called from another thread. */
DC_API dc_status dc_service_run(dc_service* service);
DC_API dc_status dc_service_stop(dc_service* service);
DC_API void dc_service_destroy(dc_service* service);

#ifdef __cplusplus
}
#endif

#endif
