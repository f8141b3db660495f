#ifndef LUSVIEW_H
#define LUSVIEW_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LUSV_API __declspec(dllexport)
#else
#define LUSV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every call returns one; LUSV_OK is zero. Details are
 * available from lusv_last_error() on the calling thread. */
typedef enum lusv_status {
  LUSV_OK = 0,
  LUSV_ERR_INVALID_ARGUMENT = 1,
  LUSV_ERR_BAD_CONFIG = 2,
  LUSV_ERR_IO = 3,
  LUSV_ERR_UNSUPPORTED_FORMAT = 4,
  LUSV_ERR_CORRUPT_STREAM = 5,
  LUSV_ERR_LIMIT_EXCEEDED = 6,
  LUSV_ERR_SPEC_OUT_OF_BOUNDS = 7,
  LUSV_ERR_VALIDATION = 8,
  LUSV_ERR_PARTIAL_FAILURE = 9,
  LUSV_ERR_INTERNAL = 10
} lusv_status;

typedef struct lusv_server lusv_server;

LUSV_API const char* lusv_version(void);

/* Message of the last failed call on this thread ("" if none). Valid until the
 * next call on this thread. */
LUSV_API const char* lusv_last_error(void);

/* Frees strings returned through char** out-parameters. */
LUSV_API void lusv_string_free(char* s);

/* Creates a server from an optional config file (may be NULL) and an optional
 * JSON object of overrides applied after the environment (may be NULL). The
 * socket is bound on return; lusv_server_port reports the bound port. */
LUSV_API lusv_status lusv_server_create(const char* config_path, const char* overrides_json, lusv_server** out);
/* Serves on a background thread. */
LUSV_API lusv_status lusv_server_start(lusv_server* server);
/* Serves on the calling thread until lusv_server_stop is called from elsewhere. */
LUSV_API lusv_status lusv_server_run(lusv_server* server);
LUSV_API int lusv_server_port(const lusv_server* server);
/* JSON echo of the effective configuration; free with lusv_string_free. */
LUSV_API lusv_status lusv_server_config_json(const lusv_server* server, char** out_json);
LUSV_API void lusv_server_stop(lusv_server* server);
LUSV_API void lusv_server_destroy(lusv_server* server);

/* Offline pipeline: decodes, summarizes, analyzes and renders each input and
 * writes the export layout (plus manifest.json) under out_dir. params_json
 * (may be NULL) is {"summarizer": {...}, "analyzer": {...}}; config_path (may
 * be NULL) supplies decoder and plugin settings. On return *report_json (if
 * non-NULL) holds {"videos":[{"input","ok","error"?,"keyframe_count",
 * "abnormal_count","directory"}]}. Returns LUSV_ERR_PARTIAL_FAILURE if any
 * input failed. */
LUSV_API lusv_status lusv_analyze(const char* const* inputs, size_t n_inputs, const char* out_dir,
                                  const char* params_json, const char* config_path, char** report_json);

/* Renders a phantom clip from a JSON spec into a Y4M file and writes the
 * ground-truth JSON to truth_path (may be NULL to skip). */
LUSV_API lusv_status lusv_phantom(const char* spec_json, const char* y4m_path, const char* truth_path);

#ifdef __cplusplus
}
#endif

#endif
