/* SPDX-License-Identifier: Apache-2.0 */
/*
 * C interface of the traveling-companion library.
 *
 * A tc_run is a run directory plus its configuration. Every call that can
 * fail returns a tc_status; on failure tc_last_error() returns a one-line
 * message for the calling thread, valid until the next library call on
 * that thread. Strings returned by the library are owned by it.
 */
#ifndef TC_TC_H
#define TC_TC_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(TC_BUILDING_LIBRARY)
#define TC_API __attribute__((visibility("default")))
#else
#define TC_API
#endif

typedef enum tc_status {
  TC_OK = 0,
  TC_ERR_INVALID_ARGUMENT = 1,
  TC_ERR_PARSE = 2,
  TC_ERR_VALIDATION = 3,
  TC_ERR_SHAPE = 4,
  TC_ERR_NUMERIC = 5,
  TC_ERR_IO = 6,
  TC_ERR_CONFIG = 7,
  TC_ERR_MISSING_ARTIFACT = 8,
  TC_ERR_STATE = 9,
  TC_ERR_INTERNAL = 10
} tc_status;

typedef struct tc_run tc_run;

/* Receives one progress line (no trailing newline). */
typedef void (*tc_log_fn)(void* user, const char* line);

TC_API const char* tc_version(void);
/* Short machine-readable class, e.g. "missing_artifact". */
TC_API const char* tc_status_name(tc_status status);
TC_API const char* tc_last_error(void);

/* Opens a handle on run_dir (created lazily by the first stage) with the
 * default configuration. */
TC_API tc_status tc_run_open(const char* run_dir, tc_run** out);
TC_API void tc_run_close(tc_run* run);

/* key = value file; unknown keys are rejected. */
TC_API tc_status tc_run_load_config(tc_run* run, const char* path);
TC_API tc_status tc_run_set(tc_run* run, const char* key, const char* value);

/* Copies a NUL-terminated value into buf when it fits; *needed (optional)
 * receives the size including the terminator. Returns TC_ERR_INVALID_ARGUMENT
 * when cap is too small. */
TC_API tc_status tc_run_get(const tc_run* run, const char* key, char* buf, size_t cap,
                            size_t* needed);
/* Canonical listing of every key, same buffer convention. */
TC_API tc_status tc_run_config_text(const tc_run* run, char* buf, size_t cap, size_t* needed);

TC_API tc_status tc_run_set_log(tc_run* run, tc_log_fn fn, void* user);

/* One of tc_stage_name(i). */
TC_API tc_status tc_run_stage(tc_run* run, const char* stage);
/* The report stage joined with n other finished runs. */
TC_API tc_status tc_run_report(tc_run* run, const char* const* labels, const char* const* dirs,
                               size_t n);
/* One of tc_experiment_name(i). */
TC_API tc_status tc_run_experiment(tc_run* run, const char* name);

TC_API size_t tc_config_key_count(void);
TC_API const char* tc_config_key(size_t index);
TC_API const char* tc_config_key_help(size_t index);
TC_API size_t tc_stage_count(void);
TC_API const char* tc_stage_name(size_t index);
TC_API size_t tc_experiment_count(void);
TC_API const char* tc_experiment_name(size_t index);

#ifdef __cplusplus
}
#endif

#endif /* TC_TC_H */
