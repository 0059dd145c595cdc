/* C API for the corrlab shared library.
 *
 * All functionality is reached through an opaque run handle: create it from
 * a JSON configuration, execute one of the named experiments into an output
 * directory, then read the summary. Functions return corrlab_status; the
 * handle keeps the last error message.
 */
#ifndef CORRLAB_H
#define CORRLAB_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum corrlab_status {
  CORRLAB_OK = 0,
  CORRLAB_ERR_INVALID_ARG = 1, /* bad pointer / unknown experiment name */
  CORRLAB_ERR_CONFIG = 2,      /* malformed or rejected configuration */
  CORRLAB_ERR_SOLVER = 3,      /* iterative solver failure */
  CORRLAB_ERR_IO = 4,          /* filesystem failure */
  CORRLAB_ERR_INTERNAL = 5
} corrlab_status;

typedef struct corrlab_run corrlab_run;

const char* corrlab_version(void);
const char* corrlab_status_name(corrlab_status status);

/* Default configuration as a JSON document (static storage). */
const char* corrlab_default_config(void);

/* Comma-separated list of experiment names (static storage). */
const char* corrlab_experiments(void);

/* Creates a run from a JSON configuration. On success *out_run owns the
 * handle and must be released with corrlab_run_destroy. On configuration
 * errors, *out_run is NULL and the message is lost; validate with
 * corrlab_config_check first when a message is needed. */
corrlab_status corrlab_run_create(const char* config_json, corrlab_run** out_run);

/* Validates a configuration; writes a diagnostic into msg (truncated to
 * msg_len) when invalid. */
corrlab_status corrlab_config_check(const char* config_json, char* msg, size_t msg_len);

/* Executes one experiment, writing manifest.json, CSV tables and
 * summary.json into out_dir. */
corrlab_status corrlab_run_execute(corrlab_run* run, const char* experiment,
                                   const char* out_dir);

/* After a successful execute: summary JSON (owned by the handle). */
const char* corrlab_run_summary_json(const corrlab_run* run);

/* 1 if every hard criterion of the last execute passed, else 0. */
int corrlab_run_passed(const corrlab_run* run);

/* Id of the first failing hard criterion, or "" (owned by the handle). */
const char* corrlab_run_first_failure(const corrlab_run* run);

/* Last error message recorded on the handle ("" if none). */
const char* corrlab_run_error(const corrlab_run* run);

void corrlab_run_destroy(corrlab_run* run);

#ifdef __cplusplus
}
#endif

#endif /* CORRLAB_H */
