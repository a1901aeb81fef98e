#ifndef SPECRAG_H
#define SPECRAG_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SPECRAG_MODE_SPECULATIVE 0

#define SPECRAG_MODE_STANDARD 1

#define SPECRAG_TERM_DRAFT 1

#define SPECRAG_TERM_SELF_CONSISTENCY 2

#define SPECRAG_TERM_SELF_REFLECTION 4

#define SPECRAG_TERM_ALL 7

typedef enum SpecragStatus {
  SPECRAG_STATUS_OK = 0,
  SPECRAG_STATUS_NULL_ARGUMENT = 1,
  SPECRAG_STATUS_INVALID_UTF8 = 2,
  SPECRAG_STATUS_INVALID_JSON = 3,
  SPECRAG_STATUS_INVALID_ARGUMENT = 4,
  SPECRAG_STATUS_CONFIG_ERROR = 5,
  SPECRAG_STATUS_PIPELINE_ERROR = 6,
  SPECRAG_STATUS_IO_ERROR = 7,
  SPECRAG_STATUS_PANIC = 8,
} SpecragStatus;

// Pipeline configuration plus the endpoint clients and a runtime to drive
// them. Safe to share between threads.
typedef struct SpecragEngine SpecragEngine;

// A mock model server running on its own runtime.
typedef struct SpecragMockServer SpecragMockServer;

// One scored token: byte offsets `[start, end)` and its natural-log
// probability.
typedef struct SpecragToken {
  double logprob;
  size_t start;
  size_t end;
} SpecragToken;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The pointer
// stays valid until the next `specrag_*` call on the same thread.
const char *specrag_last_error(void);

// Library version as a static string.
const char *specrag_version(void);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string returned through an `out` parameter of this
// library that has not been freed yet.
void specrag_string_free(char *s);

// Checks a JSON config (missing fields take defaults). On return
// `*out_violations` holds a JSON array of `{field, message}` objects, empty
// when the config is valid; the status is `ConfigError` when it is not.
//
// # Safety
// `config_json` must be a valid C string; `out_violations` must be writable.
enum SpecragStatus specrag_validate_config(const char *config_json, char **out_violations);

// Log of the product of the score terms selected by `terms`, a bitwise OR of
// the `SPECRAG_TERM_*` flags. Unknown bits are ignored.
double specrag_combine_scores(double rho_draft_log,
                              double rho_sc_log,
                              double rho_sr_log,
                              uint32_t terms);

// Sum (or mean, if `normalize`) of the logprobs of tokens overlapping the
// byte span `[span_start, span_end)`. An empty span scores 0.
//
// # Safety
// `tokens` must point to `len` readable tokens (it may be null when `len` is
// 0); `out` must be writable.
enum SpecragStatus specrag_sequence_logprob(const struct SpecragToken *tokens,
                                            size_t len,
                                            size_t span_start,
                                            size_t span_end,
                                            bool normalize,
                                            double *out);

// Whether `prediction` answers the record's question. `record_json` is one
// dataset line.
//
// # Safety
// Both strings must be valid C strings; `out_correct` must be writable.
enum SpecragStatus specrag_evaluate_answer(const char *prediction,
                                           const char *record_json,
                                           bool *out_correct);

// Creates an engine from a JSON config; missing fields take defaults.
//
// # Safety
// `config_json` must be a valid C string; `out_engine` must be writable.
enum SpecragStatus specrag_engine_new(const char *config_json, struct SpecragEngine **out_engine);

// Runs one dataset record. `mode` is `SPECRAG_MODE_SPECULATIVE` or
// `SPECRAG_MODE_STANDARD`. On success `*out_result_json` holds the pipeline
// result with an added boolean `correct` field.
//
// # Safety
// `engine` must come from [`specrag_engine_new`]; `record_json` must be a
// valid C string; `out_result_json` must be writable.
enum SpecragStatus specrag_engine_run(const struct SpecragEngine *engine,
                                      const char *record_json,
                                      uint32_t mode,
                                      char **out_result_json);

// # Safety
// `engine` must be null or come from [`specrag_engine_new`] and not be used
// afterwards.
void specrag_engine_free(struct SpecragEngine *engine);

// Starts a mock model server on `127.0.0.1:port` (0 picks a free port).
// `script_json` may be null for an unscripted server. `delay_ms` of 0 keeps
// the script's own delay.
//
// # Safety
// `script_json` must be null or a valid C string; `out_server` must be
// writable.
enum SpecragStatus specrag_mock_server_start(const char *script_json,
                                             uint16_t port,
                                             uint64_t delay_ms,
                                             struct SpecragMockServer **out_server);

// Base URL of the server, e.g. `http://127.0.0.1:8100`; append `/generate`
// or `/embed` for the endpoints.
//
// # Safety
// `server` must come from [`specrag_mock_server_start`]; `out_url` must be
// writable.
enum SpecragStatus specrag_mock_server_url(const struct SpecragMockServer *server, char **out_url);

// Stops the server and releases it.
//
// # Safety
// `server` must be null or come from [`specrag_mock_server_start`] and not
// be used afterwards.
void specrag_mock_server_free(struct SpecragMockServer *server);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECRAG_H */
