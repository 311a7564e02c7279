#ifndef CAUSAL_NIE_H
#define CAUSAL_NIE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum CnieStatus {
  CNIE_STATUS_OK = 0,
  CNIE_STATUS_NULL_ARGUMENT = 1,
  CNIE_STATUS_INVALID_UTF8 = 2,
  CNIE_STATUS_PARSE = 3,
  CNIE_STATUS_INVALID_GRAPH = 4,
  CNIE_STATUS_INVALID_MODEL = 5,
  CNIE_STATUS_INVALID_TREATMENT = 6,
  CNIE_STATUS_INVALID_CONFIG = 7,
  CNIE_STATUS_UNSUPPORTED = 8,
  CNIE_STATUS_IO = 9,
  CNIE_STATUS_PANIC = 10,
} CnieStatus;

typedef enum CnieFormat {
  CNIE_FORMAT_TSV = 0,
  CNIE_FORMAT_JSON = 1,
} CnieFormat;

/**
 * Parsed and validated model with its default treatment settings.
 */
typedef struct CnieModel CnieModel;

/**
 * One Monte Carlo effect estimate.
 */
typedef struct CnieEstimate {
  double point;
  double std_error;
  uint64_t n_draws;
} CnieEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. Valid
 * until the next call on the same thread.
 */
const char *cnie_last_error_message(void);

const char *cnie_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void cnie_string_free(char *s);

/**
 * Parses a JSON model and stores a new handle in `out`.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum CnieStatus cnie_model_from_json(const char *json, struct CnieModel **out);

/**
 * # Safety
 * `model` must be null or a handle from `cnie_model_from_json`, freed once.
 */
void cnie_model_free(struct CnieModel *model);

/**
 * Number of nodes in the model's graph, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t cnie_model_node_count(const struct CnieModel *model);

/**
 * Decimal count of DAG configurations for `treatments` treatments and
 * `mediators` mediators.
 *
 * # Safety
 * `out` must be writable; the string is released with `cnie_string_free`.
 */
enum CnieStatus cnie_count_dags(uint64_t treatments, uint64_t mediators, char **out);

/**
 * Monte Carlo NIE for one treatment/mediator pair using the model's
 * treatment settings.
 *
 * # Safety
 * `model` must be a live handle, names nul-terminated, `out` writable.
 */
enum CnieStatus cnie_estimate_nie(const struct CnieModel *model,
                                  const char *treatment,
                                  const char *mediator,
                                  uint64_t n_draws,
                                  uint64_t seed,
                                  struct CnieEstimate *out);

/**
 * Exact NIE for finite-noise models.
 *
 * # Safety
 * As for `cnie_estimate_nie`.
 */
enum CnieStatus cnie_exact_nie(const struct CnieModel *model,
                               const char *treatment,
                               const char *mediator,
                               double *out);

/**
 * Full report (every NIE plus total and direct effects), as the command
 * line prints it.
 *
 * # Safety
 * `model` must be a live handle; `out` writable. Release the string with
 * `cnie_string_free`.
 */
enum CnieStatus cnie_analyze(const struct CnieModel *model,
                             uint64_t n_draws,
                             uint64_t seed,
                             enum CnieFormat format,
                             char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAUSAL_NIE_H */
