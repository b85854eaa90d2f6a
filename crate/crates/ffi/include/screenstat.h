#ifndef SCREENSTAT_H
#define SCREENSTAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Half-count policy for the control row.
typedef enum ScreenstatAdjust {
  SCREENSTAT_ADJUST_AUTO = 0,
  SCREENSTAT_ADJUST_ON = 1,
  SCREENSTAT_ADJUST_OFF = 2,
} ScreenstatAdjust;

typedef enum ScreenstatMetric {
  SCREENSTAT_METRIC_PVP = 0,
  SCREENSTAT_METRIC_PVN = 1,
} ScreenstatMetric;

// Result codes.
typedef enum ScreenstatStatus {
  SCREENSTAT_STATUS_OK = 0,
  SCREENSTAT_STATUS_NULL_POINTER = 1,
  SCREENSTAT_STATUS_INVALID_UTF8 = 2,
  SCREENSTAT_STATUS_INVALID_ARGUMENT = 3,
  SCREENSTAT_STATUS_VALIDATION = 4,
  SCREENSTAT_STATUS_IO = 5,
  SCREENSTAT_STATUS_PANIC = 6,
} ScreenstatStatus;

// Opaque count table.
typedef struct ScreenstatMatrix ScreenstatMatrix;

// A point estimate with its interval. `degenerate` is 1 when the interval
// came from a fallback construction.
typedef struct ScreenstatInterval {
  double point;
  double lower;
  double upper;
  uint8_t degenerate;
} ScreenstatInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. Valid until the
// next failing call on the same thread.
const char *screenstat_last_error(void);

// Builds a matrix from `rows * cols` row-major counts and label arrays of
// length `rows` and `cols`.
//
// # Safety
// All pointers must be valid for the stated lengths; labels must be
// NUL-terminated.
enum ScreenstatStatus screenstat_matrix_new(const int64_t *counts,
                                            size_t rows,
                                            size_t cols,
                                            const char *const *state_labels,
                                            const char *const *readout_labels,
                                            struct ScreenstatMatrix **out);

// Parses a matrix from CSV text (`state,<readouts...>` header, control row first).
//
// # Safety
// `csv` must be a NUL-terminated string and `out` a valid pointer.
enum ScreenstatStatus screenstat_matrix_from_csv(const char *csv, struct ScreenstatMatrix **out);

// # Safety
// `m` must come from this library and not be used afterwards. Null is ignored.
void screenstat_matrix_free(struct ScreenstatMatrix *m);

// Number of disease states `J`, or 0 for null.
//
// # Safety
// `m` must be null or a live handle.
size_t screenstat_matrix_num_states(const struct ScreenstatMatrix *m);

// Number of positive readouts `K`, or 0 for null.
//
// # Safety
// `m` must be null or a live handle.
size_t screenstat_matrix_num_readouts(const struct ScreenstatMatrix *m);

// `P(T_k | D_j)` with sample case shares.
//
// # Safety
// `m` must be a live handle and `out` valid.
enum ScreenstatStatus screenstat_accuracy(const struct ScreenstatMatrix *m,
                                          size_t state,
                                          size_t readout,
                                          double alpha,
                                          struct ScreenstatInterval *out);

// `P(T_k | D_0)`; readout 0 gives the specificity.
//
// # Safety
// `m` must be a live handle and `out` valid.
enum ScreenstatStatus screenstat_control_rate(const struct ScreenstatMatrix *m,
                                              enum ScreenstatAdjust adjust,
                                              size_t readout,
                                              double alpha,
                                              struct ScreenstatInterval *out);

// PVP or PVN of readout `k` with sample case shares.
//
// # Safety
// `m` must be a live handle and `out` valid.
enum ScreenstatStatus screenstat_predictive(const struct ScreenstatMatrix *m,
                                            enum ScreenstatAdjust adjust,
                                            double overall_incidence,
                                            enum ScreenstatMetric metric,
                                            size_t readout,
                                            double alpha,
                                            struct ScreenstatInterval *out);

// Marginal readout probability `P(T_k)`.
//
// # Safety
// `m` must be a live handle and `out` valid.
enum ScreenstatStatus screenstat_marginal(const struct ScreenstatMatrix *m,
                                          enum ScreenstatAdjust adjust,
                                          double overall_incidence,
                                          size_t readout,
                                          double alpha,
                                          struct ScreenstatInterval *out);

// Mid-P interval for `successes` out of `trials`.
//
// # Safety
// `out` must be valid.
enum ScreenstatStatus screenstat_midp_interval(uint64_t successes,
                                               uint64_t trials,
                                               double alpha,
                                               struct ScreenstatInterval *out);

// `P(n > 0)` and `E(1/n | n > 0)` for `n ~ Binomial(trials, p)`.
//
// # Safety
// Both out pointers must be valid.
enum ScreenstatStatus screenstat_truncated_moments(uint64_t trials,
                                                   double p,
                                                   double *prob_positive,
                                                   double *mean_inverse);

// Runs a scenario given as JSON and returns the study report as JSON.
//
// # Safety
// `scenario_json` must be NUL-terminated; `out` must be valid. Release the
// result with [`screenstat_string_free`].
enum ScreenstatStatus screenstat_simulate_json(const char *scenario_json, char **out);

// # Safety
// `s` must come from this library and not be used afterwards. Null is ignored.
void screenstat_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCREENSTAT_H */
