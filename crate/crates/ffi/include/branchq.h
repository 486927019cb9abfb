#ifndef BRANCHQ_H
#define BRANCHQ_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the first four match the command-line exit codes.
 */
typedef enum BqStatus {
  BQ_STATUS_OK = 0,
  /**
   * Analytic negative: invalid network, not stabilizable, no usable bound.
   */
  BQ_STATUS_NEGATIVE = 1,
  BQ_STATUS_INVALID_INPUT = 2,
  BQ_STATUS_BUDGET_EXCEEDED = 3,
  BQ_STATUS_NULL_POINTER = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  BQ_STATUS_INTERNAL = 5,
} BqStatus;

typedef enum BqVerdict {
  BQ_VERDICT_STABILIZABLE = 0,
  BQ_VERDICT_NOT_STABILIZABLE = 1,
  BQ_VERDICT_DIVERGENT = 2,
} BqVerdict;

/**
 * An exact analysis report.
 */
typedef struct BqAnalysis BqAnalysis;

/**
 * A parsed network (per-action rates already uniformized).
 */
typedef struct BqNetwork BqNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *bq_last_error_message(void);

/**
 * Parses a network from NUL-terminated JSON.
 */
enum BqStatus bq_network_from_json(const char *json, struct BqNetwork **out);

void bq_network_free(struct BqNetwork *net);

/**
 * Number of queues, or 0 for NULL.
 */
size_t bq_network_queue_count(const struct BqNetwork *net);

/**
 * Validation report as JSON; `Negative` if the network violates a constraint.
 */
enum BqStatus bq_validate(const struct BqNetwork *net, char **report_json);

/**
 * Runs the exact analysis pipeline.
 */
enum BqStatus bq_analyze(const struct BqNetwork *net, struct BqAnalysis **out);

void bq_analysis_free(struct BqAnalysis *analysis);

enum BqStatus bq_analysis_verdict(const struct BqAnalysis *analysis, enum BqVerdict *out);

/**
 * `δ*` rounded to double; `Negative` when the LP has no optimum.
 */
enum BqStatus bq_analysis_delta_star(const struct BqAnalysis *analysis, double *out);

/**
 * Drift margin `γ` rounded to double; `Negative` without a traffic solution.
 */
enum BqStatus bq_analysis_gamma(const struct BqAnalysis *analysis, double *out);

/**
 * Full report as JSON, with exact values as `"p/q"` strings.
 */
enum BqStatus bq_analysis_to_json(const struct BqAnalysis *analysis, char **out);

/**
 * Simulates `cycles` regeneration cycles under the synthesized scheduler.
 * `BudgetExceeded` still writes a JSON error report to `out`.
 */
enum BqStatus bq_simulate_json(const struct BqNetwork *net,
                               uint64_t seed,
                               uint64_t cycles,
                               uint32_t replicas,
                               double time_budget,
                               char **out);

/**
 * Truncated-chain stationary distribution under the synthesized scheduler;
 * `bound == 0` picks the smallest bound with shell mass at most 1e-6.
 */
enum BqStatus bq_oracle_json(const struct BqNetwork *net, uint32_t bound, char **out);

void bq_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BRANCHQ_H */
