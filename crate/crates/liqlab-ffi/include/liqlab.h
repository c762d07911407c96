/* liqlab C API. Generated by cbindgen from liqlab-ffi; do not edit. */

#ifndef LIQLAB_H
#define LIQLAB_H

/* This file is auto-generated. Regenerate by building the liqlab-ffi crate. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Which time-weighted statistic of the repair-read rate to fetch.
typedef enum {
  // Time-weighted mean.
  LIQLAB_RATE_STAT_AVG = 0,
  // 99% quantile by time.
  LIQLAB_RATE_STAT_P99 = 1,
  // 99.99% quantile by time.
  LIQLAB_RATE_STAT_P9999 = 2,
  // Largest rate ever requested.
  LIQLAB_RATE_STAT_PEAK = 3,
} LiqlabRateStat;

// Result of a liqlab call. Anything but `Ok` leaves a message readable via
// `liqlab_last_error_message`.
typedef enum {
  // The call succeeded.
  LIQLAB_STATUS_OK = 0,
  // A required pointer argument was null.
  LIQLAB_STATUS_NULL_POINTER = 1,
  // An argument was out of range or inconsistent with the handle.
  LIQLAB_STATUS_INVALID_ARGUMENT = 2,
  // Scenario JSON failed to parse or validate.
  LIQLAB_STATUS_PARSE = 3,
  // An erasure-codec operation failed.
  LIQLAB_STATUS_CODEC = 4,
  // A simulation run failed.
  LIQLAB_STATUS_SIMULATION = 5,
  // An internal panic was caught at the boundary.
  LIQLAB_STATUS_PANIC = 6,
} LiqlabStatus;

// An (n, k) systematic MDS erasure code over GF(2^16).
typedef struct LiqlabCode LiqlabCode;

// A parsed, validated scenario (cluster + failure models + run limits).
typedef struct LiqlabScenario LiqlabScenario;

// The outcome of running every seed of a scenario.
typedef struct LiqlabSummary LiqlabSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string; never null, never freed.
const char *liqlab_version(void);

// Message for the most recent failure on the calling thread, or an empty
// string if nothing failed yet. The pointer stays valid until the next
// failing liqlab call on the same thread; do not free it.
const char *liqlab_last_error_message(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
//
// `s` must be a pointer previously returned by a liqlab call that documents
// `liqlab_string_free` as its destructor, and must not be used afterwards.
void liqlab_string_free(char *s);

// Parses and validates scenario JSON. Returns null on failure.
//
// # Safety
//
// `json` must be a valid NUL-terminated string. The returned handle must be
// released with `liqlab_scenario_free`.
LiqlabScenario *liqlab_scenario_parse(const char *json);

// Serializes a scenario back to pretty-printed JSON.
// Free the result with `liqlab_string_free`.
//
// # Safety
//
// `scenario` must be a live handle from `liqlab_scenario_parse` or
// `liqlab_scenario_scale`.
char *liqlab_scenario_to_json(const LiqlabScenario *scenario);

// Number of seeds the scenario will run.
//
// # Safety
//
// `scenario` must be a live scenario handle (null returns 0).
uint64_t liqlab_scenario_seed_count(const LiqlabScenario *scenario);

// Rescales a scenario onto smaller hardware and faster time while keeping
// its dimensionless shape: capacities scale by `s_factor`, failure rates by
// `s_factor * lambda_factor` jointly with rate ceilings, and the run horizon
// shrinks by `lambda_factor` so expected event counts are unchanged.
// Returns a new handle, or null if the factors do not keep byte sizes whole.
//
// # Safety
//
// `scenario` must be a live scenario handle. The returned handle must be
// released with `liqlab_scenario_free`.
LiqlabScenario *liqlab_scenario_scale(const LiqlabScenario *scenario,
                                      double s_factor,
                                      double lambda_factor);

// Releases a scenario handle. Null is ignored.
//
// # Safety
//
// `scenario` must be a handle from this library, not used afterwards.
void liqlab_scenario_free(LiqlabScenario *scenario);

// Runs every seed of the scenario (`jobs` worker threads; 0 means 1) and
// returns a summary handle, or null on failure.
//
// # Safety
//
// `scenario` must be a live scenario handle. The returned handle must be
// released with `liqlab_summary_free`.
LiqlabSummary *liqlab_scenario_run(const LiqlabScenario *scenario, uint32_t jobs);

// Number of per-seed runs inside the summary.
//
// # Safety
//
// `summary` must be a live summary handle (null returns 0).
uint64_t liqlab_summary_runs(const LiqlabSummary *summary);

// Simulated years summed over all runs.
//
// # Safety
//
// `summary` must be a live summary handle (null returns NaN).
double liqlab_summary_total_years(const LiqlabSummary *summary);

// Data-loss events summed over all runs.
//
// # Safety
//
// `summary` must be a live summary handle (null returns 0).
uint64_t liqlab_summary_total_loss_events(const LiqlabSummary *summary);

// Pooled MTTDL point estimate: total years / (total losses + runs).
//
// # Safety
//
// `summary` must be a live summary handle (null returns NaN).
double liqlab_summary_mttdl_years(const LiqlabSummary *summary);

// One statistic of the pooled repair-read-rate distribution, bits/s.
//
// # Safety
//
// `summary` must be a live summary handle (null returns NaN).
double liqlab_summary_rate_bps(const LiqlabSummary *summary, LiqlabRateStat stat);

// The whole summary (aggregate plus per-seed rows) as JSON.
// Free the result with `liqlab_string_free`.
//
// # Safety
//
// `summary` must be a live summary handle.
char *liqlab_summary_to_json(const LiqlabSummary *summary);

// The report of run `index` (seed order) as JSON, without its trace.
// Returns null if `index` is out of range.
// Free the result with `liqlab_string_free`.
//
// # Safety
//
// `summary` must be a live summary handle.
char *liqlab_summary_report_json(const LiqlabSummary *summary, uint64_t index);

// The rate/event trace of run `index` as CSV, or null if the scenario was
// run without tracing or `index` is out of range.
// Free the result with `liqlab_string_free`.
//
// # Safety
//
// `summary` must be a live summary handle.
char *liqlab_summary_trace_csv(const LiqlabSummary *summary, uint64_t index);

// Releases a summary handle. Null is ignored.
//
// # Safety
//
// `summary` must be a handle from this library, not used afterwards.
void liqlab_summary_free(LiqlabSummary *summary);

// MTTDL estimate for fixed-rate liquid repair with `lambda_t = lambda * T`
// expected failures per node per repair cycle. `lambda_t = 0` yields +inf.
//
// # Safety
//
// `out_mttdl_years` must point to a writable f64.
LiqlabStatus liqlab_bound_mttdl_estimate(uint32_t n,
                                         uint32_t r,
                                         double lambda_per_year,
                                         double lambda_t,
                                         double *out_mttdl_years);

// Closed-form lower bound companion to `liqlab_bound_mttdl_estimate`.
//
// # Safety
//
// `out_mttdl_years` must point to a writable f64.
LiqlabStatus liqlab_bound_mttdl_sandwich(uint32_t n,
                                         uint32_t r,
                                         double lambda_per_year,
                                         double lambda_t,
                                         double *out_mttdl_years);

// MTTDL lower bound for the regulated policy with default parameters for
// `(n, r)`, via the greedy worst-case missing-fragment recursion
// (`steps` grid points; 4000 is a good default). With `estimate_rate` the
// regulator is modeled as learning the failure rate online; otherwise it
// knows `lambda_per_year` exactly. Also reports the per-cycle probability
// `q_tail` that more than `r` fragments are missing at repair completion
// (`out_q_tail` may be null if unwanted).
//
// # Safety
//
// `out_mttdl_years` must point to a writable f64; `out_q_tail` must be
// writable or null.
LiqlabStatus liqlab_bound_mttdl_regulated(uint32_t n,
                                          uint32_t r,
                                          double lambda_per_year,
                                          bool estimate_rate,
                                          uint32_t steps,
                                          double *out_mttdl_years,
                                          double *out_q_tail);

// Smallest fixed repair-read rate (bits/s) whose estimated MTTDL reaches
// `target_mttdl_years` for a cluster holding `d_src_bytes` of source data.
//
// # Safety
//
// `out_rate_bps` must point to a writable f64.
LiqlabStatus liqlab_bound_invert_rate(uint32_t n,
                                      uint32_t r,
                                      double lambda_per_year,
                                      double d_src_bytes,
                                      double target_mttdl_years,
                                      double *out_rate_bps);

// Creates an (n, k) systematic MDS code handle (n <= 65536, 0 < k < n).
// Returns null on failure. Release the handle with `liqlab_code_free`.
LiqlabCode *liqlab_code_new(uint32_t n, uint32_t k);

// Encodes one source block into the fragment symbol named by `efi`.
// `block` holds the k source symbols concatenated (`block_len` bytes, which
// must equal `k * symbol_len`); the result (`symbol_len` bytes, even) is
// written to `out_symbol`. Encoded fragment indexes below k return the
// source symbol verbatim.
//
// # Safety
//
// `code` must be a live code handle; `block` must be readable for
// `block_len` bytes and `out_symbol` writable for `symbol_len` bytes, and
// the two must not overlap.
LiqlabStatus liqlab_code_encode(const LiqlabCode *code,
                                const uint8_t *block,
                                size_t block_len,
                                uint16_t efi,
                                uint8_t *out_symbol,
                                size_t symbol_len);

// Recovers one source block from `count >= k` distinct received fragments.
// `efis[i]` names the fragment whose symbol occupies bytes
// `[i * symbol_len, (i+1) * symbol_len)` of `symbols`; the k source symbols
// are written concatenated to `out_block` (`k * symbol_len` bytes).
//
// # Safety
//
// `code` must be a live code handle; `efis` must be readable for `count`
// u16 values, `symbols` for `count * symbol_len` bytes, and `out_block`
// writable for `k * symbol_len` bytes, none overlapping.
LiqlabStatus liqlab_code_decode(const LiqlabCode *code,
                                const uint16_t *efis,
                                const uint8_t *symbols,
                                size_t count,
                                size_t symbol_len,
                                uint8_t *out_block);

// Total fragment count n of the code.
//
// # Safety
//
// `code` must be a live code handle (null returns 0).
uint16_t liqlab_code_n(const LiqlabCode *code);

// Source fragment count k of the code.
//
// # Safety
//
// `code` must be a live code handle (null returns 0).
uint16_t liqlab_code_k(const LiqlabCode *code);

// Releases a code handle. Null is ignored.
//
// # Safety
//
// `code` must be a handle from this library, not used afterwards.
void liqlab_code_free(LiqlabCode *code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIQLAB_H */
