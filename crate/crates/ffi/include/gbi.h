/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef GBI_H
#define GBI_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum GbiExponentRule {
  GBI_EXPONENT_RULE_SUM = 0,
  GBI_EXPONENT_RULE_PRODUCT = 1,
} GbiExponentRule;

typedef enum GbiFitModel {
  GBI_FIT_MODEL_TWO_PARAM = 0,
  GBI_FIT_MODEL_ONE_PARAM = 1,
} GbiFitModel;

typedef enum GbiFrameKind {
  GBI_FRAME_KIND_RECURSIVE = 0,
  GBI_FRAME_KIND_TETRAHEDRAL = 1,
} GbiFrameKind;

// Result code of every fallible call.
typedef enum GbiStatus {
  GBI_STATUS_OK = 0,
  GBI_STATUS_INVALID_ARGUMENT = 2,
  GBI_STATUS_RESOURCE_LIMIT = 3,
  GBI_STATUS_NUMERICAL = 4,
  GBI_STATUS_NULL_POINTER = 5,
  GBI_STATUS_PANIC = 6,
} GbiStatus;

// Outcome frame handle.
typedef struct GbiFrame GbiFrame;

// Finished sign-matrix search.
typedef struct GbiSearch GbiSearch;

// Monte Carlo overlap estimate.
typedef struct GbiEstimate {
  double mean;
  double std_error;
  uint64_t points;
  uint64_t seed;
} GbiEstimate;

// `1/L = a^N b`; `b` is 1 for the one-parameter model.
typedef struct GbiFit {
  double a;
  double b;
  double residual;
} GbiFit;

// One entry of a sign-matrix search ranking.
typedef struct GbiRankEntry {
  // Row-major entries in {0,1,2}.
  uint8_t s[9];
  size_t class_size;
  double classical;
  double quantum;
  double qcr;
} GbiRankEntry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *gbi_version(void);

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into the library from the same thread.
const char *gbi_last_error(void);

// Creates the outcome frame for dimension `d`.
//
// # Safety
// `out_frame` must be a valid pointer.
enum GbiStatus gbi_frame_new(size_t d, enum GbiFrameKind kind, struct GbiFrame **out_frame);

// Releases a frame; NULL is ignored.
//
// # Safety
// `frame` must come from [`gbi_frame_new`] and not be used afterwards.
void gbi_frame_free(struct GbiFrame *frame);

// Dimension of the vectors of `frame`.
//
// # Safety
// `frame` must be NULL or a live handle.
size_t gbi_frame_dim(const struct GbiFrame *frame);

// Copies outcome vector `m` into `out_vec` (`len` must equal the frame dimension).
//
// # Safety
// `frame` must be a live handle and `out_vec` must hold `len` doubles.
enum GbiStatus gbi_frame_vector(const struct GbiFrame *frame,
                                size_t m,
                                double *out_vec,
                                size_t len);

// Correlation vector at the phase sum `x` (`d - 1` entries).
//
// # Safety
// `frame` must be a live handle, `x` must hold `x_len` doubles and
// `out_vec` must hold `out_len` doubles.
enum GbiStatus gbi_corr_reduced(const struct GbiFrame *frame,
                                const double *x,
                                size_t x_len,
                                double *out_vec,
                                size_t out_len);

// Probabilities of the `d` joint outcomes at the phase sum `x`.
//
// # Safety
// `x` must hold `d - 1` doubles and `out_probs` must hold `d` doubles.
enum GbiStatus gbi_prob_outcomes(size_t d, const double *x, double *out_probs);

// Monte Carlo estimate of `L_{d,N}`; `threads = 0` uses all cores.
//
// # Safety
// `frame` must be a live handle and `out_est` a valid pointer.
enum GbiStatus gbi_mc_overlap(const struct GbiFrame *frame,
                              size_t parties,
                              uint64_t points,
                              uint64_t seed,
                              size_t threads,
                              struct GbiEstimate *out_est);

// Exact `L_{d,N}` for `d` in {2, 3}.
//
// # Safety
// `out_l` must be a valid pointer.
enum GbiStatus gbi_closed_form_l(size_t d, size_t parties, double *out_l);

// `(1/d) / L`.
//
// # Safety
// `out_qcr` must be a valid pointer.
enum GbiStatus gbi_qcr(size_t d, double l, double *out_qcr);

// Weighted log-domain fit of `1/L` against `N` over `len` records.
//
// # Safety
// `parties`, `l` and `weights` must each hold `len` elements; `out_fit`
// must be a valid pointer.
enum GbiStatus gbi_fit_scaling(const size_t *parties,
                               const double *l,
                               const double *weights,
                               size_t len,
                               enum GbiFitModel model,
                               struct GbiFit *out_fit);

// Best deterministic overlap for the given settings.
//
// `settings` lists, observer by observer, `counts[i]` settings of `d - 1`
// phases each. `out_overlap` receives the classical optimum and
// `out_self_overlap` the quantum self-overlap of the tensor.
//
// # Safety
// `counts` must hold `parties` elements, `settings` must hold
// `sum(counts) * (d - 1)` doubles and both out-pointers must be valid.
enum GbiStatus gbi_discrete_classical(size_t d,
                                      size_t parties,
                                      const size_t *counts,
                                      const double *settings,
                                      uint64_t seed,
                                      double *out_overlap,
                                      double *out_self_overlap);

// Exact classical maximum of the qutrit inequality with sign matrix `s`.
//
// # Safety
// `s` must hold 9 bytes (row-major) and `out_value` must be valid.
enum GbiStatus gbi_bell_classical_max(const uint8_t *s, enum GbiExponentRule r, double *out_value);

// Quantum value of the qutrit inequality at the given phases: Alice's three
// observables (6 doubles) followed by Bob's (6 doubles).
//
// # Safety
// `s` must hold 9 bytes, `phases` 12 doubles, and `out_value` must be valid.
enum GbiStatus gbi_bell_quantum(const uint8_t *s,
                                enum GbiExponentRule r,
                                const double *phases,
                                double *out_value);

// Runs the sign-matrix search with the default optimiser budget.
//
// # Safety
// `out_search` must be a valid pointer.
enum GbiStatus gbi_search_run(uint64_t seed,
                              bool prune,
                              enum GbiExponentRule r,
                              struct GbiSearch **out_search);

// Number of ranking entries; 0 for NULL.
//
// # Safety
// `search` must be NULL or a live handle.
size_t gbi_search_len(const struct GbiSearch *search);

// Ranking entry `index`, best first.
//
// # Safety
// `search` must be a live handle and `out_entry` a valid pointer.
enum GbiStatus gbi_search_entry(const struct GbiSearch *search,
                                size_t index,
                                struct GbiRankEntry *out_entry);

// Whether `s` belongs to the best-scoring class of a finished search.
//
// # Safety
// `search` must be a live handle, `s` must hold 9 bytes and `out_flag`
// must be valid.
enum GbiStatus gbi_search_in_top_class(const struct GbiSearch *search,
                                       const uint8_t *s,
                                       bool *out_flag);

// Number of sign matrices with a ratio above 1.
//
// # Safety
// `search` must be NULL or a live handle.
size_t gbi_search_above_one(const struct GbiSearch *search);

// Releases a search; NULL is ignored.
//
// # Safety
// `search` must come from [`gbi_search_run`] and not be used afterwards.
void gbi_search_free(struct GbiSearch *search);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GBI_H */
