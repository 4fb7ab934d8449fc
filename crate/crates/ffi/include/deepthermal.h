#ifndef DEEPTHERMAL_H
#define DEEPTHERMAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DtStatus {
  DT_STATUS_OK = 0,
  DT_STATUS_INVALID_ARGUMENT = 1,
  DT_STATUS_INVALID_DIMENSION = 2,
  DT_STATUS_RESOURCE = 3,
  DT_STATUS_NUMERICAL = 4,
  DT_STATUS_NO_THERMALIZATION = 5,
  DT_STATUS_NULL_POINTER = 6,
  DT_STATUS_PANIC = 7,
  DT_STATUS_INTERNAL = 8,
} DtStatus;

typedef struct DtEnsemble DtEnsemble;

typedef struct DtMoment DtMoment;

typedef struct DtRng DtRng;

typedef struct DtState DtState;

/**
 * Circuit parameters; mirrors the core configuration.
 */
typedef struct DtCircuitConfig {
  size_t d_a;
  size_t d_b1;
  size_t q;
  size_t t_max;
  size_t k_max;
  size_t n_realizations;
  uint64_t master_seed;
} DtCircuitConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *dt_last_error_message(void);

/**
 * Random stream `stream_id` of `seed`. Never NULL.
 */
struct DtRng *dt_rng_new(uint64_t seed, uint64_t stream_id);

/**
 * # Safety
 * `rng` must be NULL or a handle from [`dt_rng_new`] not yet freed.
 */
void dt_rng_free(struct DtRng *rng);

/**
 * The initial product state `|0>` for `cfg`.
 *
 * # Safety
 * `cfg` must point to a valid config and `out` to writable storage.
 */
enum DtStatus dt_state_init(const struct DtCircuitConfig *cfg, struct DtState **out);

/**
 * The state right after the bath gate of depth `depth`, evolved from
 * `|0>` with draws from `rng`.
 *
 * # Safety
 * Pointers must be valid; `rng` is advanced.
 */
enum DtStatus dt_evolve(const struct DtCircuitConfig *cfg,
                        struct DtRng *rng,
                        size_t depth,
                        struct DtState **out);

/**
 * # Safety
 * `state` must be NULL or a live state handle.
 */
void dt_state_free(struct DtState *state);

/**
 * # Safety
 * All pointers must be valid.
 */
enum DtStatus dt_state_dims(const struct DtState *state, size_t *d_a, size_t *d_b1, size_t *q);

/**
 * Applies one Haar-random system gate on `A B1`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum DtStatus dt_state_apply_system_gate(struct DtState *state, struct DtRng *rng);

/**
 * Applies one Haar-random bath gate on `B1 B2`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum DtStatus dt_state_apply_bath_gate(struct DtState *state, struct DtRng *rng);

/**
 * Purity and second Renyi entropy (bits) of the reduced state on `A`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum DtStatus dt_state_purity(const struct DtState *state, double *purity, double *s2);

/**
 * Projected ensemble on `A` from measuring the bath in its computational basis.
 *
 * # Safety
 * Pointers must be valid.
 */
enum DtStatus dt_ensemble_project(const struct DtState *state, struct DtEnsemble **out);

/**
 * Ensemble from `n` weights and `n` unnormalized-or-normalized states of
 * dimension `d_a`, given as interleaved `(re, im)` pairs (`2 n d_a` doubles).
 *
 * # Safety
 * `weights` must hold `n` doubles and `amps` `2 n d_a` doubles.
 */
enum DtStatus dt_ensemble_from_weighted(size_t d_a,
                                        size_t n,
                                        const double *weights,
                                        const double *amps,
                                        struct DtEnsemble **out);

/**
 * Number of retained outcomes; 0 for NULL.
 *
 * # Safety
 * `ens` must be NULL or a live ensemble handle.
 */
size_t dt_ensemble_len(const struct DtEnsemble *ens);

/**
 * Probability mass dropped below the outcome threshold; NaN for NULL.
 *
 * # Safety
 * `ens` must be NULL or a live ensemble handle.
 */
double dt_ensemble_discarded_mass(const struct DtEnsemble *ens);

/**
 * # Safety
 * `ens` must be NULL or a live ensemble handle.
 */
void dt_ensemble_free(struct DtEnsemble *ens);

/**
 * `k`-th moment operator of the ensemble.
 *
 * # Safety
 * Pointers must be valid.
 */
enum DtStatus dt_moment_new(const struct DtEnsemble *ens, size_t k, struct DtMoment **out);

/**
 * Dimension of the symmetric subspace; 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live moment handle.
 */
size_t dt_moment_dim(const struct DtMoment *m);

/**
 * # Safety
 * Pointers must be valid.
 */
enum DtStatus dt_moment_frame_potential(const struct DtMoment *m, double *out);

/**
 * Design distance to the Haar moment of the same order.
 *
 * # Safety
 * Pointers must be valid.
 */
enum DtStatus dt_moment_delta(const struct DtMoment *m, double *out);

/**
 * # Safety
 * `m` must be NULL or a live moment handle.
 */
void dt_moment_free(struct DtMoment *m);

double dt_haar_frame_potential(size_t k, size_t d_a);

/**
 * `f(k, d_a) = sqrt((1 + d_a) / (1 + d_a / k))`.
 */
double dt_theory_f_ratio(size_t k, size_t d_a);

/**
 * Infinite-bath purity of `A` after `t` steps.
 */
double dt_theory_purity(size_t t, size_t d_a, size_t d_b1);

/**
 * r.m.s. design distance of a Haar-random state with bath dimension `d_b`.
 */
double dt_theory_haar_floor(size_t k, size_t d_a, size_t d_b);

/**
 * Design time `t_k` in circuit steps.
 *
 * # Safety
 * `out` must be valid.
 */
enum DtStatus dt_theory_design_time(size_t k,
                                    size_t d_a,
                                    size_t d_b1,
                                    size_t q,
                                    double eps,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEEPTHERMAL_H */
