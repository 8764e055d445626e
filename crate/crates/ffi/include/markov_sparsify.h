#ifndef MARKOV_SPARSIFY_H
#define MARKOV_SPARSIFY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_INVALID_ARGUMENT = 2,
  MS_STATUS_INFEASIBLE = 3,
  MS_STATUS_TOO_LARGE = 4,
  MS_STATUS_NON_ERGODIC = 5,
  MS_STATUS_OUT_OF_REGIME = 6,
  MS_STATUS_NUMERICAL = 7,
  MS_STATUS_PANIC = 8,
  MS_STATUS_OTHER = 9,
} MsStatus;

typedef enum MsCompressorKind {
  MS_COMPRESSOR_KIND_IDENTITY = 0,
  MS_COMPRESSOR_KIND_RAND = 1,
  MS_COMPRESSOR_KIND_BAN_LAST = 2,
  MS_COMPRESSOR_KIND_KAWASAKI = 3,
} MsCompressorKind;

typedef enum MsActivation {
  MS_ACTIVATION_NORMALIZE = 0,
  MS_ACTIVATION_SOFTMAX = 1,
  MS_ACTIVATION_SIMPLEX_PROJECTION = 2,
} MsActivation;

// Exact mask-history chain with its cached stationary distribution.
typedef struct MsChain MsChain;

// Stateful compressor owning its history and random stream.
typedef struct MsCompressor MsCompressor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failing call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *ms_last_error_message(void);

// Create a compressor. `k`, `b` and `activation` are ignored by kinds that do
// not use them.
//
// # Safety
// `out` must be valid for writing one pointer.
enum MsStatus ms_compressor_new(enum MsCompressorKind kind,
                                size_t d,
                                size_t m,
                                size_t k,
                                double b,
                                enum MsActivation activation,
                                uint64_t seed,
                                struct MsCompressor **out);

// Compress `len` values from `input` into `output`. `coords_sent` may be null.
//
// # Safety
// `handle` must come from `ms_compressor_new`; `input` and `output` must be
// valid for `len` doubles and must not overlap.
enum MsStatus ms_compressor_compress(struct MsCompressor *handle,
                                     const double *input,
                                     size_t len,
                                     double *output,
                                     size_t *coords_sent);

// # Safety
// `handle` must come from `ms_compressor_new` or be null; it is invalid afterwards.
void ms_compressor_free(struct MsCompressor *handle);

// Build the exact chain over `K`-tuples of masks.
//
// # Safety
// `out` must be valid for writing one pointer.
enum MsStatus ms_chain_build(enum MsCompressorKind kind,
                             size_t d,
                             size_t m,
                             size_t k,
                             double b,
                             enum MsActivation activation,
                             struct MsChain **out);

// # Safety
// `handle` must come from `ms_chain_build`; `out` must be writable.
enum MsStatus ms_chain_num_states(const struct MsChain *handle, size_t *out);

// Write the stationary distribution over all `num_states` states (zero
// outside the recurrent class).
//
// # Safety
// `handle` must come from `ms_chain_build`; `out` must hold `len` doubles.
enum MsStatus ms_chain_stationary(struct MsChain *handle, double *out, size_t len);

// Smallest `t` with `max_s |P^t(s, .) - pi|_inf <= eps * pi_min`.
//
// # Safety
// `handle` must come from `ms_chain_build`; `out` must be writable.
enum MsStatus ms_chain_mixing_time(struct MsChain *handle, double eps, size_t *out);

// # Safety
// `handle` must come from `ms_chain_build` or be null; it is invalid afterwards.
void ms_chain_free(struct MsChain *handle);

// Expected hitting time of a fixed coordinate under uniform sampling: `alpha = d/m`.
//
// # Safety
// `out` must be writable.
enum MsStatus ms_hitting_time_rand(double alpha, double *out);

// Closed-form BanLast hitting time for history size `k`.
//
// # Safety
// `out` must be writable.
enum MsStatus ms_hitting_time_banlast(double alpha, size_t k, double *out);

// History size minimising the BanLast hitting time, capped at `k_max`.
//
// # Safety
// `out` must be writable.
enum MsStatus ms_optimal_history_size(double alpha, size_t k_max, size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MARKOV_SPARSIFY_H */
