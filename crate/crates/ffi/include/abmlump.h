#ifndef ABMLUMP_H
#define ABMLUMP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum AbmStatus {
  ABM_STATUS_OK = 0,
  ABM_STATUS_NULL_ARGUMENT = 1,
  ABM_STATUS_INVALID_UTF8 = 2,
  ABM_STATUS_SYNTAX = 3,
  ABM_STATUS_VALIDATION = 4,
  ABM_STATUS_DIMENSION = 5,
  ABM_STATUS_CAP_EXCEEDED = 6,
  ABM_STATUS_NOT_LUMPABLE = 7,
  ABM_STATUS_NO_ABSORBING_REACHABLE = 8,
  ABM_STATUS_NUMERICAL = 9,
  ABM_STATUS_IO = 10,
  ABM_STATUS_BUFFER_TOO_SMALL = 11,
  ABM_STATUS_PANIC = 12,
} AbmStatus;

/**
 * Absorption probabilities and expected times of a chain.
 */
typedef struct AbmAbsorption AbmAbsorption;

/**
 * A transition matrix, optionally tied to the configuration space it was
 * built on.
 */
typedef struct AbmChain AbmChain;

/**
 * Parsed model.
 */
typedef struct AbmModel AbmModel;

/**
 * Partition of a chain's states into labelled blocks.
 */
typedef struct AbmPartition AbmPartition;

/**
 * First violation found by [`abm_check_lumpable`]. The two block sums are
 * rounded to `double`.
 */
typedef struct AbmWitness {
  size_t source_block;
  size_t target_block;
  size_t state;
  size_t other_state;
  double state_sum;
  double other_sum;
} AbmWitness;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or an empty string.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *abm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *abm_version(void);

/**
 * Default enumeration cap (`2^24` configurations).
 */
uint64_t abm_default_cap(void);

/**
 * Parses a model document.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AbmStatus abm_model_parse(const char *source, struct AbmModel **out);

/**
 * Binary voter model on the complete graph with `n_agents` agents.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum AbmStatus abm_model_voter_complete(size_t n_agents, struct AbmModel **out);

/**
 * # Safety
 * `model` must be NULL or a handle from this library not yet freed.
 */
void abm_model_free(struct AbmModel *model);

/**
 * Number of agents, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t abm_model_n_agents(const struct AbmModel *model);

/**
 * Alphabet size δ, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t abm_model_delta(const struct AbmModel *model);

/**
 * Builds the exact micro chain. `cap` of 0 means the default cap.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum AbmStatus abm_chain_build(const struct AbmModel *model, uint64_t cap, struct AbmChain **out);

/**
 * Reads a chain in the sparse text format.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AbmStatus abm_chain_parse(const char *source, struct AbmChain **out);

/**
 * # Safety
 * `chain` must be NULL or a handle from this library not yet freed.
 */
void abm_chain_free(struct AbmChain *chain);

/**
 * Number of states, or 0 for NULL.
 *
 * # Safety
 * `chain` must be NULL or a live handle.
 */
size_t abm_chain_n_states(const struct AbmChain *chain);

/**
 * Number of stored nonzero entries, or 0 for NULL.
 *
 * # Safety
 * `chain` must be NULL or a live handle.
 */
size_t abm_chain_nnz(const struct AbmChain *chain);

/**
 * `P(x, y)` rounded to `double`.
 *
 * # Safety
 * `chain` must be a live handle and `out` a valid pointer.
 */
enum AbmStatus abm_chain_transition(const struct AbmChain *chain, size_t x, size_t y, double *out);

/**
 * `P(x, y)` exactly, as `num/den`.
 *
 * # Safety
 * `chain` must be a live handle, `buf` writable for `len` bytes (or NULL
 * to query the size) and `needed` a valid pointer.
 */
enum AbmStatus abm_chain_transition_text(const struct AbmChain *chain,
                                         size_t x,
                                         size_t y,
                                         char *buf,
                                         size_t len,
                                         size_t *needed);

/**
 * The chain in the sparse text format.
 *
 * # Safety
 * As for [`abm_chain_transition_text`].
 */
enum AbmStatus abm_chain_to_text(const struct AbmChain *chain,
                                 char *buf,
                                 size_t len,
                                 size_t *needed);

/**
 * Checks every generator of `gens` (a comma-separated preset list such as
 * `"SN"` or `"flip"`) against the chain. `*symmetric` is 1 or 0.
 *
 * # Safety
 * `model` and `chain` must be live handles, `gens` a NUL-terminated string
 * and `symmetric` a valid pointer. The chain must have been built from
 * `model`.
 */
enum AbmStatus abm_check_symmetric(const struct AbmModel *model,
                                   const struct AbmChain *chain,
                                   const char *gens,
                                   int32_t *symmetric);

/**
 * Orbit partition of the model's configuration space under a preset list.
 *
 * # Safety
 * `model` must be a live handle, `gens` a NUL-terminated string and `out`
 * a valid pointer.
 */
enum AbmStatus abm_partition_orbits(const struct AbmModel *model,
                                    const char *gens,
                                    struct AbmPartition **out);

/**
 * Canonical partition of the model's space: `"frequency"`, `"moran"`
 * (counting the first attribute), `"moran:<label>"`, `"half"`, or
 * `"pairing"` (the `N + 1` Moran states paired as `{k, N - k}`).
 *
 * # Safety
 * `model` must be a live handle, `kind` a NUL-terminated string and `out`
 * a valid pointer.
 */
enum AbmStatus abm_partition_canonical(const struct AbmModel *model,
                                       const char *kind,
                                       struct AbmPartition **out);

/**
 * Reads a partition file (`label: idx idx ...` per line) over `n_states`.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AbmStatus abm_partition_parse(const char *source, size_t n_states, struct AbmPartition **out);

/**
 * # Safety
 * `part` must be NULL or a handle from this library not yet freed.
 */
void abm_partition_free(struct AbmPartition *part);

/**
 * Number of blocks, or 0 for NULL.
 *
 * # Safety
 * `part` must be NULL or a live handle.
 */
size_t abm_partition_n_blocks(const struct AbmPartition *part);

/**
 * Block index of state `x`.
 *
 * # Safety
 * `part` must be a live handle and `out` a valid pointer.
 */
enum AbmStatus abm_partition_block_of(const struct AbmPartition *part, size_t x, size_t *out);

/**
 * Label of block `k`.
 *
 * # Safety
 * As for [`abm_chain_transition_text`], with `part` a live handle.
 */
enum AbmStatus abm_partition_label(const struct AbmPartition *part,
                                   size_t k,
                                   char *buf,
                                   size_t len,
                                   size_t *needed);

/**
 * The partition in its text format.
 *
 * # Safety
 * As for [`abm_chain_transition_text`], with `part` a live handle.
 */
enum AbmStatus abm_partition_to_text(const struct AbmPartition *part,
                                     char *buf,
                                     size_t len,
                                     size_t *needed);

/**
 * Exact strong-lumpability test. Sets `*lumpable` to 1 or 0; when 0 and
 * `witness` is not NULL, fills it with the first violation.
 *
 * # Safety
 * `chain` and `part` must be live handles, `lumpable` a valid pointer and
 * `witness` NULL or valid.
 */
enum AbmStatus abm_check_lumpable(const struct AbmChain *chain,
                                  const struct AbmPartition *part,
                                  int32_t *lumpable,
                                  struct AbmWitness *witness);

/**
 * Lumped chain over the partition's blocks. Fails with
 * `ABM_STATUS_NOT_LUMPABLE` unless `force` is nonzero, in which case each
 * block's reference row is aggregated.
 *
 * # Safety
 * `chain` and `part` must be live handles and `out` a valid pointer.
 */
enum AbmStatus abm_lump(const struct AbmChain *chain,
                        const struct AbmPartition *part,
                        int32_t force,
                        struct AbmChain **out);

/**
 * Absorption analysis of a chain whose every state reaches an absorbing state.
 *
 * # Safety
 * `chain` must be a live handle and `out` a valid pointer.
 */
enum AbmStatus abm_absorption_analyze(const struct AbmChain *chain, struct AbmAbsorption **out);

/**
 * # Safety
 * `abs` must be NULL or a handle from this library not yet freed.
 */
void abm_absorption_free(struct AbmAbsorption *abs);

/**
 * Probability of ending in absorbing state `target` from `from`.
 *
 * # Safety
 * `abs` must be a live handle and `out` a valid pointer.
 */
enum AbmStatus abm_absorption_probability(const struct AbmAbsorption *abs,
                                          size_t from,
                                          size_t target,
                                          double *out);

/**
 * Expected number of steps to absorption from `from`.
 *
 * # Safety
 * `abs` must be a live handle and `out` a valid pointer.
 */
enum AbmStatus abm_absorption_expected_steps(const struct AbmAbsorption *abs,
                                             size_t from,
                                             double *out);

/**
 * Worst residual of the linear solves behind the report.
 *
 * # Safety
 * `abs` must be NULL or a live handle; NULL gives NaN.
 */
double abm_absorption_residual(const struct AbmAbsorption *abs);

/**
 * Whether the chain was built from a model (1) or read from text (0).
 *
 * # Safety
 * `chain` must be NULL or a live handle.
 */
int32_t abm_chain_has_space(const struct AbmChain *chain);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ABMLUMP_H */
