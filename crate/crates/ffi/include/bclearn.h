#ifndef BCLEARN_H
#define BCLEARN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum BcStatus {
  BC_STATUS_OK = 0,
  BC_STATUS_NULL_POINTER = 1,
  BC_STATUS_INVALID_ARGUMENT = 2,
  BC_STATUS_IO = 3,
  BC_STATUS_PARSE = 4,
  BC_STATUS_INVARIANT = 5,
  BC_STATUS_PANIC = 6,
} BcStatus;

/**
 * How the completion distribution is chosen for each family.
 */
typedef enum BcPhi {
  BC_PHI_MAR = 0,
  BC_PHI_UNIFORM = 1,
} BcPhi;

/**
 * Opaque dataset handle.
 */
typedef struct BcDataset BcDataset;

/**
 * Opaque network handle.
 */
typedef struct BcModel BcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *bc_last_error_message(void);

/**
 * Loads a CSV file. `missing_token` may be null for the default `?`.
 *
 * # Safety
 * `path` and a non-null `missing_token` must be NUL-terminated strings;
 * `out` must be writable.
 */
enum BcStatus bc_dataset_load_csv(const char *path,
                                  const char *missing_token,
                                  struct BcDataset **out);

/**
 * Builds a dataset from a row-major cell buffer of `num_cases * num_variables`
 * state indices, `-1` marking a missing entry. Variables are named `X1..Xn`
 * and their states `1..c`.
 *
 * # Safety
 * `cardinalities` must hold `num_variables` entries and `cells` the full
 * buffer; `out` must be writable.
 */
enum BcStatus bc_dataset_from_cells(uintptr_t num_variables,
                                    const uint32_t *cardinalities,
                                    uintptr_t num_cases,
                                    const int32_t *cells,
                                    struct BcDataset **out);

/**
 * Samples `n` complete cases from a built-in network (`M1`..`M4`).
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum BcStatus bc_dataset_simulate(const char *spec,
                                  uintptr_t n,
                                  uint64_t seed,
                                  struct BcDataset **out);

/**
 * Returns a copy of `d` in which `fraction` of all entries are missing.
 *
 * # Safety
 * `d` must be a live handle; `out` must be writable.
 */
enum BcStatus bc_dataset_delete_entries(const struct BcDataset *d,
                                        double fraction,
                                        uint64_t seed,
                                        struct BcDataset **out);

/**
 * Writes the number of cases, variables and missing entries. Any output
 * pointer may be null.
 *
 * # Safety
 * `d` must be a live handle; non-null outputs must be writable.
 */
enum BcStatus bc_dataset_shape(const struct BcDataset *d,
                               uintptr_t *num_cases,
                               uintptr_t *num_variables,
                               uintptr_t *num_missing);

/**
 * # Safety
 * `d` must be null or a handle not yet freed.
 */
void bc_dataset_free(struct BcDataset *d);

/**
 * Tallies the family of `child` given `parents`.
 *
 * `obs` and `comp` receive `q * c` counts laid out by parent configuration
 * then child state, where `q` is the product of parent cardinalities and
 * `c` the child cardinality. `parent_obs` and `parent_comp` receive `q`
 * counts each. Pass `len = 0` and null buffers to learn `q * c` through
 * `cells_out` first; any buffer may be null to skip it.
 *
 * # Safety
 * `parents` must hold `num_parents` entries; non-null buffers must hold
 * the sizes above.
 */
enum BcStatus bc_family_counts(const struct BcDataset *d,
                               uint32_t child,
                               const uint32_t *parents,
                               uintptr_t num_parents,
                               uint64_t *obs,
                               uint64_t *comp,
                               uint64_t *parent_obs,
                               uint64_t *parent_comp,
                               uintptr_t len,
                               uintptr_t *cells_out);

/**
 * Greedy search under a variable order. `order` may be null for the
 * column order; `max_parents < 0` means unbounded.
 *
 * # Safety
 * `d` must be a live handle, a non-null `order` must hold `order_len`
 * entries, and `out` must be writable.
 */
enum BcStatus bc_learn(const struct BcDataset *d,
                       const uint32_t *order,
                       uintptr_t order_len,
                       int32_t max_parents,
                       double alpha,
                       double beta,
                       enum BcPhi phi,
                       struct BcModel **out);

/**
 * Builds a network over the variables of `d` from `num_arcs` arcs given
 * as parallel `from`/`to` index arrays.
 *
 * # Safety
 * `from` and `to` must each hold `num_arcs` entries; `out` must be writable.
 */
enum BcStatus bc_model_from_arcs(const struct BcDataset *d,
                                 const uint32_t *from,
                                 const uint32_t *to,
                                 uintptr_t num_arcs,
                                 struct BcModel **out);

/**
 * Log marginal likelihood of `m` given `d`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum BcStatus bc_score(const struct BcModel *m,
                       const struct BcDataset *d,
                       double alpha,
                       double beta,
                       enum BcPhi phi,
                       double *out);

/**
 * Number of arcs in `m`.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum BcStatus bc_model_num_arcs(const struct BcModel *m, uintptr_t *out);

/**
 * Copies arcs, sorted by child then parent, into `from`/`to`, which must
 * hold at least `capacity` entries.
 *
 * # Safety
 * `m` must be a live handle; buffers must hold `capacity` entries.
 */
enum BcStatus bc_model_arcs(const struct BcModel *m,
                            uint32_t *from,
                            uint32_t *to,
                            uintptr_t capacity);

/**
 * Serializes `m` as JSON. Release the string with `bc_string_free`.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum BcStatus bc_model_to_json(const struct BcModel *m, char **out);

/**
 * Renders `m` in DOT. Release the string with `bc_string_free`.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum BcStatus bc_model_to_dot(const struct BcModel *m, char **out);

/**
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void bc_model_free(struct BcModel *m);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void bc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BCLEARN_H */
