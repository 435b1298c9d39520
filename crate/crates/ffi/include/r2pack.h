#ifndef R2PACK_H
#define R2PACK_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum R2Status {
  R2_STATUS_OK = 0,
  R2_STATUS_NULL_POINTER = 1,
  R2_STATUS_INVALID_ARGUMENT = 2,
  R2_STATUS_IO = 3,
  R2_STATUS_PARSE = 4,
  /**
   * The object lacks the requested data (e.g. a checkpoint without a reward buffer).
   */
  R2_STATUS_NOT_AVAILABLE = 5,
  R2_STATUS_FAILED = 6,
  R2_STATUS_PANIC = 7,
} R2Status;

/**
 * A generated or loaded problem instance.
 */
typedef struct R2Instance R2Instance;

/**
 * A network checkpoint, with its reward buffer when it has one.
 */
typedef struct R2Network R2Network;

/**
 * An agent's layout for one instance.
 */
typedef struct R2Solution R2Solution;

/**
 * One placed item.
 */
typedef struct R2Placement {
  uint64_t item_id;
  int64_t x;
  int64_t y;
  int64_t z;
  uint8_t orientation;
  int64_t l;
  int64_t w;
  int64_t h;
} R2Placement;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *r2_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *r2_version(void);

/**
 * Generates an instance by splitting a `bin_edge` square (dim 2) or cube
 * (dim 3) into `items` boxes.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum R2Status r2_instance_generate(uint8_t dim,
                                   size_t items,
                                   int64_t bin_edge,
                                   uint64_t seed,
                                   struct R2Instance **out);

/**
 * Loads an instance file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum R2Status r2_instance_load(const char *path, struct R2Instance **out);

/**
 * Writes an instance file.
 *
 * # Safety
 * `inst` must come from this library; `path` must be NUL-terminated.
 */
enum R2Status r2_instance_save(const struct R2Instance *inst, const char *path);

/**
 * Number of items in an instance.
 *
 * # Safety
 * `inst` must come from this library; `out` must be writable.
 */
enum R2Status r2_instance_len(const struct R2Instance *inst, size_t *out);

/**
 * Extents of item `index`, written to `dims[0..3]` (third extent is 1 in 2D).
 *
 * # Safety
 * `inst` must come from this library; `dims` must point to 3 writable `int64_t`.
 */
enum R2Status r2_instance_item(const struct R2Instance *inst, size_t index, int64_t *dims);

/**
 * Releases an instance. Null is ignored.
 *
 * # Safety
 * `inst` must come from this library and not be used afterwards.
 */
void r2_instance_free(struct R2Instance *inst);

/**
 * Loads a `.r2` checkpoint.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum R2Status r2_network_load(const char *path, struct R2Network **out);

/**
 * Releases a network. Null is ignored.
 *
 * # Safety
 * `net` must come from this library and not be used afterwards.
 */
void r2_network_free(struct R2Network *net);

/**
 * Ranking threshold at percentile `alpha` of the checkpoint's reward buffer.
 *
 * # Safety
 * `net` must come from this library; `out` must be writable.
 */
enum R2Status r2_network_threshold(const struct R2Network *net, double alpha, double *out);

/**
 * Nearest-rank threshold at percentile `alpha` over `len` rewards.
 *
 * # Safety
 * `rewards` must point to `len` readable doubles; `out` must be writable.
 */
enum R2Status r2_threshold(const double *rewards, size_t len, double alpha, double *out);

/**
 * Solves `inst` with the named agent (`lego`, `random`, `plain-mcts`,
 * `exhaustive`, `net-only`, `supervised-net`, `r2-mcts`). Network agents
 * need `net`; others accept null. `alpha` selects the ranking threshold for
 * `r2-mcts` from the checkpoint's buffer.
 *
 * # Safety
 * Handles must come from this library; `agent` must be NUL-terminated;
 * `out` must be writable.
 */
enum R2Status r2_solve(const struct R2Instance *inst,
                       const char *agent,
                       const struct R2Network *net,
                       size_t simulations,
                       double alpha,
                       uint64_t seed,
                       struct R2Solution **out);

/**
 * Terminal reward of a solution, in (0, 1].
 *
 * # Safety
 * `sol` must come from this library; `out` must be writable.
 */
enum R2Status r2_solution_reward(const struct R2Solution *sol, double *out);

/**
 * Enclosing-box cost of a solution.
 *
 * # Safety
 * `sol` must come from this library; `out` must be writable.
 */
enum R2Status r2_solution_cost(const struct R2Solution *sol, int64_t *out);

/**
 * Number of placements (equals the instance's item count).
 *
 * # Safety
 * `sol` must come from this library; `out` must be writable.
 */
enum R2Status r2_solution_len(const struct R2Solution *sol, size_t *out);

/**
 * Placement number `index`, in placement order.
 *
 * # Safety
 * `sol` must come from this library; `out` must be writable.
 */
enum R2Status r2_solution_placement(const struct R2Solution *sol,
                                    size_t index,
                                    struct R2Placement *out);

/**
 * Releases a solution. Null is ignored.
 *
 * # Safety
 * `sol` must come from this library and not be used afterwards.
 */
void r2_solution_free(struct R2Solution *sol);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* R2PACK_H */
