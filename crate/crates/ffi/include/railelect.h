#ifndef RAILELECT_H
#define RAILELECT_H

/* Generated by cbindgen from railelect-ffi; edit the Rust source instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call in this ABI. Zero is success.
 */
typedef enum RailStatus {
  RailStatus_Ok = 0,
  RailStatus_NullPointer = 1,
  RailStatus_InvalidUtf8 = 2,
  RailStatus_BadGraphSpec = 3,
  RailStatus_BadTrainLen = 4,
  RailStatus_BadInit = 5,
  RailStatus_BadSnapshot = 6,
  RailStatus_NodeCountMismatch = 7,
  RailStatus_AnalysisBudget = 8,
} RailStatus;

/**
 * A running simulation: graph, parameters, round randomness, and the
 * current configuration. Opaque; create with `rail_sim_new`, release with
 * `rail_sim_free`.
 */
typedef struct RailSim RailSim;

/**
 * Per-round aggregates. Fields typed `int64_t` use -1 for "absent".
 */
typedef struct RailMetrics {
  uint64_t round;
  uint64_t leader_count;
  uint64_t marked_wagon_count;
  uint64_t err_trigger_count;
  /**
   * Minimum value over complete unmarked trains, -1 when there are none.
   */
  int64_t min_unmarked_train_value;
  /**
   * Minimum value over complete marked trains, -1 when there are none.
   */
  int64_t min_marked_train_value;
  /**
   * Root of a legitimate configuration, -1 when not legitimate.
   */
  int64_t legitimate_leader;
} RailMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Smallest train length the protocol accepts for a graph with `nodes` nodes.
 */
uint8_t rail_min_train_len(size_t nodes);

/**
 * Creates a simulation and writes the handle to `out`.
 *
 * `graph_spec` uses the CLI grammar (`ring:6`, `path:8`, `grid:3x3`,
 * `gnp:8:0.4:7`, ...). `init` uses the init mode grammar (`uniform`,
 * `no-leader-coherent:3`, ...); passing NULL means `uniform`. `seed` feeds
 * both the round randomness and any init mode without its own seed.
 *
 * # Safety
 * `out` must be a valid pointer. String arguments must be NUL-terminated
 * or NULL.
 */
enum RailStatus rail_sim_new(const char *graph_spec,
                             uint8_t train_len,
                             uint64_t seed,
                             const char *init,
                             struct RailSim **out);

/**
 * Releases a handle from `rail_sim_new`. NULL is a no-op.
 *
 * # Safety
 * `sim` must be NULL or a handle not yet freed.
 */
void rail_sim_free(struct RailSim *sim);

/**
 * Advances the simulation by `rounds` synchronous rounds.
 *
 * # Safety
 * `sim` must be a live handle from `rail_sim_new`.
 */
enum RailStatus rail_sim_advance(struct RailSim *sim, uint64_t rounds);

/**
 * Advances the simulation by one round.
 *
 * # Safety
 * `sim` must be a live handle from `rail_sim_new`.
 */
enum RailStatus rail_sim_step(struct RailSim *sim);

/**
 * Current round number, 0 for a fresh simulation. Returns 0 on NULL.
 *
 * # Safety
 * `sim` must be NULL or a live handle.
 */
uint64_t rail_sim_round(const struct RailSim *sim);

/**
 * Number of nodes in the simulated graph. Returns 0 on NULL.
 *
 * # Safety
 * `sim` must be NULL or a live handle.
 */
size_t rail_sim_node_count(const struct RailSim *sim);

/**
 * Random bits consumed so far (two per node per round). Returns 0 on NULL.
 *
 * # Safety
 * `sim` must be NULL or a live handle.
 */
uint64_t rail_sim_bits_drawn(const struct RailSim *sim);

/**
 * Root of the current configuration when it is legitimate, else -1.
 *
 * # Safety
 * `sim` must be NULL or a live handle.
 */
int64_t rail_sim_legitimate_leader(const struct RailSim *sim);

/**
 * Fills `out` with aggregates for the current round.
 *
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum RailStatus rail_sim_metrics(const struct RailSim *sim, struct RailMetrics *out);

/**
 * Writes the current configuration as a NUL-terminated trace record to
 * `out`. Free the string with `rail_string_free`.
 *
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum RailStatus rail_sim_snapshot(const struct RailSim *sim, char **out);

/**
 * Replaces the current configuration with a parsed trace record. The record
 * must describe the same number of nodes as the simulated graph; the round
 * counter is taken from the record.
 *
 * # Safety
 * `sim` must be a live handle and `record` a NUL-terminated string.
 */
enum RailStatus rail_sim_restore(struct RailSim *sim, const char *record);

/**
 * Frees a string returned by this library. NULL is a no-op.
 *
 * # Safety
 * `s` must be NULL or a string returned by `rail_sim_snapshot`, not yet
 * freed.
 */
void rail_string_free(char *s);

/**
 * Static description of a status code. Never NULL; do not free.
 */
const char *rail_status_message(enum RailStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RAILELECT_H */
