#ifndef NDTMCL_H
#define NDTMCL_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status of a call. Nonzero codes mirror the CLI exit codes.
 */
typedef enum NdtmclStatus {
  NDTMCL_STATUS_OK = 0,
  /**
   * A pointer argument was null or a name was not recognized.
   */
  NDTMCL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * An input file had the wrong magic, version or layout.
   */
  NDTMCL_STATUS_BAD_FORMAT = 3,
  NDTMCL_STATUS_RUNTIME_ERROR = 4,
} NdtmclStatus;

typedef struct NdtmclMap NdtmclMap;

typedef struct NdtmclSession NdtmclSession;

typedef struct NdtmclTrajectory NdtmclTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the message of the most recent error on this thread into `buf`
 * (always NUL-terminated, truncated to `len`). Returns the full
 * message length in bytes, excluding the terminator.
 */
uintptr_t ndtmcl_last_error_message(char *buf, uintptr_t len);

/**
 * Generate a synthetic session with default world parameters.
 */
enum NdtmclStatus ndtmcl_session_generate(uint64_t seed,
                                          double duration_s,
                                          struct NdtmclSession **out);

enum NdtmclStatus ndtmcl_session_read(const char *path, struct NdtmclSession **out);

enum NdtmclStatus ndtmcl_session_write(const struct NdtmclSession *session, const char *path);

uintptr_t ndtmcl_session_frame_count(const struct NdtmclSession *session);

void ndtmcl_session_free(struct NdtmclSession *session);

/**
 * Build a map from a session. `map_type` is "baseline" or "static".
 */
enum NdtmclStatus ndtmcl_map_build(const struct NdtmclSession *session,
                                   const char *map_type,
                                   struct NdtmclMap **out);

enum NdtmclStatus ndtmcl_map_read(const char *path, struct NdtmclMap **out);

enum NdtmclStatus ndtmcl_map_write(const struct NdtmclMap *map, const char *path);

uintptr_t ndtmcl_map_cell_count(const struct NdtmclMap *map);

void ndtmcl_map_free(struct NdtmclMap *map);

/**
 * Localize a session against a map. `method` is one of baseline,
 * filtered, static, combined.
 */
enum NdtmclStatus ndtmcl_localize(const struct NdtmclSession *session,
                                  const struct NdtmclMap *map,
                                  const char *method,
                                  uint64_t seed,
                                  struct NdtmclTrajectory **out);

uintptr_t ndtmcl_trajectory_len(const struct NdtmclTrajectory *trajectory);

/**
 * Fetch one estimated pose. Returns false if the index is out of range
 * or any pointer is null.
 */
bool ndtmcl_trajectory_pose(const struct NdtmclTrajectory *trajectory,
                            uintptr_t index,
                            double *t,
                            double *x,
                            double *y,
                            double *psi);

double ndtmcl_trajectory_ate_rmse(const struct NdtmclTrajectory *trajectory);

double ndtmcl_trajectory_rpe_rmse(const struct NdtmclTrajectory *trajectory);

void ndtmcl_trajectory_free(struct NdtmclTrajectory *trajectory);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NDTMCL_H */
