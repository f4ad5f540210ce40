#ifndef SSM_H
#define SSM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SsmStatus {
  SSM_STATUS_OK = 0,
  SSM_STATUS_NULL_POINTER = 1,
  SSM_STATUS_INVALID_UTF8 = 2,
  SSM_STATUS_CONFIG = 3,
  SSM_STATUS_INVALID_INPUT = 4,
  SSM_STATUS_NUMERICAL = 5,
  SSM_STATUS_MISSING = 6,
  SSM_STATUS_IO = 7,
  SSM_STATUS_OUT_OF_RANGE = 8,
  SSM_STATUS_PANIC = 9,
} SsmStatus;

typedef enum SsmStage {
  SSM_STAGE_EQUILIBRIUM = 0,
  SSM_STAGE_PO = 1,
  SSM_STAGE_TORUS2 = 2,
} SsmStage;

typedef enum SsmFormat {
  SSM_FORMAT_CSV = 0,
  SSM_FORMAT_JSON = 1,
} SsmFormat;

typedef struct SsmDataset SsmDataset;

/**
 * Pipeline state: system, cached reduced model and stage results.
 */
typedef struct SsmSession SsmSession;

/**
 * One dataset row. Frequencies that do not apply are NaN.
 * `stability`: 1 stable, 0 unstable, -1 unknown. `event`: 0 none, then
 * SN, HB, PD, TR, BP, CP, EP as 1..7.
 */
typedef struct SsmRow {
  double omega;
  double eps;
  double ts;
  double om_s;
  double om1s;
  double om2s;
  double rho_rot;
  int32_t stability;
  int32_t event;
} SsmRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *ssm_last_error(void);

/**
 * Library version as a static string.
 */
const char *ssm_version(void);

/**
 * Start a session from a JSON run config.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SsmStatus ssm_session_new(const char *config_json, struct SsmSession **out);

/**
 * Start a session on the built-in two-oscillator example.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SsmStatus ssm_session_example1(struct SsmSession **out);

/**
 * # Safety
 * `session` must come from `ssm_session_new` or `ssm_session_example1` (or be null).
 */
void ssm_session_free(struct SsmSession *session);

/**
 * Run `stage` (an `SsmStage` value) and everything it depends on.
 *
 * # Safety
 * `session` must be a live handle and `out` a valid pointer.
 */
enum SsmStatus ssm_session_run(struct SsmSession *session, uint32_t stage, struct SsmDataset **out);

/**
 * # Safety
 * `dataset` must come from `ssm_session_run` (or be null).
 */
void ssm_dataset_free(struct SsmDataset *dataset);

/**
 * Row count and number of amplitude columns.
 *
 * # Safety
 * `dataset` must be a live handle; the outputs valid pointers.
 */
enum SsmStatus ssm_dataset_shape(const struct SsmDataset *dataset, size_t *rows, size_t *outputs);

/**
 * Row `index`; its amplitudes go to `amps`, which must hold one value per output.
 *
 * # Safety
 * `dataset` must be a live handle, `row` valid, and `amps` null or room for the outputs.
 */
enum SsmStatus ssm_dataset_row(const struct SsmDataset *dataset,
                               size_t index,
                               struct SsmRow *row,
                               double *amps);

/**
 * Write the dataset into directory `dir` as `frc_<stage>.csv` or `.json` (`format` is an `SsmFormat`).
 *
 * # Safety
 * `dataset` must be a live handle and `dir` a NUL-terminated string.
 */
enum SsmStatus ssm_dataset_export(const struct SsmDataset *dataset,
                                  const char *dir,
                                  uint32_t format);

/**
 * JSON text of the dataset (columns, rows, metadata). Free with `ssm_string_free`.
 *
 * # Safety
 * `dataset` must be a live handle and `out` a valid pointer.
 */
enum SsmStatus ssm_dataset_json(const struct SsmDataset *dataset, char **out);

/**
 * # Safety
 * `s` must come from this library (or be null).
 */
void ssm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSM_H */
