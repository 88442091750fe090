/* cfsim — cell-free massive MIMO uplink simulator.
 *
 * C API over the simulator core. All entry points are thread-compatible:
 * distinct handles may be used from distinct threads, a single handle must
 * not be shared without external locking. Strings returned by the API are
 * owned by the handle (or, for cfsim_global_error, by thread-local storage)
 * and stay valid until the next call on the same handle.
 */

#ifndef CFSIM_H
#define CFSIM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct cfsim_sim cfsim_sim; /* opaque simulator handle */

typedef enum cfsim_status {
  CFSIM_OK = 0,
  CFSIM_ERR_INVALID_ARGUMENT = 1,
  CFSIM_ERR_CONFIG = 2,   /* bad config values or validation failure */
  CFSIM_ERR_CAPACITY = 3, /* exact-ML enumeration cap exceeded */
  CFSIM_ERR_NUMERIC = 4,  /* singular/ill-conditioned linear system */
  CFSIM_ERR_PIPELINE = 5, /* internal ordering bug */
  CFSIM_ERR_IO = 6,
  CFSIM_ERR_INTERNAL = 7
} cfsim_status;

const char* cfsim_version(void);
const char* cfsim_status_name(cfsim_status status);

/* Error message for the last failed call on this handle. */
const char* cfsim_error(const cfsim_sim* sim);
/* Error message for the last failed cfsim_create* call on this thread. */
const char* cfsim_global_error(void);

/* Create a simulator from a JSON config (empty or "{}" for defaults), or
 * from a config file. On failure returns a status and leaves *out NULL. */
cfsim_status cfsim_create(const char* config_json, cfsim_sim** out);
cfsim_status cfsim_create_from_file(const char* path, cfsim_sim** out);
void cfsim_destroy(cfsim_sim* sim);

/* Config overrides applied on top of the loaded config. The detector list is
 * comma-separated, e.g. "mrc,pm(4),c_pm(4)". */
cfsim_status cfsim_set_seed(cfsim_sim* sim, uint64_t seed);
cfsim_status cfsim_set_threads(cfsim_sim* sim, int threads);
cfsim_status cfsim_set_detectors(cfsim_sim* sim, const char* comma_list);

/* Resolved configuration as JSON. */
const char* cfsim_describe(cfsim_sim* sim);

/* Runs the FER sweep; fetch results with cfsim_csv / cfsim_write_csv.
 * CSV columns: detector,r,N,snr_db,frames,frame_errors,fer,wall_seconds,
 * op_count. */
cfsim_status cfsim_run_sweep(cfsim_sim* sim);
const char* cfsim_csv(const cfsim_sim* sim);
cfsim_status cfsim_write_csv(cfsim_sim* sim, const char* path);

/* Runs the built-in oracle/invariant battery. Returns CFSIM_OK with
 * *checks_failed set (0 when everything passed); the per-check report is
 * available through cfsim_report. */
cfsim_status cfsim_validate(cfsim_sim* sim, int* checks_failed);
const char* cfsim_report(const cfsim_sim* sim);

#ifdef __cplusplus
}
#endif

#endif /* CFSIM_H */
