#ifndef RSSI_PREDICT_H
#define RSSI_PREDICT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RpMethod {
  RP_METHOD_NORMAL_EQ = 0,
  RP_METHOD_ORTHONORMAL = 1,
  RP_METHOD_SIMPLIFIED = 2,
} RpMethod;

typedef enum RpMode {
  RP_MODE_TRACKING = 0,
  RP_MODE_FALLBACK = 1,
} RpMode;

// Result of every fallible call.
typedef enum RpStatus {
  RP_STATUS_OK = 0,
  RP_STATUS_NULL_POINTER = 1,
  RP_STATUS_INVALID_ARGUMENT = 2,
  RP_STATUS_IO = 3,
  RP_STATUS_MALFORMED_INPUT = 4,
  RP_STATUS_INSUFFICIENT_DATA = 5,
  RP_STATUS_DEGENERATE_MODEL = 6,
  RP_STATUS_LAG_MISMATCH = 7,
  RP_STATUS_PANIC = 99,
} RpStatus;

// Power controller for one link.
typedef struct RpAtpc RpAtpc;

// Fitted predictor.
typedef struct RpModel RpModel;

// Gap-aware RSSI trace.
typedef struct RpTrace RpTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread. Valid until the next
// failing call on the same thread; never null.
const char *rp_last_error(void);

// Library version as a static NUL-terminated string.
const char *rp_version(void);

// Loads a trace CSV (`seq,t_s,rssi_dbm[,tx_power_dbm]`).
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum RpStatus rp_trace_from_csv(const char *path, double interval_s, struct RpTrace **out);

// Builds a gap-free trace from `len` consecutive readings, seq `0..len`.
//
// # Safety
// `values` must point to `len` doubles; `out` must be writable.
enum RpStatus rp_trace_from_values(const double *values,
                                   size_t len,
                                   double interval_s,
                                   struct RpTrace **out);

// Number of received samples.
//
// # Safety
// `trace` must be a live handle or null.
enum RpStatus rp_trace_len(const struct RpTrace *trace, size_t *out);

// # Safety
// `trace` must come from an `rp_trace_*` constructor and not be used again.
void rp_trace_free(struct RpTrace *trace);

// Fits a predictor at `lag_steps` from `trace`.
//
// # Safety
// `trace` must be a live handle; `out` must be writable.
enum RpStatus rp_model_fit(const struct RpTrace *trace,
                           enum RpMethod method,
                           uint32_t lag_steps,
                           struct RpModel **out);

// Loads a model from its JSON dump.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum RpStatus rp_model_from_json(const char *json, struct RpModel **out);

// JSON dump of the model. Release with `rp_string_free`.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum RpStatus rp_model_to_json(const struct RpModel *model, char **out);

// Coefficients `(rho_r, rho_rp)` and fitting lag in seconds. `analytic_mse`
// is NaN for a model without fitting moments.
//
// # Safety
// `model` must be a live handle; the out pointers must be writable.
enum RpStatus rp_model_params(const struct RpModel *model,
                              double *rho_r,
                              double *rho_rp,
                              double *tau_s,
                              double *analytic_mse);

// RSSI `steps` intervals after an anchor reading with backward slope
// `anchor_slope` (dB/s).
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum RpStatus rp_model_predict(const struct RpModel *model,
                               double anchor_rssi,
                               double anchor_slope,
                               uint32_t steps,
                               double interval_s,
                               double *out);

// # Safety
// `model` must come from `rp_model_fit`/`rp_model_from_json` and not be used again.
void rp_model_free(struct RpModel *model);

// # Safety
// `s` must come from this library and not be used again.
void rp_string_free(char *s);

// Controller for a built-in radio (`"cc2538"` or `"cc1200"`) with default
// margin, window and missed-ACK budget.
//
// # Safety
// `radio` must be a NUL-terminated string; `out` must be writable.
enum RpStatus rp_atpc_new(const char *radio, double threshold_dbm, struct RpAtpc **out);

// Power for the next packet, dBm.
//
// # Safety
// `ctl` must be a live handle; `out` must be writable.
enum RpStatus rp_atpc_current_tx(const struct RpAtpc *ctl, double *out);

// Reports an ACK received at `ack_rssi_dbm`; writes the next tx power.
//
// # Safety
// `ctl` must be a live handle; `next_tx_dbm` must be writable.
enum RpStatus rp_atpc_on_ack(struct RpAtpc *ctl, double ack_rssi_dbm, double *next_tx_dbm);

// Reports a missing ACK; writes the next tx power and the controller mode.
//
// # Safety
// `ctl` must be a live handle; the out pointers must be writable.
enum RpStatus rp_atpc_on_missed_ack(struct RpAtpc *ctl, double *next_tx_dbm, enum RpMode *mode);

// # Safety
// `ctl` must come from `rp_atpc_new` and not be used again.
void rp_atpc_free(struct RpAtpc *ctl);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RSSI_PREDICT_H */
