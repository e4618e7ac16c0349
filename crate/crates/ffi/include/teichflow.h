#ifndef TEICHFLOW_H
#define TEICHFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_POINTER = 1,
  TF_STATUS_INVALID_ARGUMENT = 2,
  TF_STATUS_CONFIG = 3,
  TF_STATUS_FLOW = 4,
  TF_STATUS_IO = 5,
  TF_STATUS_OUT_OF_RANGE = 6,
  TF_STATUS_PANIC = 7,
} TfStatus;

// A validated scenario configuration.
typedef struct TfScenario TfScenario;

// The output of one integration.
typedef struct TfTrace TfTrace;

// One trace row; mirrors the columns of `trace.csv`.
typedef struct TfRecord {
  double t;
  double z;
  double a;
  double b;
  double energy;
  double decay_rate;
  double tau_norm_sq;
  double phi_norm_sq;
  double wp_to_curve;
  double inj_radius;
  int64_t winding_index;
  double reduced_z;
} TfRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or an empty string. The
// pointer stays valid until the next failing call on the same thread.
const char *tf_last_error(void);

// Library version as a static NUL-terminated string.
const char *tf_version(void);

// Energy of the identity map from `(T², g_{a,b})` to `(T², g_{α,β})`.
//
// # Safety
// `out` must be null or point to writable memory for one `double`.
enum TfStatus tf_identity_energy(double a, double b, double alpha, double beta, double *out);

// Hyperbolic distance between `(a, b)` and `(α, β)` in the upper half-plane.
//
// # Safety
// `out` must be null or point to writable memory for one `double`.
enum TfStatus tf_hyperbolic_distance(double a, double b, double alpha, double beta, double *out);

// Half the systole of the flat torus `g_{a,b}`.
//
// # Safety
// `out` must be null or point to writable memory for one `double`.
enum TfStatus tf_injectivity_radius(double a, double b, double *out);

// Hopf coefficient of `id: (T², g_{a,b}) → (T², scale·g_{α,β})`.
//
// # Safety
// `re` and `im` must be null or point to writable `double`s.
enum TfStatus tf_hopf_coefficient(double a,
                                  double b,
                                  double alpha,
                                  double beta,
                                  double scale,
                                  double *re,
                                  double *im);

// Creates a scenario from a preset name (`winding-dehn`, `winding-loop`,
// `analytic-converging` or `custom`).
//
// # Safety
// `name` must be a NUL-terminated string; `out` must point to writable storage.
enum TfStatus tf_scenario_preset(const char *name, struct TfScenario **out);

// Parses a configuration file's text.
//
// # Safety
// `config_text` must be a NUL-terminated string; `out` must point to writable storage.
enum TfStatus tf_scenario_parse(const char *config_text, struct TfScenario **out);

// Serializes a scenario; free the string with [`tf_string_free`].
//
// # Safety
// `scenario` must be a live handle; `out` must point to writable storage.
enum TfStatus tf_scenario_to_text(const struct TfScenario *scenario, char **out);

// # Safety
// `scenario` must be null or a handle from this library that was not yet freed.
void tf_scenario_free(struct TfScenario *scenario);

// # Safety
// `s` must be null or a string returned by this library that was not yet freed.
void tf_string_free(char *s);

// Integrates the scenario in memory, without writing artifacts.
//
// # Safety
// `scenario` must be a live handle; `out` must point to writable storage.
enum TfStatus tf_scenario_integrate(const struct TfScenario *scenario, struct TfTrace **out);

// Runs the scenario and writes its artifacts under `output_root`.
//
// # Safety
// `scenario` must be a live handle; `output_root` a NUL-terminated path;
// `violations` null or writable.
enum TfStatus tf_scenario_run(const struct TfScenario *scenario,
                              const char *output_root,
                              size_t *violations);

// # Safety
// `trace` must be null or a handle from this library that was not yet freed.
void tf_trace_free(struct TfTrace *trace);

// Number of records in the trace.
//
// # Safety
// `trace` must be a live handle; `out` writable.
enum TfStatus tf_trace_len(const struct TfTrace *trace, size_t *out);

// Copies record `index` into `out`.
//
// # Safety
// `trace` must be a live handle; `out` writable.
enum TfStatus tf_trace_record(const struct TfTrace *trace, size_t index, struct TfRecord *out);

// Number of level-crossing and small-velocity events.
//
// # Safety
// `trace` must be a live handle; `out` writable.
enum TfStatus tf_trace_event_count(const struct TfTrace *trace, size_t *out);

// Runs the identity suites; `all_passed` receives the overall verdict.
//
// # Safety
// `all_passed` must be writable.
enum TfStatus tf_validate(uint64_t seed, double kappa, bool *all_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEICHFLOW_H */
