#ifndef HOPFMIN_H
#define HOPFMIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum HmStatus {
  HM_STATUS_OK = 0,
  HM_STATUS_NULL_POINTER = 1,
  HM_STATUS_INVALID_UTF8 = 2,
  HM_STATUS_INVALID_ARGUMENT = 3,
  // A point was off the declared space or a buffer had the wrong length.
  HM_STATUS_DOMAIN_VIOLATION = 4,
  HM_STATUS_UNSUPPORTED = 5,
  // Tracing, differentiation or linking did not converge.
  HM_STATUS_NUMERICAL_FAILURE = 6,
  HM_STATUS_ORACLE_DISAGREEMENT = 7,
  HM_STATUS_CONFIG = 8,
  HM_STATUS_IO = 9,
  HM_STATUS_PANIC = 10,
} HmStatus;

// Opaque handle to a built map.
typedef struct HmMap HmMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer is valid
// until the next failing call on the same thread.
const char *hm_last_error_message(void);

// Library version as a static string.
const char *hm_version(void);

// Build a map from a JSON descriptor.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum HmStatus hm_map_from_json(const char *json, struct HmMap **out);

// Build a map from a builtin name such as `hopf` or `power(2)`.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum HmStatus hm_map_builtin(const char *name, struct HmMap **out);

// Release a map. Null is ignored.
//
// # Safety
// `map` must come from this library and not have been freed.
void hm_map_free(struct HmMap *map);

// Ambient dimensions of the domain and codomain.
//
// # Safety
// `map` must be a live handle; the outputs must be writable.
enum HmStatus hm_map_dims(const struct HmMap *map, uintptr_t *domain, uintptr_t *codomain);

// The map's canonical JSON descriptor.
//
// # Safety
// `map` must be a live handle; `out` must be writable. Free the result with
// [`hm_string_free`].
enum HmStatus hm_map_to_json(const struct HmMap *map, char **out);

// Evaluate at `x` (ambient coordinates of the domain).
//
// # Safety
// `x` must hold `x_len` doubles and `out` room for `out_len` doubles.
enum HmStatus hm_map_evaluate(const struct HmMap *map,
                              const double *x,
                              uintptr_t x_len,
                              double *out,
                              uintptr_t out_len);

// Hopf invariant over the default pair of regular values. `step` ≤ 0 uses
// the default continuation step.
//
// # Safety
// `map` must be a live handle; non-null outputs must be writable. `gauss`
// may be null.
enum HmStatus hm_hopf_invariant(const struct HmMap *map,
                                double step,
                                uint64_t seed,
                                int64_t *value,
                                double *gauss);

// Pair-sampling lower bound and spectral estimate of the Lipschitz
// constant.
//
// # Safety
// `map` must be a live handle; the outputs must be writable.
enum HmStatus hm_lipschitz(const struct HmMap *map,
                           uintptr_t samples,
                           uint64_t seed,
                           double *pair_lower,
                           double *spectral_sup);

// Run a JSON run config, as accepted by `hopfmin run --config`, and return
// the JSON report. `exit_code` receives the command-line exit code the run
// would have produced. Output directories in the config are ignored.
//
// # Safety
// `config` must be a NUL-terminated string; the outputs must be writable.
// Free the report with [`hm_string_free`].
enum HmStatus hm_run_json(const char *config, char **report, int32_t *exit_code);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void hm_string_free(char *s);

// Quaternion product, components `(w, x, y, z)`.
//
// # Safety
// `a` and `b` must hold 4 doubles and `out` room for 4.
enum HmStatus hm_quat_mul(const double *a, const double *b, double *out);

// Octonion product in the Cayley–Dickson basis `e₀ … e₇`.
//
// # Safety
// `a` and `b` must hold 8 doubles and `out` room for 8.
enum HmStatus hm_oct_mul(const double *a, const double *b, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOPFMIN_H */
