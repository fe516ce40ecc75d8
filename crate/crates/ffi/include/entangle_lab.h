#ifndef ENTANGLE_LAB_H
#define ENTANGLE_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ElStatus {
  EL_STATUS_OK = 0,
  EL_STATUS_NULL_POINTER = 1,
  EL_STATUS_INVALID_ARGUMENT = 2,
  EL_STATUS_NUMERICAL_FAILURE = 3,
  EL_STATUS_PANIC = 4,
} ElStatus;

/**
 * Opaque formfactor handle.
 */
typedef struct ElFormfactor ElFormfactor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Sharp cutoff at `|p| = cutoff`.
 *
 * # Safety
 * `out` must be null or point to writable storage for one pointer.
 */
enum ElStatus el_formfactor_step(double cutoff, struct ElFormfactor **out);

/**
 * `exp(-p^2 / width)`.
 *
 * # Safety
 * `out` must be null or point to writable storage for one pointer.
 */
enum ElStatus el_formfactor_gaussian(double width, struct ElFormfactor **out);

/**
 * Smooth bump supported on `(lo, hi)`.
 *
 * # Safety
 * `out` must be null or point to writable storage for one pointer.
 */
enum ElStatus el_formfactor_bump(double lo, double hi, struct ElFormfactor **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `f` must be null or a handle from an `el_formfactor_*` constructor that has
 * not been freed.
 */
void el_formfactor_free(struct ElFormfactor *f);

/**
 * `f(x)`.
 *
 * # Safety
 * `f` must be a live handle; `out` must be writable.
 */
enum ElStatus el_formfactor_evaluate(const struct ElFormfactor *f, double x, double *out);

/**
 * Half-line transform `I(alpha)`. `tol = 0` selects the default tolerances.
 *
 * # Safety
 * `f` must be a live handle; `re` and `im` must be writable.
 */
enum ElStatus el_transform(const struct ElFormfactor *f,
                           double alpha,
                           double tol,
                           double *re,
                           double *im);

/**
 * Field amplitude `phi(r, t)`.
 *
 * # Safety
 * `f` must be a live handle; `re` and `im` must be writable.
 */
enum ElStatus el_phi(const struct ElFormfactor *f,
                     double r,
                     double t,
                     double tol,
                     double *re,
                     double *im);

/**
 * Coincidence base rate `|phi(r1, t)|^2 |phi(r2, t)|^2`.
 *
 * # Safety
 * `f` must be a live handle; `out` must be writable.
 */
enum ElStatus el_r0(const struct ElFormfactor *f,
                    double r1,
                    double r2,
                    double t,
                    double tol,
                    double *out);

/**
 * Singlet correlation `-a . b` for unit vectors given as three doubles each.
 *
 * # Safety
 * `a` and `b` must point to three readable doubles; `out` must be writable.
 */
enum ElStatus el_spin_correlation(const double *a, const double *b, double *out);

/**
 * Singlet CHSH value for coplanar settings given in degrees.
 *
 * # Safety
 * `out` must be writable.
 */
enum ElStatus el_chsh_coplanar(double a, double a_prime, double b, double b_prime, double *out);

/**
 * Largest reachable `|S|` for spatial factor `g`, and whether it exceeds 2.
 *
 * # Safety
 * `max_chsh` and `violated` must be writable.
 */
enum ElStatus el_violation_threshold(double g, double *max_chsh, bool *violated);

/**
 * Interferometer coincidence rate from a base rate `r0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum ElStatus el_coincidence_rate(double r0,
                                  double phi1,
                                  double phi2,
                                  double eta1,
                                  double eta2,
                                  double *out);

/**
 * Fringe visibility of `len` rates.
 *
 * # Safety
 * `rates` must point to `len` readable doubles; `out` must be writable.
 */
enum ElStatus el_visibility(const double *rates, size_t len, double *out);

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `cap` bytes, into `buf`. Returns the full message length
 * (excluding the terminator), so a too-small buffer can be detected.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t el_last_error_message(char *buf, size_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *el_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENTANGLE_LAB_H */
