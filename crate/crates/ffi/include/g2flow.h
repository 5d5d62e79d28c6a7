#ifndef G2FLOW_H
#define G2FLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  G2_STATUS_OK = 0,
  G2_STATUS_NULL_POINTER = 1,
  G2_STATUS_INVALID_ARGUMENT = 2,
  G2_STATUS_NUMERICAL = 3,
  G2_STATUS_UNDECIDED = 4,
  G2_STATUS_NOT_CLOSED = 5,
  G2_STATUS_OUT_OF_RANGE = 6,
  G2_STATUS_PANIC = 7,
} G2Status;

typedef enum {
  G2_VERDICT_ABELIAN = 0,
  G2_VERDICT_COMPLETE_EXPONENTIAL = 1,
  G2_VERDICT_COMPLETE_BOUNDARY = 2,
  G2_VERDICT_INCOMPLETE = 3,
  G2_VERDICT_UNDECIDED = 4,
} G2Verdict;

// A classified instanton trajectory.
typedef struct G2Instanton G2Instanton;

// A flowed B7 metric.
typedef struct G2Metric G2Metric;

// A classified lattice of initial conditions.
typedef struct G2ScanMap G2ScanMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *g2flow_version(void);

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next call into the library on this thread.
const char *g2flow_last_error(void);

// Flows the family member `(r0, abar)` to `t_max`.
//
// # Safety
// `out` must be a valid pointer to writable storage for a handle.
G2Status g2flow_metric_new(double r0, double abar, double t_max, double rel_tol, G2Metric **out);

// # Safety
// `m` must be null or a handle from [`g2flow_metric_new`] not yet freed.
void g2flow_metric_free(G2Metric *m);

// Asymptotic circle length `ℓ` and its fit error. Fails with
// `Numerical` for members that are not ALC.
//
// # Safety
// `m` must be a live metric handle; `ell` must be writable, `fit_err` may be null.
G2Status g2flow_metric_ell(const G2Metric *m, double *ell, double *fit_err);

// Writes `(A₁, A₃, B₁, B₃)` at `t` into `out[0..4]`.
//
// # Safety
// `m` must be a live metric handle and `out` must point to four writable doubles.
G2Status g2flow_metric_coeffs(const G2Metric *m, double t, double *out);

// Flows and classifies the instanton with initial data `(f1, g1)`.
//
// # Safety
// `m` must be a live metric handle and `out` writable.
G2Status g2flow_instanton_new(const G2Metric *m,
                              double f1,
                              double g1,
                              double t_max,
                              double rel_tol,
                              G2Instanton **out);

// # Safety
// `h` must be null or a handle from [`g2flow_instanton_new`] not yet freed.
void g2flow_instanton_free(G2Instanton *h);

// Verdict with `G∞` and `λ` (NaN where not defined).
//
// # Safety
// `h` must be a live instanton handle; `kind` writable; `g_inf`, `lambda` may be null.
G2Status g2flow_instanton_verdict(const G2Instanton *h,
                                  G2Verdict *kind,
                                  double *g_inf,
                                  double *lambda);

// Number of stored samples.
//
// # Safety
// `h` must be a live instanton handle and `len` writable.
G2Status g2flow_instanton_len(const G2Instanton *h, uintptr_t *len);

// Sample `i` as `(t, f⁺, g⁺)`.
//
// # Safety
// `h` must be a live instanton handle; the outputs must be writable.
G2Status g2flow_instanton_sample(const G2Instanton *h,
                                 uintptr_t i,
                                 double *t,
                                 double *f,
                                 double *g);

// Classifies the `n_f × n_g` lattice over `[f1_lo, f1_hi] × [g1_lo, g1_hi]`.
//
// # Safety
// `m` must be a live metric handle and `out` writable.
G2Status g2flow_scan_new(const G2Metric *m,
                         double f1_lo,
                         double f1_hi,
                         double g1_lo,
                         double g1_hi,
                         uintptr_t n_f,
                         uintptr_t n_g,
                         double t_max,
                         double rel_tol,
                         G2ScanMap **out);

// # Safety
// `s` must be null or a handle from [`g2flow_scan_new`] not yet freed.
void g2flow_scan_free(G2ScanMap *s);

// Verdict of cell `(i, j)` (column `i` in `f₁`, row `j` in `g₁`).
//
// # Safety
// `s` must be a live scan handle; `kind` writable; `g_inf` may be null.
G2Status g2flow_scan_cell(const G2ScanMap *s,
                          uintptr_t i,
                          uintptr_t j,
                          G2Verdict *kind,
                          double *g_inf);

// Bisects for the boundary in `f₁` at fixed `g1` within `[lo, hi]`.
//
// # Safety
// `m` must be a live metric handle; `f_boundary` writable; `g_inf_check` may be null.
G2Status g2flow_boundary(const G2Metric *m,
                         double g1,
                         double lo,
                         double hi,
                         double tol,
                         double t_max,
                         double rel_tol,
                         double *f_boundary,
                         double *g_inf_check);

// Shoots back from end data `(g_inf, lambda)` at `t_end` to initial data
// `(f1, g1)`. Returns `NotClosed` when the solution does not reach the
// singular orbit.
//
// # Safety
// `m` must be a live metric handle; `f1`, `g1` writable.
G2Status g2flow_end_shoot(const G2Metric *m,
                          double g_inf,
                          double lambda,
                          double t_end,
                          double rel_tol,
                          double *f1,
                          double *g1);

// ASD instanton `(a₁, a₃)` on Taub-NUT with parameter `m` at `eta`, for
// the two-parameter family `(C, D)`.
//
// # Safety
// `a1` and `a3` must be writable.
G2Status g2flow_asd_eval(double m, double c, double d, double eta, double *a1, double *a3);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* G2FLOW_H */
