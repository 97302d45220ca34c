#ifndef PSICOPULA_H
#define PSICOPULA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PsicStatus {
  PSIC_STATUS_OK = 0,
  PSIC_STATUS_NULL_POINTER = 1,
  PSIC_STATUS_INVALID_ARGUMENT = 2,
  PSIC_STATUS_NON_DIFFERENTIABLE = 3,
  PSIC_STATUS_NON_CONVERGENCE = 4,
  PSIC_STATUS_IO = 5,
  PSIC_STATUS_PANIC = 6,
} PsicStatus;

// Cell probabilities used by [`psic_generator_region`].
typedef enum PsicSource {
  // Exact rectangle masses of the generator.
  PSIC_SOURCE_TRUE = 0,
  // Rectangle masses clamped at zero and renormalized.
  PSIC_SOURCE_SEMIPARAMETRIC = 1,
} PsicSource;

// Opaque generating function.
typedef struct PsicGenerator PsicGenerator;

// Opaque fitted model: pseudo-observations, coefficients and diagnostics.
typedef struct PsicModel PsicModel;

typedef struct PsicAssociation {
  double rho_sp;
  double rho_np;
  double tau_sp;
  double tau_np;
  double gof_diff;
} PsicAssociation;

typedef struct PsicRegion {
  size_t cells;
  double area;
  double achieved_mass;
} PsicRegion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *psic_last_error_message(void);

// `psi_k(x) = 1 - (x^k + (1-x)^k)^{1/k}`; pass `INFINITY` for `min(x, 1-x)`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum PsicStatus psic_generator_analytic(double k, struct PsicGenerator **out);

// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum PsicStatus psic_generator_fgm(double theta, struct PsicGenerator **out);

// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum PsicStatus psic_generator_cubic(double theta, struct PsicGenerator **out);

// # Safety
// `g` must be NULL or a handle obtained from this library and not yet freed.
void psic_generator_free(struct PsicGenerator *g);

// # Safety
// `g` must be a live generator handle; `out` must be writable.
enum PsicStatus psic_generator_psi(const struct PsicGenerator *g, double x, double *out);

// # Safety
// `g` must be a live generator handle; `out` must be writable.
enum PsicStatus psic_generator_psi_deriv(const struct PsicGenerator *g, double x, double *out);

// `C(u, v) = uv + psi(u) psi(v)`.
//
// # Safety
// `g` must be a live generator handle; `out` must be writable.
enum PsicStatus psic_copula_cdf(const struct PsicGenerator *g, double u, double v, double *out);

// `dC/du (u, v)`.
//
// # Safety
// `g` must be a live generator handle; `out` must be writable.
enum PsicStatus psic_conditional_cdf(const struct PsicGenerator *g,
                                     double u,
                                     double v,
                                     double *out);

// Spearman's rho of the generator by Simpson's rule on `quad_points` nodes.
//
// # Safety
// `g` must be a live generator handle; `out` must be writable.
enum PsicStatus psic_rho_true(const struct PsicGenerator *g, size_t quad_points, double *out);

// Draws `n` pairs into `u_out[0..n]` and `v_out[0..n]`.
//
// # Safety
// `g` must be a live generator handle; `u_out` and `v_out` must each point
// to `n` writable doubles.
enum PsicStatus psic_sample(const struct PsicGenerator *g,
                            size_t n,
                            uint64_t seed,
                            double *u_out,
                            double *v_out);

// Fits the generating function to `n` observations with basis scales up to
// `s_max`.
//
// # Safety
// `x` and `y` must each point to `n` readable doubles; `out` must be writable.
enum PsicStatus psic_fit(const double *x,
                         const double *y,
                         size_t n,
                         uint32_t s_max,
                         struct PsicModel **out);

// # Safety
// `m` must be NULL or a handle obtained from [`psic_fit`] and not yet freed.
void psic_model_free(struct PsicModel *m);

// Copies up to `capacity` coefficients (basis order) into `buf` and stores
// the total count in `len`. `buf` may be NULL when `capacity` is 0.
//
// # Safety
// `m` must be a live model handle, `buf` must hold `capacity` doubles and
// `len` must be writable.
enum PsicStatus psic_model_coefficients(const struct PsicModel *m,
                                        double *buf,
                                        size_t capacity,
                                        size_t *len);

// Number of coefficients above the selection threshold.
//
// # Safety
// `m` must be a live model handle; `out` must be writable.
enum PsicStatus psic_model_nnz(const struct PsicModel *m, size_t *out);

// # Safety
// `m` must be a live model handle; `out` must be writable.
enum PsicStatus psic_model_association(const struct PsicModel *m, struct PsicAssociation *out);

// New generator handle holding the fitted expansion.
//
// # Safety
// `m` must be a live model handle; `out` must be writable.
enum PsicStatus psic_model_generator(const struct PsicModel *m, struct PsicGenerator **out);

// Region of level `alpha` on an `n_grid x n_grid` grid from the generator's
// cell masses. When `mask_out` is not NULL it receives `n_grid * n_grid`
// bytes, 1 for selected cells, at index `(k-1) * n_grid + (l-1)`.
//
// # Safety
// `g` must be a live generator handle, `mask_out` NULL or valid for
// `n_grid * n_grid` bytes, and `out` writable.
enum PsicStatus psic_generator_region(const struct PsicGenerator *g,
                                      enum PsicSource source,
                                      size_t n_grid,
                                      double alpha,
                                      uint8_t *mask_out,
                                      struct PsicRegion *out);

// Region from the empirical cell frequencies of the model's sample. Same
// mask layout as [`psic_generator_region`].
//
// # Safety
// `m` must be a live model handle, `mask_out` NULL or valid for
// `n_grid * n_grid` bytes, and `out` writable.
enum PsicStatus psic_model_region_np(const struct PsicModel *m,
                                     size_t n_grid,
                                     double alpha,
                                     uint8_t *mask_out,
                                     struct PsicRegion *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSICOPULA_H */
