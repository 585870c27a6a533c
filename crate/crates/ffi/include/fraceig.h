#ifndef FRACEIG_H
#define FRACEIG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of an API call. Anything other than `OK` leaves a description
// readable through `fr_last_error` on the same thread.
typedef enum {
  FR_STATUS_OK = 0,
  // A required pointer argument was null.
  FR_STATUS_NULL_ARGUMENT = 1,
  // A parameter was outside its admissible range.
  FR_STATUS_INVALID_ARGUMENT = 2,
  // The requested domain shape or resolution is unusable.
  FR_STATUS_INVALID_DOMAIN = 3,
  // The supplied grid function is unusable (length, finiteness, zero).
  FR_STATUS_DEGENERATE = 4,
  // The geodesic neighbor graph does not connect the domain.
  FR_STATUS_DISCONNECTED = 5,
  // The iterative solver ran out of iterations.
  FR_STATUS_NO_CONVERGENCE = 6,
  FR_STATUS_IO = 7,
  // An internal invariant failed; the library state is still valid.
  FR_STATUS_PANIC = 8,
} FrStatus;

// Discretized domain handle.
typedef struct FrDomain FrDomain;

// Solved eigenpair handle.
typedef struct FrEigenPair FrEigenPair;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Uniform grid on the interval (a, b) with n cells.
//
// # Safety
// `out` must be valid for writing one pointer.
FrStatus fr_domain_interval(double a, double b, size_t n, FrDomain **out);

// Uniform nx-by-ny grid on the rectangle (ax, bx) x (ay, by).
//
// # Safety
// `out` must be valid for writing one pointer.
FrStatus fr_domain_rectangle(double ax,
                             double bx,
                             double ay,
                             double by,
                             size_t nx,
                             size_t ny,
                             FrDomain **out);

// L-shaped domain: the square of the given side with its upper-right
// quadrant removed; n_per_side cells along each full side (even, >= 4).
//
// # Safety
// `out` must be valid for writing one pointer.
FrStatus fr_domain_lshape(double side, size_t n_per_side, FrDomain **out);

// New handle for the same nodes with pairwise distances replaced by
// shortest paths over the k-nearest-neighbor graph.
//
// # Safety
// `dom` must be null or a live handle from `fr_domain_*`; `out` must be
// valid for writing one pointer.
FrStatus fr_domain_with_geodesic(const FrDomain *dom, size_t k, FrDomain **out);

// Releases a domain handle; null is ignored.
//
// # Safety
// `dom` must be null or an owned handle not freed before; the handle is
// invalid afterwards.
void fr_domain_free(FrDomain *dom);

// Number of nodes, or 0 for a null handle.
//
// # Safety
// `dom` must be null or a live handle from `fr_domain_*`.
size_t fr_domain_len(const FrDomain *dom);

// Ambient dimension (1 or 2), or 0 for a null handle.
//
// # Safety
// `dom` must be null or a live handle from `fr_domain_*`.
size_t fr_domain_dim(const FrDomain *dom);

// Total measure (length or area), or NaN for a null handle.
//
// # Safety
// `dom` must be null or a live handle from `fr_domain_*`.
double fr_domain_measure(const FrDomain *dom);

// Diameter under the handle's metric, or NaN for a null handle.
//
// # Safety
// `dom` must be null or a live handle from `fr_domain_*`.
double fr_domain_diameter(const FrDomain *dom);

// Coordinates of node i; y receives 0 for 1D domains.
//
// # Safety
// `dom` must be null or a live handle from `fr_domain_*`; `x` and `y` must
// be valid for writing one double each.
FrStatus fr_domain_node(const FrDomain *dom, size_t i, double *x, double *y);

// First non-zero Neumann eigenpair of the regional fractional p-Laplacian.
//
// Pass tol <= 0 and max_iter == 0 for the library defaults. p == 2 uses
// the dense symmetric solver; p > 16 runs continuation along doubling p
// values before the final solve, matching the CLI.
//
// # Safety
// `dom` must be null or a live handle from `fr_domain_*`; `out` must be
// valid for writing one pointer.
FrStatus fr_solve(const FrDomain *dom,
                  double s,
                  double p,
                  double tol,
                  size_t max_iter,
                  FrEigenPair **out);

// Releases an eigenpair handle; null is ignored.
//
// # Safety
// `pair` must be null or an owned handle not freed before; the handle is
// invalid afterwards.
void fr_eigenpair_free(FrEigenPair *pair);

// Eigenvalue, or NaN for a null handle.
//
// # Safety
// `pair` must be null or a live handle from `fr_solve`.
double fr_eigenpair_lambda(const FrEigenPair *pair);

// Iterations spent by the solver (0 for the dense path).
//
// # Safety
// `pair` must be null or a live handle from `fr_solve`.
size_t fr_eigenpair_iterations(const FrEigenPair *pair);

// Whether the solve met its tolerance.
//
// # Safety
// `pair` must be null or a live handle from `fr_solve`.
bool fr_eigenpair_converged(const FrEigenPair *pair);

// Residual of the zero-p-mean constraint at the solution.
//
// # Safety
// `pair` must be null or a live handle from `fr_solve`.
double fr_eigenpair_constraint_residual(const FrEigenPair *pair);

// Number of eigenfunction values (the domain's node count).
//
// # Safety
// `pair` must be null or a live handle from `fr_solve`.
size_t fr_eigenpair_len(const FrEigenPair *pair);

// Copies the eigenfunction into buf; len must equal fr_eigenpair_len.
//
// # Safety
// `pair` must be null or a live handle from `fr_solve`; `buf` must be
// valid for writing `len` doubles.
FrStatus fr_eigenpair_values(const FrEigenPair *pair, double *buf, size_t len);

// Gagliardo seminorm [u]_{s,p} of the sampled function.
//
// # Safety
// `dom` must be null or a live handle from `fr_domain_*`; `values` must be
// valid for reading `len` doubles; `out` must be valid for writing one.
FrStatus fr_seminorm(const FrDomain *dom,
                     const double *values,
                     size_t len,
                     double s,
                     double p,
                     double *out);

// Variational eigenvalue of the Holder limit problem, 2/diam^s.
//
// # Safety
// `dom` must be null or a live handle from `fr_domain_*`; `out` must be
// valid for writing one double.
FrStatus fr_lambda_inf(const FrDomain *dom, double s, double *out);

// Residuals of the limit viscosity system for the sampled function paired
// with the given eigenvalue: largest residual and fraction of nodes within
// the tolerance 0.1 * lambda * sup|u|.
//
// # Safety
// `dom` must be null or a live handle from `fr_domain_*`; `values` must be
// valid for reading `len` doubles; the two result pointers must be valid
// for writing one double each.
FrStatus fr_viscosity(const FrDomain *dom,
                      const double *values,
                      size_t len,
                      double s,
                      double lambda,
                      double *max_residual,
                      double *fraction_within_tol);

// Copies the current thread's last error message (NUL-terminated,
// truncated to cap bytes) and returns the full message length in bytes.
// Call with buf == NULL or cap == 0 to query the length alone.
//
// # Safety
// `buf`, when non-null, must be valid for writing `cap` bytes.
size_t fr_last_error(char *buf, size_t cap);

// Library version as a static NUL-terminated string.
const char *fr_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACEIG_H */
