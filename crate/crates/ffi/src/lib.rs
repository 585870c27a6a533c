//! C ABI for the eigenvalue library: opaque handles, integer status codes,
//! and a per-thread error message. Every entry point checks its pointers,
//! catches panics, and never unwinds across the boundary.
//!
//! Ownership rules: `fr_domain_*` and `fr_solve` write a heap-allocated
//! handle through their `out` parameter on `FR_STATUS_OK`; the caller
//! releases it with the matching `fr_*_free`. Accessors never allocate.

#![deny(unsafe_op_in_unsafe_fn)]

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use fraceig::eigensolve::{self, FracParams};
use fraceig::gagliardo;
use fraceig::geometry::{Domain, GridFunction};
use fraceig::holder;
use fraceig::Error;

/// Outcome of an API call. Anything other than `OK` leaves a description
/// readable through `fr_last_error` on the same thread.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FrStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A parameter was outside its admissible range.
    InvalidArgument = 2,
    /// The requested domain shape or resolution is unusable.
    InvalidDomain = 3,
    /// The supplied grid function is unusable (length, finiteness, zero).
    Degenerate = 4,
    /// The geodesic neighbor graph does not connect the domain.
    Disconnected = 5,
    /// The iterative solver ran out of iterations.
    NoConvergence = 6,
    Io = 7,
    /// An internal invariant failed; the library state is still valid.
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|c| {
        let mut slot = c.borrow_mut();
        slot.clear();
        slot.push_str(msg);
    });
}

fn fail(e: &Error) -> FrStatus {
    set_error(&e.to_string());
    match e {
        Error::InvalidDomain(_) => FrStatus::InvalidDomain,
        Error::InvalidParameter(_) | Error::Config(_) => FrStatus::InvalidArgument,
        Error::Degenerate(_) => FrStatus::Degenerate,
        Error::Disconnected { .. } => FrStatus::Disconnected,
        Error::NoConvergence { .. } => FrStatus::NoConvergence,
        Error::Io(_) => FrStatus::Io,
    }
}

fn null_arg(name: &str) -> FrStatus {
    set_error(&format!("argument {name} must not be null"));
    FrStatus::NullArgument
}

fn guard(f: impl FnOnce() -> FrStatus) -> FrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"));
            FrStatus::Panic
        }
    }
}

/// Discretized domain handle.
pub struct FrDomain(Domain);

/// Solved eigenpair handle.
pub struct FrEigenPair {
    lambda: f64,
    iterations: usize,
    converged: bool,
    constraint_residual: f64,
    values: Vec<f64>,
}

fn deliver_domain(out: *mut *mut FrDomain, built: Result<Domain, Error>) -> FrStatus {
    match built {
        Ok(dom) => {
            unsafe { *out = Box::into_raw(Box::new(FrDomain(dom))) };
            FrStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Uniform grid on the interval (a, b) with n cells.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn fr_domain_interval(
    a: f64,
    b: f64,
    n: usize,
    out: *mut *mut FrDomain,
) -> FrStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        deliver_domain(out, Domain::interval(a, b, n))
    })
}

/// Uniform nx-by-ny grid on the rectangle (ax, bx) x (ay, by).
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn fr_domain_rectangle(
    ax: f64,
    bx: f64,
    ay: f64,
    by: f64,
    nx: usize,
    ny: usize,
    out: *mut *mut FrDomain,
) -> FrStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        deliver_domain(out, Domain::rectangle(ax, bx, ay, by, nx, ny))
    })
}

/// L-shaped domain: the square of the given side with its upper-right
/// quadrant removed; n_per_side cells along each full side (even, >= 4).
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn fr_domain_lshape(
    side: f64,
    n_per_side: usize,
    out: *mut *mut FrDomain,
) -> FrStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        deliver_domain(out, Domain::lshape(side, n_per_side))
    })
}

/// New handle for the same nodes with pairwise distances replaced by
/// shortest paths over the k-nearest-neighbor graph.
///
/// # Safety
/// `dom` must be null or a live handle from `fr_domain_*`; `out` must be
/// valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn fr_domain_with_geodesic(
    dom: *const FrDomain,
    k: usize,
    out: *mut *mut FrDomain,
) -> FrStatus {
    guard(|| {
        if dom.is_null() {
            return null_arg("dom");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let base = unsafe { &(*dom).0 };
        deliver_domain(out, base.with_geodesic_metric(k))
    })
}

/// Releases a domain handle; null is ignored.
///
/// # Safety
/// `dom` must be null or an owned handle not freed before; the handle is
/// invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn fr_domain_free(dom: *mut FrDomain) {
    if !dom.is_null() {
        drop(unsafe { Box::from_raw(dom) });
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `dom` must be null or a live handle from `fr_domain_*`.
#[no_mangle]
pub unsafe extern "C" fn fr_domain_len(dom: *const FrDomain) -> usize {
    if dom.is_null() {
        return 0;
    }
    unsafe { &(*dom).0 }.len()
}

/// Ambient dimension (1 or 2), or 0 for a null handle.
///
/// # Safety
/// `dom` must be null or a live handle from `fr_domain_*`.
#[no_mangle]
pub unsafe extern "C" fn fr_domain_dim(dom: *const FrDomain) -> usize {
    if dom.is_null() {
        return 0;
    }
    unsafe { &(*dom).0 }.dim()
}

/// Total measure (length or area), or NaN for a null handle.
///
/// # Safety
/// `dom` must be null or a live handle from `fr_domain_*`.
#[no_mangle]
pub unsafe extern "C" fn fr_domain_measure(dom: *const FrDomain) -> f64 {
    if dom.is_null() {
        return f64::NAN;
    }
    unsafe { &(*dom).0 }.measure()
}

/// Diameter under the handle's metric, or NaN for a null handle.
///
/// # Safety
/// `dom` must be null or a live handle from `fr_domain_*`.
#[no_mangle]
pub unsafe extern "C" fn fr_domain_diameter(dom: *const FrDomain) -> f64 {
    if dom.is_null() {
        return f64::NAN;
    }
    unsafe { &(*dom).0 }.diameter()
}

/// Coordinates of node i; y receives 0 for 1D domains.
///
/// # Safety
/// `dom` must be null or a live handle from `fr_domain_*`; `x` and `y` must
/// be valid for writing one double each.
#[no_mangle]
pub unsafe extern "C" fn fr_domain_node(
    dom: *const FrDomain,
    i: usize,
    x: *mut f64,
    y: *mut f64,
) -> FrStatus {
    guard(|| {
        if dom.is_null() {
            return null_arg("dom");
        }
        if x.is_null() {
            return null_arg("x");
        }
        if y.is_null() {
            return null_arg("y");
        }
        let d = unsafe { &(*dom).0 };
        if i >= d.len() {
            set_error(&format!("node index {i} out of range for {} nodes", d.len()));
            return FrStatus::InvalidArgument;
        }
        unsafe {
            *x = d.nodes()[i][0];
            *y = d.nodes()[i][1];
        }
        FrStatus::Ok
    })
}

/// First non-zero Neumann eigenpair of the regional fractional p-Laplacian.
///
/// Pass tol <= 0 and max_iter == 0 for the library defaults. p == 2 uses
/// the dense symmetric solver; p > 16 runs continuation along doubling p
/// values before the final solve, matching the CLI.
///
/// # Safety
/// `dom` must be null or a live handle from `fr_domain_*`; `out` must be
/// valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn fr_solve(
    dom: *const FrDomain,
    s: f64,
    p: f64,
    tol: f64,
    max_iter: usize,
    out: *mut *mut FrEigenPair,
) -> FrStatus {
    guard(|| {
        if dom.is_null() {
            return null_arg("dom");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let d = unsafe { &(*dom).0 };
        let mut params = match FracParams::new(s, p) {
            Ok(ok) => ok,
            Err(e) => return fail(&e),
        };
        if tol > 0.0 {
            params.tol = tol;
        }
        if max_iter > 0 {
            params.max_iter = max_iter;
        }

        let solved = if p == 2.0 {
            eigensolve::solve_p2(d, s)
        } else if p > 16.0 {
            let mut seed: Option<GridFunction> = None;
            let mut q = 4.0;
            while q < p {
                let stage = FracParams { p: q, ..params };
                if let Ok(pair) = eigensolve::solve_general(d, &stage, seed.as_ref()) {
                    seed = Some(pair.u);
                }
                q *= 2.0;
            }
            eigensolve::solve_general(d, &params, seed.as_ref())
        } else {
            eigensolve::solve_general(d, &params, None)
        };
        match solved {
            Ok(pair) => {
                let boxed = Box::new(FrEigenPair {
                    lambda: pair.lambda,
                    iterations: pair.iterations,
                    converged: pair.converged,
                    constraint_residual: pair.constraint_residual,
                    values: pair.u.as_slice().to_vec(),
                });
                unsafe { *out = Box::into_raw(boxed) };
                FrStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases an eigenpair handle; null is ignored.
///
/// # Safety
/// `pair` must be null or an owned handle not freed before; the handle is
/// invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn fr_eigenpair_free(pair: *mut FrEigenPair) {
    if !pair.is_null() {
        drop(unsafe { Box::from_raw(pair) });
    }
}

/// Eigenvalue, or NaN for a null handle.
///
/// # Safety
/// `pair` must be null or a live handle from `fr_solve`.
#[no_mangle]
pub unsafe extern "C" fn fr_eigenpair_lambda(pair: *const FrEigenPair) -> f64 {
    if pair.is_null() {
        return f64::NAN;
    }
    unsafe { &*pair }.lambda
}

/// Iterations spent by the solver (0 for the dense path).
///
/// # Safety
/// `pair` must be null or a live handle from `fr_solve`.
#[no_mangle]
pub unsafe extern "C" fn fr_eigenpair_iterations(pair: *const FrEigenPair) -> usize {
    if pair.is_null() {
        return 0;
    }
    unsafe { &*pair }.iterations
}

/// Whether the solve met its tolerance.
///
/// # Safety
/// `pair` must be null or a live handle from `fr_solve`.
#[no_mangle]
pub unsafe extern "C" fn fr_eigenpair_converged(pair: *const FrEigenPair) -> bool {
    if pair.is_null() {
        return false;
    }
    unsafe { &*pair }.converged
}

/// Residual of the zero-p-mean constraint at the solution.
///
/// # Safety
/// `pair` must be null or a live handle from `fr_solve`.
#[no_mangle]
pub unsafe extern "C" fn fr_eigenpair_constraint_residual(pair: *const FrEigenPair) -> f64 {
    if pair.is_null() {
        return f64::NAN;
    }
    unsafe { &*pair }.constraint_residual
}

/// Number of eigenfunction values (the domain's node count).
///
/// # Safety
/// `pair` must be null or a live handle from `fr_solve`.
#[no_mangle]
pub unsafe extern "C" fn fr_eigenpair_len(pair: *const FrEigenPair) -> usize {
    if pair.is_null() {
        return 0;
    }
    unsafe { &*pair }.values.len()
}

/// Copies the eigenfunction into buf; len must equal fr_eigenpair_len.
///
/// # Safety
/// `pair` must be null or a live handle from `fr_solve`; `buf` must be
/// valid for writing `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fr_eigenpair_values(
    pair: *const FrEigenPair,
    buf: *mut f64,
    len: usize,
) -> FrStatus {
    guard(|| {
        if pair.is_null() {
            return null_arg("pair");
        }
        if buf.is_null() {
            return null_arg("buf");
        }
        let values = &unsafe { &*pair }.values;
        if len != values.len() {
            set_error(&format!(
                "buffer length {len} does not match eigenfunction length {}",
                values.len()
            ));
            return FrStatus::InvalidArgument;
        }
        unsafe { std::ptr::copy_nonoverlapping(values.as_ptr(), buf, len) };
        FrStatus::Ok
    })
}

fn grid_function(
    dom: &Domain,
    values: *const f64,
    len: usize,
) -> Result<GridFunction, FrStatus> {
    if len != dom.len() {
        set_error(&format!(
            "function length {len} does not match domain size {}",
            dom.len()
        ));
        return Err(FrStatus::InvalidArgument);
    }
    let slice = unsafe { std::slice::from_raw_parts(values, len) };
    Ok(GridFunction::new(slice.to_vec()))
}

/// Gagliardo seminorm [u]_{s,p} of the sampled function.
///
/// # Safety
/// `dom` must be null or a live handle from `fr_domain_*`; `values` must be
/// valid for reading `len` doubles; `out` must be valid for writing one.
#[no_mangle]
pub unsafe extern "C" fn fr_seminorm(
    dom: *const FrDomain,
    values: *const f64,
    len: usize,
    s: f64,
    p: f64,
    out: *mut f64,
) -> FrStatus {
    guard(|| {
        if dom.is_null() {
            return null_arg("dom");
        }
        if values.is_null() {
            return null_arg("values");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let d = unsafe { &(*dom).0 };
        let u = match grid_function(d, values, len) {
            Ok(u) => u,
            Err(status) => return status,
        };
        match gagliardo::seminorm_p(d, &u, s, p) {
            Ok(v) => {
                unsafe { *out = v };
                FrStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Variational eigenvalue of the Holder limit problem, 2/diam^s.
///
/// # Safety
/// `dom` must be null or a live handle from `fr_domain_*`; `out` must be
/// valid for writing one double.
#[no_mangle]
pub unsafe extern "C" fn fr_lambda_inf(dom: *const FrDomain, s: f64, out: *mut f64) -> FrStatus {
    guard(|| {
        if dom.is_null() {
            return null_arg("dom");
        }
        if out.is_null() {
            return null_arg("out");
        }
        if !(s > 0.0 && s < 1.0) {
            set_error(&format!("s must lie in (0,1), got {s}"));
            return FrStatus::InvalidArgument;
        }
        unsafe { *out = holder::lambda_inf(&(*dom).0, s) };
        FrStatus::Ok
    })
}

/// Residuals of the limit viscosity system for the sampled function paired
/// with the given eigenvalue: largest residual and fraction of nodes within
/// the tolerance 0.1 * lambda * sup|u|.
///
/// # Safety
/// `dom` must be null or a live handle from `fr_domain_*`; `values` must be
/// valid for reading `len` doubles; the two result pointers must be valid
/// for writing one double each.
#[no_mangle]
pub unsafe extern "C" fn fr_viscosity(
    dom: *const FrDomain,
    values: *const f64,
    len: usize,
    s: f64,
    lambda: f64,
    max_residual: *mut f64,
    fraction_within_tol: *mut f64,
) -> FrStatus {
    guard(|| {
        if dom.is_null() {
            return null_arg("dom");
        }
        if values.is_null() {
            return null_arg("values");
        }
        if max_residual.is_null() {
            return null_arg("max_residual");
        }
        if fraction_within_tol.is_null() {
            return null_arg("fraction_within_tol");
        }
        let d = unsafe { &(*dom).0 };
        let u = match grid_function(d, values, len) {
            Ok(u) => u,
            Err(status) => return status,
        };
        match holder::viscosity_residual(d, &u, s, lambda) {
            Ok(report) => {
                unsafe {
                    *max_residual = report.max_residual;
                    *fraction_within_tol = report.fraction_within_tol;
                }
                FrStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Copies the current thread's last error message (NUL-terminated,
/// truncated to cap bytes) and returns the full message length in bytes.
/// Call with buf == NULL or cap == 0 to query the length alone.
///
/// # Safety
/// `buf`, when non-null, must be valid for writing `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn fr_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|c| {
        let msg = c.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
