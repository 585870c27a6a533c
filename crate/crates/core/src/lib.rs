//! Neumann eigenvalues of the regional fractional p-Laplacian.
//!
//! The library discretizes bounded domains (intervals, rectangles, L-shapes)
//! with a cell-centered quadrature grid and computes the first non-zero
//! Neumann eigenvalue
//!
//! ```text
//!   lambda_1(s,p) = inf { [v]_{W^{s,p}}^p / ||v||_{L^p}^p :
//!                         v != 0,  integral |v|^{p-2} v = 0 }
//! ```
//!
//! together with the two asymptotic regimes that make the quantity
//! interesting:
//!
//! * `s -> 1^-`: after multiplication by `K(n,p) * (1-s)` the eigenvalue
//!   converges to the local Neumann p-Laplacian eigenvalue (for `p = 2` on an
//!   interval of length 1 this is `pi^2`),
//! * `p -> infinity`: `lambda_1(s,p)^{1/p}` converges to `2 / diam(Omega)^s`,
//!   where the diameter may be Euclidean or geodesic.
//!
//! The `holder` module provides the discrete Holder-infinity operators and a
//! viscosity-residual check for the limiting three-regime equation, and
//! `asymptotics` packages the `s`- and `p`-sweeps with extrapolation.
//!
//! All heavy kernels are dense `O(N^2)` evaluations intended for desk-scale
//! grids (`N <= 2048` in 1D, `N <= 48^2` in 2D). Summation orders are fixed
//! and compensated so that repeated runs, serial or parallel, are
//! bit-identical.

// Validation uses `!(x > 0.0)` so that NaN fails the test; the kernels use
// indexed loops over triangular and parallel-array layouts on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod config;
pub mod eigensolve;
pub mod error;
pub mod gagliardo;
pub mod geometry;
pub mod holder;
pub mod output;

pub use error::{Error, Result};
pub use geometry::{Domain, GridFunction, MetricKind};
pub use eigensolve::{EigenPair, FracParams};
