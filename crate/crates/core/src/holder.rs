//! Holder infinity-Laplacian operators, the `W^{s,inf}` seminorm, the limit
//! eigenvalue `lambda_1(s,inf) = 2/diam^s`, and the viscosity-residual
//! classifier for the three-regime limit system
//!
//! ```text
//!   max{ L u, L^- u + lambda u } = 0   where u > 0,
//!        L u                     = 0   where u = 0,
//!   min{ L u, L^+ u + lambda u } = 0   where u < 0,
//! ```
//!
//! with `L^+ u(x) = sup_y (u(y)-u(x))/d(x,y)^s`, `L^-` the matching inf and
//! `L = L^+ + L^-`. All sups and infs run over the node cloud in the
//! domain's active metric, so every operator here is exact (no quadrature).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Domain, GridFunction};

fn validate_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) || !s.is_finite() {
        return Err(Error::InvalidParameter(format!("s must lie in (0,1), got {s}")));
    }
    Ok(())
}

/// `sup_{j != i} (u_j - u_i) / d_ij^s`. Negative when `u_i` is the strict
/// maximum.
pub fn lplus(dom: &Domain, u: &GridFunction, s: f64, i: usize) -> f64 {
    let row = dom.dist_row(i);
    let ui = u.values[i];
    let mut best = f64::NEG_INFINITY;
    for (j, (&d, &uj)) in row.iter().zip(&u.values).enumerate() {
        if j != i {
            best = best.max((uj - ui) / d.powf(s));
        }
    }
    best
}

/// `inf_{j != i} (u_j - u_i) / d_ij^s`.
pub fn lminus(dom: &Domain, u: &GridFunction, s: f64, i: usize) -> f64 {
    let row = dom.dist_row(i);
    let ui = u.values[i];
    let mut best = f64::INFINITY;
    for (j, (&d, &uj)) in row.iter().zip(&u.values).enumerate() {
        if j != i {
            best = best.min((uj - ui) / d.powf(s));
        }
    }
    best
}

/// `L = L^+ + L^-`.
pub fn linf(dom: &Domain, u: &GridFunction, s: f64, i: usize) -> f64 {
    lplus(dom, u, s, i) + lminus(dom, u, s, i)
}

/// `[u]_{W^{s,inf}} = max_{i<j} |u_i - u_j| / d_ij^s`.
pub fn seminorm_inf(dom: &Domain, u: &GridFunction, s: f64) -> f64 {
    let n = dom.len();
    let mut best = 0.0f64;
    for i in 0..n {
        let row = dom.dist_row(i);
        for j in (i + 1)..n {
            best = best.max((u.values[i] - u.values[j]).abs() / row[j].powf(s));
        }
    }
    best
}

/// Limit eigenvalue `2 / diam^s` in the domain's active metric.
pub fn lambda_inf(dom: &Domain, s: f64) -> f64 {
    2.0 / dom.diameter().powf(s)
}

/// Shift `u` so that `max + min = 0` (the admissible class of the limit
/// variational problem).
pub fn make_admissible(u: &GridFunction) -> GridFunction {
    let max = u.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = u.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let c = 0.5 * (max + min);
    GridFunction::new(u.values.iter().map(|x| x - c).collect())
}

/// Quotient `[u]_{s,inf} / ||u||_inf` and the admissibility flag
/// `|max u + min u| <= 1e-9 ||u||_inf`. For admissible `u` the quotient is
/// bounded below by `2/diam^s`: the max-min node pair alone realizes
/// `|u_max - u_min| / d^s = 2 ||u||_inf / d^s >= 2 ||u||_inf / diam^s`.
pub fn check_variational_inf(dom: &Domain, u: &GridFunction, s: f64) -> Result<(f64, bool)> {
    validate_s(s)?;
    u.validate(dom)?;
    let max = u.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = u.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == min {
        return Err(Error::Degenerate(
            "variational quotient of a constant function".into(),
        ));
    }
    let sup = u.max_abs();
    let admissible = (max + min).abs() <= 1e-9 * sup;
    Ok((seminorm_inf(dom, u, s) / sup, admissible))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SignClass {
    Positive,
    Zero,
    Negative,
}

impl SignClass {
    /// The same lowercase name the JSON serialization uses.
    pub fn as_str(self) -> &'static str {
        match self {
            SignClass::Positive => "positive",
            SignClass::Zero => "zero",
            SignClass::Negative => "negative",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeResidual {
    pub node: usize,
    pub class: SignClass,
    pub residual: f64,
}

/// Outcome of checking `u` against the three-regime system at a given
/// `lambda`. `dead_band` is the half-width used to call a node value zero;
/// `tol` the per-node residual bar entering `fraction_within_tol`.
#[derive(Clone, Debug, Serialize)]
pub struct ViscosityReport {
    pub per_node: Vec<NodeResidual>,
    pub max_residual: f64,
    pub fraction_within_tol: f64,
    pub dead_band: f64,
    pub tol: f64,
}

/// Classify every node by the sign of `u` (dead-band `1e-3 ||u||_inf`) and
/// measure how far the node is from satisfying its regime of the limit
/// system. The tolerance `0.1 lambda ||u||_inf` reflects that discrete sups
/// converge to continuum sups only at rate `O(h^s)`.
pub fn viscosity_residual(
    dom: &Domain,
    u: &GridFunction,
    s: f64,
    lambda: f64,
) -> Result<ViscosityReport> {
    validate_s(s)?;
    u.validate(dom)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let sup = u.max_abs();
    if sup == 0.0 || u.values.iter().all(|&x| x == u.values[0]) {
        return Err(Error::Degenerate(
            "viscosity residual of a constant function".into(),
        ));
    }
    let dead_band = 1e-3 * sup;
    let tol = 0.1 * lambda * sup;

    let per_node: Vec<NodeResidual> = (0..dom.len())
        .into_par_iter()
        .map(|i| {
            let lp = lplus(dom, u, s, i);
            let lm = lminus(dom, u, s, i);
            let l = lp + lm;
            let ui = u.values[i];
            let (class, residual) = if ui > dead_band {
                (SignClass::Positive, (l.max(lm + lambda * ui)).abs())
            } else if ui < -dead_band {
                (SignClass::Negative, (l.min(lp + lambda * ui)).abs())
            } else {
                (SignClass::Zero, l.abs())
            };
            NodeResidual {
                node: i,
                class,
                residual,
            }
        })
        .collect();

    let max_residual = per_node.iter().fold(0.0f64, |m, r| m.max(r.residual));
    let within = per_node.iter().filter(|r| r.residual <= tol).count();
    Ok(ViscosityReport {
        fraction_within_tol: within as f64 / per_node.len() as f64,
        per_node,
        max_residual,
        dead_band,
        tol,
    })
}
