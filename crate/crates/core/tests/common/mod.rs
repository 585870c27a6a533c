//! Direct double-loop reimplementations of the kernels, kept deliberately
//! naive (no blocking, no compensation, no caching), frozen as the reference
//! the optimized paths must reproduce on small grids.

#![allow(dead_code)]

use std::collections::HashMap;

use fraceig::geometry::Domain;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Everything the naive quadrature needs, reconstructed from node positions
/// alone so that no internal state of the library is reused.
pub struct CellGrid {
    dim: usize,
    hx: f64,
    hy: f64,
    coords: Vec<(i64, i64)>,
    index: HashMap<(i64, i64), usize>,
}

impl CellGrid {
    pub fn reconstruct(dom: &Domain, hx: f64, hy: f64) -> CellGrid {
        let origin_x = dom.nodes().iter().map(|q| q[0]).fold(f64::INFINITY, f64::min) - 0.5 * hx;
        let origin_y = if dom.dim() == 2 {
            dom.nodes().iter().map(|q| q[1]).fold(f64::INFINITY, f64::min) - 0.5 * hy
        } else {
            0.0
        };
        let coords: Vec<(i64, i64)> = dom
            .nodes()
            .iter()
            .map(|q| {
                let ix = ((q[0] - origin_x) / hx - 0.5).round() as i64;
                let iy = if dom.dim() == 2 {
                    ((q[1] - origin_y) / hy - 0.5).round() as i64
                } else {
                    0
                };
                (ix, iy)
            })
            .collect();
        let index = coords.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        CellGrid {
            dim: dom.dim(),
            hx,
            hy,
            coords,
            index,
        }
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        let (ax, ay) = self.coords[i];
        let (bx, by) = self.coords[j];
        (ax - bx).abs() <= 1 && (ay - by).abs() <= 1
    }

    /// Finite-difference gradient: central where both axis neighbors exist,
    /// one-sided otherwise.
    pub fn gradient(&self, u: &[f64], i: usize) -> (f64, f64) {
        let (ix, iy) = self.coords[i];
        let axis = |minus: Option<&usize>, plus: Option<&usize>, h: f64| match (minus, plus) {
            (Some(&l), Some(&r)) => (u[r] - u[l]) / (2.0 * h),
            (None, Some(&r)) => (u[r] - u[i]) / h,
            (Some(&l), None) => (u[i] - u[l]) / h,
            (None, None) => 0.0,
        };
        let gx = axis(
            self.index.get(&(ix - 1, iy)),
            self.index.get(&(ix + 1, iy)),
            self.hx,
        );
        let gy = if self.dim == 2 {
            axis(
                self.index.get(&(ix, iy - 1)),
                self.index.get(&(ix, iy + 1)),
                self.hy,
            )
        } else {
            0.0
        };
        (gx, gy)
    }
}

fn psi(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.signum() * t.abs().powf(p - 1.0)
    }
}

/// Midpoints of the sub-cells along one axis, as offsets from the cell
/// center.
fn sub_offsets(h: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|k| -0.5 * h + (k as f64 + 0.5) * h / m as f64)
        .collect()
}

/// The exact same-cell integral of `|g . (x - y)|^p / |x - y|^{n + sp}`
/// over one cell paired with itself, under the cell's linear model.
///
/// In 1D, substituting r = x - y gives `2 |g|^p int_0^h (h - r) r^{a-1} dr
/// = |g|^p 2 h^{a+1} / (a (a+1))` with `a = p(1-s)`. In 2D, polar
/// coordinates around y make the radial integral exact; the remaining
/// angular factor `rho(t) = int_0^{R(t)} overlap(r,t) r^{a-1} dr` with the
/// cell self-overlap `(hx - r|cos t|)(hy - r|sin t|)` expands to the three
/// power terms below, and a midpoint rule in t finishes the job.
fn naive_same_cell(gx: f64, gy: f64, hx: f64, hy: f64, alpha: f64, p: f64, dim: usize) -> f64 {
    if dim == 1 {
        return gx.abs().powf(p) * 2.0 * hx.powf(alpha + 1.0) / (alpha * (alpha + 1.0));
    }
    let m = 512;
    let dt = 2.0 * std::f64::consts::PI / m as f64;
    let mut total = 0.0;
    for k in 0..m {
        let t = (k as f64 + 0.5) * dt;
        let (st, ct) = t.sin_cos();
        let (ca, sa) = (ct.abs(), st.abs());
        let r = (hx / ca).min(hy / sa);
        let rho = hx * hy * r.powf(alpha) / alpha
            - (hx * sa + hy * ca) * r.powf(alpha + 1.0) / (alpha + 1.0)
            + ca * sa * r.powf(alpha + 2.0) / (alpha + 2.0);
        total += rho * dt * (ct * gx + st * gy).abs().powf(p);
    }
    total
}

/// `[u]^p` by ordered-pair double loop: midpoint kernel at non-adjacent
/// cells, sub-divided midpoint with per-cell linear models at adjacent
/// cells, exact radial integration on the diagonal.
pub fn naive_seminorm_pow(dom: &Domain, grid: &CellGrid, u: &[f64], s: f64, p: f64) -> f64 {
    let n = dom.len();
    let q = dom.dim() as f64 + s * p;
    let alpha = p * (1.0 - s);
    let m = if dom.dim() == 1 { 8 } else { 4 };
    let offs_x = sub_offsets(grid.hx, m);
    let offs_y = if dom.dim() == 1 {
        vec![0.0]
    } else {
        sub_offsets(grid.hy, m)
    };
    let subvol = dom.weights()[0] / (offs_x.len() * offs_y.len()) as f64;
    let grads: Vec<(f64, f64)> = (0..n).map(|i| grid.gradient(u, i)).collect();

    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if !grid.adjacent(i, j) {
                let d = dom.dist(i, j);
                total += dom.weights()[i] * dom.weights()[j] * (u[i] - u[j]).abs().powf(p)
                    / d.powf(q);
                continue;
            }
            // Ordered adjacent pair: sub-cell midpoints in absolute
            // coordinates with each cell's linear model.
            let (gi, gj) = (grads[i], grads[j]);
            for &dax in &offs_x {
                for &day in &offs_y {
                    for &dbx in &offs_x {
                        for &dby in &offs_y {
                            let vx = (dom.nodes()[j][0] + dbx) - (dom.nodes()[i][0] + dax);
                            let vy = (dom.nodes()[j][1] + dby) - (dom.nodes()[i][1] + day);
                            let d = vx.hypot(vy);
                            if d == 0.0 {
                                continue;
                            }
                            let ua = u[i] + gi.0 * dax + gi.1 * day;
                            let ub = u[j] + gj.0 * dbx + gj.1 * dby;
                            total += subvol * subvol * (ub - ua).abs().powf(p) / d.powf(q);
                        }
                    }
                }
            }
        }
        let (gx, gy) = grads[i];
        total += naive_same_cell(gx, gy, grid.hx, grid.hy, alpha, p, dom.dim());
    }
    total
}

/// `E(u, phi)` by the same ordered-pair loops.
pub fn naive_energy_form(
    dom: &Domain,
    grid: &CellGrid,
    u: &[f64],
    phi: &[f64],
    s: f64,
    p: f64,
) -> f64 {
    let n = dom.len();
    let q = dom.dim() as f64 + s * p;
    let alpha = p * (1.0 - s);
    let m = if dom.dim() == 1 { 8 } else { 4 };
    let offs_x = sub_offsets(grid.hx, m);
    let offs_y = if dom.dim() == 1 {
        vec![0.0]
    } else {
        sub_offsets(grid.hy, m)
    };
    let subvol = dom.weights()[0] / (offs_x.len() * offs_y.len()) as f64;
    let gu: Vec<(f64, f64)> = (0..n).map(|i| grid.gradient(u, i)).collect();
    let gf: Vec<(f64, f64)> = (0..n).map(|i| grid.gradient(phi, i)).collect();

    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if !grid.adjacent(i, j) {
                let d = dom.dist(i, j);
                total += dom.weights()[i] * dom.weights()[j] * psi(u[i] - u[j], p)
                    * (phi[i] - phi[j])
                    / d.powf(q);
                continue;
            }
            for &dax in &offs_x {
                for &day in &offs_y {
                    for &dbx in &offs_x {
                        for &dby in &offs_y {
                            let vx = (dom.nodes()[j][0] + dbx) - (dom.nodes()[i][0] + dax);
                            let vy = (dom.nodes()[j][1] + dby) - (dom.nodes()[i][1] + day);
                            let d = vx.hypot(vy);
                            if d == 0.0 {
                                continue;
                            }
                            let tu = (u[j] + gu[j].0 * dbx + gu[j].1 * dby)
                                - (u[i] + gu[i].0 * dax + gu[i].1 * day);
                            let tf = (phi[j] + gf[j].0 * dbx + gf[j].1 * dby)
                                - (phi[i] + gf[i].0 * dax + gf[i].1 * day);
                            total += subvol * subvol * psi(tu, p) * tf / d.powf(q);
                        }
                    }
                }
            }
        }
        // Same-cell contribution of the form: differentiate the linear
        // model along each angular direction.
        if dom.dim() == 1 {
            let c = 2.0 * grid.hx.powf(alpha + 1.0) / (alpha * (alpha + 1.0));
            total += c * psi(gu[i].0, p) * gf[i].0;
        } else {
            let mm = 512;
            let dt = 2.0 * std::f64::consts::PI / mm as f64;
            for k in 0..mm {
                let t = (k as f64 + 0.5) * dt;
                let (st, ct) = t.sin_cos();
                let (ca, sa) = (ct.abs(), st.abs());
                let r = (grid.hx / ca).min(grid.hy / sa);
                let rho = grid.hx * grid.hy * r.powf(alpha) / alpha
                    - (grid.hx * sa + grid.hy * ca) * r.powf(alpha + 1.0) / (alpha + 1.0)
                    + ca * sa * r.powf(alpha + 2.0) / (alpha + 2.0);
                total += rho
                    * dt
                    * psi(ct * gu[i].0 + st * gu[i].1, p)
                    * (ct * gf[i].0 + st * gf[i].1);
            }
        }
    }
    total
}

pub fn random_function(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub struct Case {
    pub dom: Domain,
    pub grid: CellGrid,
}

pub fn cases() -> Vec<Case> {
    let mut out = Vec::new();
    let dom = Domain::interval(0.0, 1.0, 17).unwrap();
    let grid = CellGrid::reconstruct(&dom, 1.0 / 17.0, 0.0);
    out.push(Case { dom, grid });
    let dom = Domain::interval(-1.0, 2.0, 32).unwrap();
    let grid = CellGrid::reconstruct(&dom, 3.0 / 32.0, 0.0);
    out.push(Case { dom, grid });
    let dom = Domain::rectangle(0.0, 1.0, 0.0, 2.0, 4, 6).unwrap();
    let grid = CellGrid::reconstruct(&dom, 0.25, 2.0 / 6.0);
    out.push(Case { dom, grid });
    let dom = Domain::lshape(2.0, 4).unwrap();
    let grid = CellGrid::reconstruct(&dom, 0.5, 0.5);
    out.push(Case { dom, grid });
    out
}
