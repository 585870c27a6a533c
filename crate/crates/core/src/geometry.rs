//! Discretized bounded domains: quadrature point clouds with weights and a
//! metric.
//!
//! All built-in shapes are cell-centered (midpoint) partitions of axis-aligned
//! regions, so nodes are pairwise distinct and the singular kernel stays
//! finite off-diagonal. The lattice structure of built domains is kept around
//! for the near-diagonal quadrature corrections in `gagliardo`.

use std::collections::{BinaryHeap, HashMap};

use ordered_float::OrderedFloat;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Euclidean,
    Geodesic,
}

/// Integer lattice structure of a built (grid-based) domain. Point-cloud
/// domains created through [`Domain::from_points`] have none.
#[derive(Debug, Clone)]
pub(crate) struct Lattice {
    /// Integer cell coordinates of each node, (ix, iy); iy = 0 in 1D.
    pub coords: Vec<[i64; 2]>,
    /// Inverse map from cell coordinates to node index.
    pub index: HashMap<(i64, i64), usize>,
}

impl Lattice {
    pub fn node_at(&self, ix: i64, iy: i64) -> Option<usize> {
        self.index.get(&(ix, iy)).copied()
    }
}

/// Real values attached to the nodes of a [`Domain`]; the discrete stand-in
/// for a function on Omega.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridFunction {
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        GridFunction { values }
    }

    /// Samples `f` at the domain nodes.
    pub fn from_fn(domain: &Domain, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        GridFunction {
            values: domain.nodes.iter().map(|q| f(q[0], q[1])).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Rejects functions that cannot enter a quotient: wrong length or
    /// non-finite entries.
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if self.values.len() != domain.len() {
            return Err(Error::Degenerate(format!(
                "grid function has {} values, domain has {} nodes",
                self.values.len(),
                domain.len()
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!("non-finite value at node {i}")));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A discretized bounded domain: nodes, quadrature weights, measure, diameter
/// and a dense pairwise metric.
#[derive(Debug, Clone)]
pub struct Domain {
    dim: usize,
    nodes: Vec<[f64; 2]>,
    weights: Vec<f64>,
    measure: f64,
    diam_euclid: f64,
    metric: MetricKind,
    /// Dense symmetric distance matrix, row-major, zero diagonal.
    dist: Vec<f64>,
    /// Maximum entry of `dist`; equals the node-cloud diameter.
    dist_max: f64,
    /// Half-extent of a quadrature cell along each axis (0 on unused axes,
    /// and for point-cloud domains).
    cell_half: [f64; 2],
    lattice: Option<Lattice>,
    /// Neighbor count used to build the geodesic metric, if any.
    knn_k: Option<usize>,
    /// Canonical shape string (`interval:a,b,n`, ...) when built by a parametric
    /// constructor; round-trips through serialized artifacts.
    shape: Option<String>,
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidDomain(format!("{name} must be finite, got {v}")))
    }
}

impl Domain {
    /// Midpoint partition of the interval (a, b) into `n` cells.
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Domain> {
        check_finite("a", a)?;
        check_finite("b", b)?;
        if !(a < b) {
            return Err(Error::InvalidDomain(format!("need a < b, got ({a}, {b})")));
        }
        if n < 2 {
            return Err(Error::InvalidDomain(format!("need at least 2 cells, got {n}")));
        }
        let h = (b - a) / n as f64;
        let nodes: Vec<[f64; 2]> = (0..n).map(|i| [a + (i as f64 + 0.5) * h, 0.0]).collect();
        let coords: Vec<[i64; 2]> = (0..n as i64).map(|i| [i, 0]).collect();
        Ok(Self::from_lattice(
            1,
            nodes,
            vec![h; n],
            coords,
            b - a,
            b - a,
            [h / 2.0, 0.0],
            format!("interval:{a},{b},{n}"),
        ))
    }

    /// Tensor midpoint grid on (ax, bx) x (ay, by) with nx * ny cells.
    pub fn rectangle(ax: f64, bx: f64, ay: f64, by: f64, nx: usize, ny: usize) -> Result<Domain> {
        for (name, v) in [("ax", ax), ("bx", bx), ("ay", ay), ("by", by)] {
            check_finite(name, v)?;
        }
        if !(ax < bx && ay < by) {
            return Err(Error::InvalidDomain(format!(
                "need ax < bx and ay < by, got ({ax},{bx}) x ({ay},{by})"
            )));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidDomain(format!(
                "need at least 2 cells per axis, got {nx} x {ny}"
            )));
        }
        let hx = (bx - ax) / nx as f64;
        let hy = (by - ay) / ny as f64;
        let mut nodes = Vec::with_capacity(nx * ny);
        let mut coords = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                nodes.push([
                    ax + (ix as f64 + 0.5) * hx,
                    ay + (iy as f64 + 0.5) * hy,
                ]);
                coords.push([ix as i64, iy as i64]);
            }
        }
        let measure = (bx - ax) * (by - ay);
        let diam = (bx - ax).hypot(by - ay);
        Ok(Self::from_lattice(
            2,
            nodes,
            vec![hx * hy; nx * ny],
            coords,
            measure,
            diam,
            [hx / 2.0, hy / 2.0],
            format!("rect:{ax},{bx},{ay},{by},{nx},{ny}"),
        ))
    }

    /// Square of the given side minus its closed upper-right quadrant,
    /// partitioned into `n_per_side^2` cells of which the notch quadrant is
    /// dropped. `n_per_side` must be even so cells do not straddle the notch
    /// boundary.
    pub fn lshape(side: f64, n_per_side: usize) -> Result<Domain> {
        check_finite("side", side)?;
        if !(side > 0.0) {
            return Err(Error::InvalidDomain(format!("need side > 0, got {side}")));
        }
        if n_per_side < 4 {
            return Err(Error::InvalidDomain(format!(
                "need at least 4 cells per side, got {n_per_side}"
            )));
        }
        if !n_per_side.is_multiple_of(2) {
            return Err(Error::InvalidDomain(format!(
                "L-shape cells must align with the notch: n_per_side must be even, got {n_per_side}"
            )));
        }
        let h = side / n_per_side as f64;
        let half = (n_per_side / 2) as i64;
        let mut nodes = Vec::new();
        let mut coords = Vec::new();
        for iy in 0..n_per_side as i64 {
            for ix in 0..n_per_side as i64 {
                if ix >= half && iy >= half {
                    continue; // removed quadrant
                }
                nodes.push([(ix as f64 + 0.5) * h, (iy as f64 + 0.5) * h]);
                coords.push([ix, iy]);
            }
        }
        let n = nodes.len();
        let measure = 0.75 * side * side;
        // The two convex corners (side, 0) and (0, side) survive the notch, so
        // the Euclidean diameter equals the full square's diagonal.
        let diam = side * std::f64::consts::SQRT_2;
        Ok(Self::from_lattice(
            2,
            nodes,
            vec![h * h; n],
            coords,
            measure,
            diam,
            [h / 2.0, h / 2.0],
            format!("lshape:{side},{n_per_side}"),
        ))
    }

    /// Arbitrary point cloud with explicit weights. Such domains support the
    /// metric-space operators (Holder seminorm, graph geodesics) but not the
    /// near-diagonal quadrature corrections, which need cells.
    pub fn from_points(dim: usize, nodes: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Domain> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidDomain(format!("dim must be 1 or 2, got {dim}")));
        }
        if nodes.len() < 2 {
            return Err(Error::InvalidDomain("need at least 2 nodes".into()));
        }
        if nodes.len() != weights.len() {
            return Err(Error::InvalidDomain(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        for (i, q) in nodes.iter().enumerate() {
            if !q[0].is_finite() || !q[1].is_finite() {
                return Err(Error::InvalidDomain(format!("non-finite node {i}")));
            }
            if dim == 1 && q[1] != 0.0 {
                return Err(Error::InvalidDomain(format!(
                    "1D node {i} has a second coordinate"
                )));
            }
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidDomain(format!("non-positive weight at node {i}")));
        }
        let measure = weights.iter().sum();
        let (dist, dist_max) = euclidean_matrix(&nodes);
        for i in 0..nodes.len() {
            for j in (i + 1)..nodes.len() {
                if dist[i * nodes.len() + j] == 0.0 {
                    return Err(Error::InvalidDomain(format!("nodes {i} and {j} coincide")));
                }
            }
        }
        Ok(Domain {
            dim,
            nodes,
            weights,
            measure,
            diam_euclid: dist_max,
            metric: MetricKind::Euclidean,
            dist,
            dist_max,
            cell_half: [0.0, 0.0],
            lattice: None,
            knn_k: None,
            shape: None,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn from_lattice(
        dim: usize,
        nodes: Vec<[f64; 2]>,
        weights: Vec<f64>,
        coords: Vec<[i64; 2]>,
        measure: f64,
        diam: f64,
        cell_half: [f64; 2],
        shape: String,
    ) -> Domain {
        let index = coords
            .iter()
            .enumerate()
            .map(|(i, c)| ((c[0], c[1]), i))
            .collect();
        let (dist, dist_max) = euclidean_matrix(&nodes);
        Domain {
            dim,
            nodes,
            weights,
            measure,
            diam_euclid: diam,
            metric: MetricKind::Euclidean,
            dist,
            dist_max,
            cell_half,
            lattice: Some(Lattice { coords, index }),
            knn_k: None,
            shape: Some(shape),
        }
    }

    /// Replaces the metric with all-pairs shortest-path lengths over the
    /// symmetrized k-NN graph (Euclidean edge lengths). The diameter becomes
    /// the largest path length.
    pub fn with_geodesic_metric(&self, k: usize) -> Result<Domain> {
        let n = self.len();
        if k < 1 || k >= n {
            return Err(Error::InvalidParameter(format!(
                "k-NN neighbor count must be in [1, {}), got {k}",
                n
            )));
        }
        let adj = knn_adjacency(&self.nodes, k);

        // Connectivity first, so the error names the cut-off node count.
        let isolated = n - largest_component(&adj);
        if isolated > 0 {
            return Err(Error::Disconnected { isolated, total: n });
        }

        let mut dist = vec![0.0f64; n * n];
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|src| dijkstra(&adj, src))
            .collect();
        for (src, row) in rows.into_iter().enumerate() {
            dist[src * n..(src + 1) * n].copy_from_slice(&row);
        }
        // Symmetrize bitwise; Dijkstra from both endpoints agrees up to
        // rounding in the order additions happen along the path.
        for i in 0..n {
            for j in (i + 1)..n {
                let d = dist[i * n + j].min(dist[j * n + i]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        let dist_max = dist.iter().cloned().fold(0.0, f64::max);
        let mut out = self.clone();
        out.metric = MetricKind::Geodesic;
        out.dist = dist;
        out.dist_max = dist_max;
        out.knn_k = Some(k);
        Ok(out)
    }

    /// Recommended neighbor count for the geodesic build.
    pub fn default_knn(&self) -> usize {
        2 * self.dim + 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn knn_k(&self) -> Option<usize> {
        self.knn_k
    }

    pub fn shape_string(&self) -> Option<&str> {
        self.shape.as_deref()
    }

    /// Distance between nodes `i` and `j` in the active metric.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.nodes.len() + j]
    }

    #[inline]
    pub(crate) fn dist_row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.nodes.len()..(i + 1) * self.nodes.len()]
    }

    /// Domain diameter in the active metric: the analytic value for Euclidean
    /// parametric shapes, otherwise the largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        match self.metric {
            MetricKind::Euclidean => self.diam_euclid,
            MetricKind::Geodesic => self.dist_max,
        }
    }

    /// Analytic Euclidean diameter of the continuous shape.
    pub fn euclidean_diameter(&self) -> f64 {
        self.diam_euclid
    }

    /// Largest pairwise node distance in the active metric. Underestimates
    /// the analytic Euclidean diameter by O(h); sweeps use [`Self::diameter`]
    /// unless asked for the discrete value.
    pub fn cloud_diameter(&self) -> f64 {
        self.dist_max
    }

    pub(crate) fn cell_half(&self) -> [f64; 2] {
        self.cell_half
    }

    pub(crate) fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }

    /// Node index closest to the centroid of the node cloud.
    pub fn central_node(&self) -> usize {
        let n = self.len() as f64;
        let cx = self.nodes.iter().map(|q| q[0]).sum::<f64>() / n;
        let cy = self.nodes.iter().map(|q| q[1]).sum::<f64>() / n;
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, q) in self.nodes.iter().enumerate() {
            let d = (q[0] - cx).hypot(q[1] - cy);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

fn euclidean_matrix(nodes: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = nodes.len();
    let mut dist = vec![0.0f64; n * n];
    let mut max = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (nodes[i][0] - nodes[j][0]).hypot(nodes[i][1] - nodes[j][1]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
            if d > max {
                max = d;
            }
        }
    }
    (dist, max)
}

/// Symmetrized k-nearest-neighbor adjacency with Euclidean edge lengths.
/// Ties in the k-th distance break by node index, so the graph is a
/// deterministic function of the node cloud.
fn knn_adjacency(nodes: &[[f64; 2]], k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = nodes.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut cand: Vec<(OrderedFloat<f64>, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let d = (nodes[i][0] - nodes[j][0]).hypot(nodes[i][1] - nodes[j][1]);
                (OrderedFloat(d), j)
            })
            .collect();
        cand.sort_unstable();
        for &(d, j) in cand.iter().take(k) {
            adj[i].push((j, d.0));
        }
    }
    // Symmetrize: keep an edge if either endpoint selected it.
    let mut sym: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        for &(j, d) in &adj[i] {
            sym[i].push((j, d));
            sym[j].push((i, d));
        }
    }
    for row in &mut sym {
        row.sort_by_key(|e| e.0);
        row.dedup_by_key(|e| e.0);
    }
    sym
}

fn largest_component(adj: &[Vec<(usize, f64)>]) -> usize {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut best = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut size = 0;
        while let Some(v) = stack.pop() {
            size += 1;
            for &(w, _) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        best = best.max(size);
    }
    best
}

fn dijkstra(adj: &[Vec<(usize, f64)>], src: usize) -> Vec<f64> {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    dist[src] = 0.0;
    let mut heap: BinaryHeap<std::cmp::Reverse<(OrderedFloat<f64>, usize)>> = BinaryHeap::new();
    heap.push(std::cmp::Reverse((OrderedFloat(0.0), src)));
    while let Some(std::cmp::Reverse((OrderedFloat(d), v))) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, len) in &adj[v] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(std::cmp::Reverse((OrderedFloat(nd), w)));
            }
        }
    }
    dist
}
