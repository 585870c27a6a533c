//! Persistence for computed artifacts: JSON documents, CSV tables and SVG
//! line plots. All files are written atomically (temp file in the target
//! directory, then rename), and all number formatting is locale-independent.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::asymptotics::SweepResult;
use crate::eigensolve::EigenPair;
use crate::error::{Error, Result};
use crate::geometry::{Domain, GridFunction, MetricKind};
use crate::holder::ViscosityReport;

/// Self-contained record of one eigen solve: enough to rebuild the domain
/// and re-check or post-process the eigenfunction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenDocument {
    /// Domain spec string, e.g. `interval:0,1,256`.
    pub domain: String,
    pub metric: MetricKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub knn: Option<usize>,
    pub s: f64,
    pub p: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub constraint_residual: f64,
    pub u: Vec<f64>,
}

impl EigenDocument {
    pub fn new(dom: &Domain, s: f64, p: f64, pair: &EigenPair) -> Result<EigenDocument> {
        let domain = dom
            .shape_string()
            .ok_or_else(|| {
                Error::Config("point-cloud domains have no spec string to persist".into())
            })?
            .to_string();
        Ok(EigenDocument {
            domain,
            metric: dom.metric(),
            knn: dom.knn_k(),
            s,
            p,
            lambda: pair.lambda,
            iterations: pair.iterations,
            converged: pair.converged,
            constraint_residual: pair.constraint_residual,
            u: pair.u.as_slice().to_vec(),
        })
    }

    pub fn load(path: &Path) -> Result<EigenDocument> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Rebuild the domain this document was computed on.
    pub fn build_domain(&self) -> Result<Domain> {
        let spec: crate::config::DomainSpec = self.domain.parse()?;
        spec.build_with_metric(self.metric, self.knn.unwrap_or(8))
    }
}

pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    std::io::Write::write_all(&mut tmp, contents)?;
    tmp.persist(path)
        .map_err(|e| Error::Io(e.error))
        .map(|_| ())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization: {e}")))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

fn push_float(line: &mut String, x: f64) {
    // Shortest round-trip formatting; always `.`-separated.
    write!(line, "{x}").expect("write to string");
}

/// Table of the eigenfunction over the nodes: `x,u` in 1D, `x,y,u` in 2D.
pub fn eigenfunction_csv(dom: &Domain, u: &GridFunction) -> String {
    let mut out = String::new();
    out.push_str(if dom.dim() == 1 { "x,u\n" } else { "x,y,u\n" });
    for (node, &val) in dom.nodes().iter().zip(u.as_slice()) {
        push_float(&mut out, node[0]);
        if dom.dim() == 2 {
            out.push(',');
            push_float(&mut out, node[1]);
        }
        out.push(',');
        push_float(&mut out, val);
        out.push('\n');
    }
    out
}

/// Sweep table, one row per converged record. Missing reference columns are
/// left empty.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from("param,N,lambda,scaled,reference,rel_error\n");
    for r in &result.records {
        push_float(&mut out, r.param);
        write!(out, ",{}", r.grid_n).expect("write to string");
        out.push(',');
        push_float(&mut out, r.lambda);
        out.push(',');
        push_float(&mut out, r.scaled);
        out.push(',');
        if let Some(v) = r.reference {
            push_float(&mut out, v);
        }
        out.push(',');
        if let Some(v) = r.rel_error {
            push_float(&mut out, v);
        }
        out.push('\n');
    }
    out
}

/// Per-node viscosity residual table: `node,x[,y],u,class,residual`.
pub fn viscosity_csv(dom: &Domain, u: &GridFunction, report: &ViscosityReport) -> String {
    let mut out = String::new();
    out.push_str(if dom.dim() == 1 {
        "node,x,u,class,residual\n"
    } else {
        "node,x,y,u,class,residual\n"
    });
    for r in &report.per_node {
        let node = dom.nodes()[r.node];
        write!(out, "{},", r.node).expect("write to string");
        push_float(&mut out, node[0]);
        if dom.dim() == 2 {
            out.push(',');
            push_float(&mut out, node[1]);
        }
        out.push(',');
        push_float(&mut out, u.as_slice()[r.node]);
        write!(out, ",{},", r.class.as_str()).expect("write to string");
        push_float(&mut out, r.residual);
        out.push('\n');
    }
    out
}

/// Hand-rolled line chart of a sweep: `param` on x, `scaled` on y, the
/// reference value (when present) as a dashed horizontal rule.
pub fn sweep_plot_svg(result: &SweepResult, x_label: &str, title: &str) -> String {
    let pts: Vec<(f64, f64)> = result
        .records
        .iter()
        .map(|r| (r.param, r.scaled))
        .collect();
    let reference = result.records.iter().find_map(|r| r.reference);

    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);

    let (mut x0, mut x1) = bounds(pts.iter().map(|q| q.0));
    let mut ys: Vec<f64> = pts.iter().map(|q| q.1).collect();
    ys.extend(reference);
    let (mut y0, mut y1) = bounds(ys.iter().copied());
    if x1 - x0 < 1e-300 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-300 {
        y0 -= 0.5;
        y1 += 0.5;
    } else {
        let pad = 0.08 * (y1 - y0);
        y0 -= pad;
        y1 += pad;
    }
    let sx = move |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = move |y: f64| mt + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(
        svg,
        "  <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>",
        w / 2.0,
        xml_escape(title)
    );

    // Axes with ticks.
    let _ = writeln!(
        svg,
        "  <line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        h - mb,
        w - mr,
        h - mb
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>",
        h - mb
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = x0 + t * (x1 - x0);
        let yv = y0 + t * (y1 - y0);
        let _ = writeln!(
            svg,
            "  <line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n  <text x=\"{0}\" y=\"{3}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{4}</text>",
            sx(xv),
            h - mb,
            h - mb + 5.0,
            h - mb + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            svg,
            "  <line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"black\"/>\n  <text x=\"{3}\" y=\"{4}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{5}</text>",
            sy(yv),
            ml - 5.0,
            ml,
            ml - 8.0,
            sy(yv) + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        ml + pw / 2.0,
        h - 12.0,
        xml_escape(x_label)
    );

    if let Some(rv) = reference {
        let _ = writeln!(
            svg,
            "  <line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#c0392b\" stroke-dasharray=\"6,4\"/>\n  <text x=\"{2}\" y=\"{3}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#c0392b\" text-anchor=\"end\">reference {4}</text>",
            sy(rv),
            w - mr,
            w - mr - 4.0,
            sy(rv) - 6.0,
            tick_label(rv)
        );
    }

    if !pts.is_empty() {
        let mut poly = String::new();
        for (x, y) in &pts {
            let _ = write!(poly, "{},{} ", sx(*x), sy(*y));
        }
        let _ = writeln!(
            svg,
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"#2c6fbb\" stroke-width=\"1.5\"/>",
            poly.trim_end()
        );
        for (x, y) in &pts {
            let _ = writeln!(
                svg,
                "  <circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"#2c6fbb\"/>",
                sx(*x),
                sy(*y)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
