//! Run configuration: domain/metric specification strings and the optional
//! TOML config file backing the CLI flags.
//!
//! A domain spec is a compact string such as `interval:0,1,256`,
//! `rectangle:0,1,0,1,24,24` or `lshape:2,16`; it round-trips through
//! [`std::fmt::Display`]. The config file carries the same information in
//! `[domain]`, `[params]`, `[solver]` and `[output]` sections; command-line
//! flags override file values field by field.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, MetricKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainSpec {
    Interval {
        a: f64,
        b: f64,
        n: usize,
    },
    Rectangle {
        ax: f64,
        bx: f64,
        ay: f64,
        by: f64,
        nx: usize,
        ny: usize,
    },
    LShape {
        side: f64,
        n_per_side: usize,
    },
}

impl DomainSpec {
    /// Construct the Euclidean-metric domain this spec describes.
    pub fn build(&self) -> Result<Domain> {
        match *self {
            DomainSpec::Interval { a, b, n } => Domain::interval(a, b, n),
            DomainSpec::Rectangle {
                ax,
                bx,
                ay,
                by,
                nx,
                ny,
            } => Domain::rectangle(ax, bx, ay, by, nx, ny),
            DomainSpec::LShape { side, n_per_side } => Domain::lshape(side, n_per_side),
        }
    }

    /// Construct the domain and, for the geodesic metric, attach the k-NN
    /// shortest-path distance table.
    pub fn build_with_metric(&self, metric: MetricKind, knn: usize) -> Result<Domain> {
        let dom = self.build()?;
        match metric {
            MetricKind::Euclidean => Ok(dom),
            MetricKind::Geodesic => dom.with_geodesic_metric(knn),
        }
    }
}

fn parse_fields(body: &str, what: &str, want: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = body.split(',').collect();
    if parts.len() != want {
        return Err(Error::Config(format!(
            "{what} takes {want} comma-separated values, got {}",
            parts.len()
        )));
    }
    parts
        .iter()
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{what}: cannot parse number {t:?}")))
        })
        .collect()
}

fn as_count(x: f64, what: &str) -> Result<usize> {
    if x.fract() != 0.0 || !(1.0..=1e9).contains(&x) {
        return Err(Error::Config(format!(
            "{what}: cell count must be a positive integer, got {x}"
        )));
    }
    Ok(x as usize)
}

impl FromStr for DomainSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<DomainSpec> {
        let (shape, body) = text
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("domain spec {text:?} lacks a shape prefix")))?;
        match shape {
            "interval" => {
                let f = parse_fields(body, "interval", 3)?;
                Ok(DomainSpec::Interval {
                    a: f[0],
                    b: f[1],
                    n: as_count(f[2], "interval")?,
                })
            }
            "rectangle" => {
                let f = parse_fields(body, "rectangle", 6)?;
                Ok(DomainSpec::Rectangle {
                    ax: f[0],
                    bx: f[1],
                    ay: f[2],
                    by: f[3],
                    nx: as_count(f[4], "rectangle")?,
                    ny: as_count(f[5], "rectangle")?,
                })
            }
            "lshape" => {
                let f = parse_fields(body, "lshape", 2)?;
                Ok(DomainSpec::LShape {
                    side: f[0],
                    n_per_side: as_count(f[1], "lshape")?,
                })
            }
            other => Err(Error::Config(format!(
                "unknown domain shape {other:?}; expected interval, rectangle or lshape"
            ))),
        }
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DomainSpec::Interval { a, b, n } => write!(f, "interval:{a},{b},{n}"),
            DomainSpec::Rectangle {
                ax,
                bx,
                ay,
                by,
                nx,
                ny,
            } => write!(f, "rectangle:{ax},{bx},{ay},{by},{nx},{ny}"),
            DomainSpec::LShape { side, n_per_side } => write!(f, "lshape:{side},{n_per_side}"),
        }
    }
}

pub fn parse_metric(text: &str) -> Result<MetricKind> {
    match text {
        "euclidean" => Ok(MetricKind::Euclidean),
        "geodesic" => Ok(MetricKind::Geodesic),
        other => Err(Error::Config(format!(
            "unknown metric {other:?}; expected euclidean or geodesic"
        ))),
    }
}

/// Optional file-backed counterpart of the CLI flags. Every field is
/// optional; flags override file values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// Domain spec string, e.g. `interval:0,1,256`.
    pub shape: Option<String>,
    /// `euclidean` (default) or `geodesic`.
    pub metric: Option<String>,
    /// Neighbor count for the geodesic graph.
    pub knn: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub s: Option<f64>,
    pub p: Option<f64>,
    pub s_grid: Option<Vec<f64>>,
    pub p_grid: Option<Vec<f64>>,
    /// Known limit value for error columns, e.g. `pi^2` on a unit interval.
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub json: Option<String>,
    pub csv: Option<String>,
    pub function_csv: Option<String>,
    pub plot: Option<String>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config sections serialize")
    }
}

/// Reject grids the sweep drivers would refuse, so the failure is a config
/// error rather than a solver error.
pub fn validate_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{what} grid is empty")));
    }
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config(format!(
                "{what} grid must be strictly increasing"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_spec_round_trips_through_display() {
        for text in [
            "interval:0,1,256",
            "rectangle:0,1,-0.5,0.5,24,16",
            "lshape:2,16",
        ] {
            let spec: DomainSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
            let again: DomainSpec = spec.to_string().parse().unwrap();
            assert_eq!(again, spec);
        }
    }

    #[test]
    fn domain_spec_builds_expected_domains() {
        let d = "interval:0,1,64".parse::<DomainSpec>().unwrap().build().unwrap();
        assert_eq!((d.len(), d.dim()), (64, 1));
        let d = "rectangle:0,2,0,1,8,4".parse::<DomainSpec>().unwrap().build().unwrap();
        assert_eq!((d.len(), d.dim()), (32, 2));
        let d = "lshape:2,8".parse::<DomainSpec>().unwrap().build().unwrap();
        assert_eq!(d.dim(), 2);
        // 8x8 cells minus the 4x4 removed quadrant.
        assert_eq!(d.len(), 48);
    }

    #[test]
    fn malformed_domain_specs_are_rejected() {
        for text in [
            "interval",
            "interval:0,1",
            "interval:0,1,256,9",
            "interval:0,1,abc",
            "interval:0,1,12.5",
            "interval:0,1,-4",
            "disc:0,1,16",
            "rectangle:0,1,0,1,8",
        ] {
            assert!(text.parse::<DomainSpec>().is_err(), "{text} should fail");
        }
    }

    #[test]
    fn metric_parsing() {
        assert_eq!(parse_metric("euclidean").unwrap(), MetricKind::Euclidean);
        assert_eq!(parse_metric("geodesic").unwrap(), MetricKind::Geodesic);
        assert!(parse_metric("taxicab").is_err());
    }

    #[test]
    fn geodesic_build_attaches_metric() {
        let spec: DomainSpec = "lshape:2,8".parse().unwrap();
        let d = spec
            .build_with_metric(MetricKind::Geodesic, 8)
            .unwrap();
        assert_eq!(d.metric(), MetricKind::Geodesic);
    }

    #[test]
    fn config_file_round_trip_preserves_semantics() {
        let text = r#"
            [domain]
            shape = "interval:0,1,128"
            metric = "euclidean"

            [params]
            s = 0.5
            p = 2.0
            s_grid = [0.6, 0.7, 0.8]

            [solver]
            tol = 1e-9
            max_iter = 10000

            [output]
            json = "run.json"
            plot = "run.svg"
        "#;
        let cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.domain.shape.as_deref(), Some("interval:0,1,128"));
        assert_eq!(cfg.params.s, Some(0.5));
        assert_eq!(cfg.solver.tol, Some(1e-9));
        assert_eq!(cfg.output.plot.as_deref(), Some("run.svg"));
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        assert!(RunConfig::from_toml("[params]\nq = 3.0\n").is_err());
        assert!(RunConfig::from_toml("[typo]\ns = 0.5\n").is_err());
        assert!(RunConfig::from_toml("[params]\ns = \"half\"\n").is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(validate_grid(&[0.5, 0.6], "s").is_ok());
        assert!(validate_grid(&[], "s").is_err());
        assert!(validate_grid(&[0.6, 0.6], "s").is_err());
        assert!(validate_grid(&[0.7, 0.6], "s").is_err());
    }
}
