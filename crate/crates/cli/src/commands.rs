use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use nalgebra::DVector;
use sdviab::hull::convex_hull_2d;
use sdviab::kernel::{GuidedRun, Kernel, OverApproximation, UnderApproximation};
use sdviab::oracle::{grid_bracket_2d, GridBracket};
use sdviab::sampling::SamplerState;
use sha2::{Digest, Sha256};

use crate::config::{Algorithm, ProblemConfig};
use crate::io::{format_halfspaces, format_vertices, Manifest};

/// Everything one `approx` run produced.
#[derive(Debug, Clone)]
pub struct ApproxOutcome {
    pub under: UnderApproximation,
    pub over: Option<OverApproximation>,
    /// Per-iteration error of the guided loop (empty for plain sampling).
    pub err_trace: Vec<f64>,
    pub total: Duration,
    pub manifest: Manifest,
}

pub fn config_hash(cfg: &ProblemConfig) -> String {
    let digest = Sha256::digest(cfg.canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn secs(d: &[Duration]) -> String {
    d.iter().map(|t| format!("{:.6}", t.as_secs_f64())).collect::<Vec<_>>().join(" ")
}

/// Runs the configured approximation without touching the file system.
pub fn run_approx(cfg: &ProblemConfig) -> Result<ApproxOutcome> {
    let mut options = cfg.options.clone();
    if cfg.algorithm == Algorithm::Guided && options.workers != 1 {
        log::info!("guided sampling is sequential; running with one worker");
        options.workers = 1;
    }
    let start = Instant::now();
    let kernel = Kernel::new(cfg.problem.clone(), options)?;
    let mut sampler = SamplerState::with_params(cfg.mode, cfg.problem.n(), cfg.seed, cfg.params);
    sampler.queue(cfg.warm_start()?);
    let anchor = cfg.anchor.as_ref();

    let (under, over, err_trace) = match cfg.algorithm {
        Algorithm::Sample => {
            let under = kernel.polytopic_approx(anchor, cfg.samples, &mut sampler)?;
            let over = if cfg.over && under.sampled() > 0 {
                Some(kernel.over_approx(&under, cfg.problem.epsilon_o)?)
            } else {
                None
            };
            (under, over, Vec::new())
        }
        Algorithm::Guided => {
            let GuidedRun {
                under, over, err_trace, ..
            } = kernel.combined_guided(anchor, cfg.samples, &mut sampler)?;
            (under, Some(over), err_trace)
        }
    };
    let total = start.elapsed();

    let mut m = Manifest::default();
    m.set("library_version", env!("CARGO_PKG_VERSION"));
    m.set("config_hash", config_hash(cfg));
    m.set("seed", cfg.seed);
    m.set("mode", cfg.mode);
    m.set("nu", format!("{} {} {}", cfg.params.nu0, cfg.params.nu1, cfg.params.nu2));
    m.set(
        "algorithm",
        match cfg.algorithm {
            Algorithm::Sample => "sample",
            Algorithm::Guided => "guided",
        },
    );
    m.set("n", cfg.problem.n());
    m.set("steps", cfg.problem.steps());
    m.set("scaling", kernel.transform().factors.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(" "));
    m.set("m_bound", kernel.transform().m_bound);
    m.set("vertices", under.len());
    m.set("accepted_rays", under.sampled());
    m.set("extra_vertices", under.extra.iter().filter(|e| **e).count());
    m.set("skipped_rays", under.skipped);
    m.set("facets", over.as_ref().map_or(0, |o| o.len()));
    m.set("aborted_facets", over.as_ref().map_or(0, |o| o.aborted.len()));
    m.set("total_seconds", format!("{:.6}", total.as_secs_f64()));
    m.set("vertex_seconds", secs(&under.timings));
    m.set("facet_seconds", over.as_ref().map_or_else(String::new, |o| secs(&o.timings)));
    if !err_trace.is_empty() {
        m.set("err_trace", err_trace.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" "));
    }
    Ok(ApproxOutcome {
        under,
        over,
        err_trace,
        total,
        manifest: m,
    })
}

/// Writes `vertices.txt`, `facets.txt` (when an outer approximation exists) and `manifest.txt`.
pub fn write_approx(out: &ApproxOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("vertices.txt"), format_vertices(&out.under.vertices))?;
    if let Some(over) = &out.over {
        let poly = over.polytope()?;
        fs::write(dir.join("facets.txt"), format_halfspaces(poly.require_hrep()?))?;
    }
    fs::write(dir.join("manifest.txt"), out.manifest.render())?;
    Ok(())
}

/// 2D shadow of a vertex set on coordinates `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Counter-clockwise hull; two points for a segment, one for a point.
    pub polygon: Vec<[f64; 2]>,
    pub degenerate: bool,
}

pub fn project(vertices: &[DVector<f64>], dims: (usize, usize)) -> Result<Projection> {
    let n = vertices.first().map_or(0, |v| v.len());
    if dims.0 >= n || dims.1 >= n || dims.0 == dims.1 {
        bail!("projection dims ({}, {}) invalid for n = {n}", dims.0, dims.1);
    }
    let pts: Vec<[f64; 2]> = vertices.iter().map(|v| [v[dims.0], v[dims.1]]).collect();
    let hull = convex_hull_2d(&pts);
    if hull.len() >= 3 {
        return Ok(Projection {
            polygon: hull,
            degenerate: false,
        });
    }
    // collinear shadow: report the extreme points of the segment
    let mut sorted = pts;
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    sorted.dedup();
    let polygon = match (sorted.first(), sorted.last()) {
        (Some(a), Some(b)) if a != b => vec![*a, *b],
        (Some(a), _) => vec![*a],
        _ => Vec::new(),
    };
    Ok(Projection {
        polygon,
        degenerate: true,
    })
}

pub fn format_projection(p: &Projection) -> String {
    let mut out = String::new();
    if p.degenerate {
        out.push_str("# degenerate\n");
    }
    for q in &p.polygon {
        out.push_str(&format!("{} {}\n", q[0], q[1]));
    }
    out
}

pub fn run_oracle(cfg: &ProblemConfig, h: f64) -> Result<GridBracket> {
    let kernel = Kernel::new(cfg.problem.clone(), cfg.options.clone())?;
    Ok(grid_bracket_2d(&kernel, h)?)
}

/// `x y class` rows with class `inner`, `outer` or `infeasible`.
pub fn format_bracket(g: &GridBracket) -> String {
    let mut out = format!("# h = {} outer_area = {} inner_area = {}\n", g.h, g.outer_area(), g.inner_area());
    for c in &g.cells {
        let class = if c.inner {
            "inner"
        } else if c.outer {
            "outer"
        } else {
            "infeasible"
        };
        out.push_str(&format!("{} {} {class}\n", c.center[0], c.center[1]));
    }
    out
}

/// Process exit code for an error chain.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use sdviab::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::EmptyErosion { .. } => 3,
                E::InfeasibleAnchor => 4,
                E::LpNumericalFailure(_) | E::Unbounded => 5,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
    }
    2
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn projection_of_square_is_identity() {
        let v = vec![dvector![0.5, 0.5], dvector![-0.5, 0.5], dvector![-0.5, -0.5], dvector![0.5, -0.5]];
        let p = project(&v, (0, 1)).unwrap();
        assert!(!p.degenerate);
        assert_eq!(p.polygon.len(), 4);
        for q in &p.polygon {
            assert!(v.iter().any(|x| x[0] == q[0] && x[1] == q[1]));
        }
    }

    #[test]
    fn flat_projection_is_flagged() {
        let v = vec![dvector![1.0, 0.0, 2.0], dvector![1.0, 1.0, 2.0], dvector![1.0, 3.0, 2.0]];
        let p = project(&v, (0, 2)).unwrap();
        assert!(p.degenerate);
        assert_eq!(p.polygon.len(), 1);
        let p = project(&v, (1, 2)).unwrap();
        assert!(p.degenerate);
        assert_eq!(p.polygon, vec![[0.0, 2.0], [3.0, 2.0]]);
        assert!(project(&v, (0, 3)).is_err());
        assert!(format_projection(&p).starts_with("# degenerate"));
    }

    #[test]
    fn exit_codes() {
        let e = anyhow::Error::from(sdviab::Error::EmptyErosion { step: Some(3) });
        assert_eq!(exit_code(&e), 3);
        assert_eq!(exit_code(&anyhow::Error::from(sdviab::Error::InfeasibleAnchor)), 4);
        assert_eq!(exit_code(&anyhow::anyhow!("delta: cannot parse")), 2);
        let lp = anyhow::Error::from(sdviab::Error::LpNumericalFailure("x".into())).context("run");
        assert_eq!(exit_code(&lp), 5);
    }
}
