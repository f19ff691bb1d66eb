//! Problem configuration files.
//!
//! Line-oriented `key = value`; `#` starts a comment. Matrices are written in brackets, rows
//! separated by `;` or newlines:
//!
//! ```text
//! preset = double_integrator      # optional starting point; later keys override it
//! A = [0 1; 0 0]
//! B = [
//!   0
//!   1
//! ]
//! K.lo = -0.5 -0.5                # box, or `K = [a_1 … a_n b; …]` for rows aᵀx <= b
//! K.hi = 0.5 0.5
//! U.lo = -0.15
//! U.hi = 0.15
//! delta = 0.05
//! tau = 1
//! zeta = 4
//! epsilon = 0.01
//! epsilon_o = 0.01
//! mode = uniform
//! samples = 20
//! ```
//!
//! `A.file = path` (and likewise for `B`, `K`, `U`) reads the bracket body from a file, resolved
//! relative to the config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use sdviab::kernel::{warm_start_directions, KernelOptions};
use sdviab::presets;
use sdviab::sampling::{SamplerMode, SamplerParams};
use sdviab::{Halfspace, LtiSystem, Polytope, SampledDataProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Ray sampling, then (optionally) facets along the sampled directions.
    Sample,
    /// Interleaved inner/outer loop with guided extra vertices.
    Guided,
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub problem: SampledDataProblem,
    pub mode: SamplerMode,
    pub params: SamplerParams,
    pub seed: u64,
    pub samples: usize,
    pub algorithm: Algorithm,
    /// Build the outer approximation after sampling (`Sample` only).
    pub over: bool,
    pub warm_axes: bool,
    pub warm_fans: Vec<(usize, usize)>,
    pub warm_per_fan: usize,
    pub anchor: Option<DVector<f64>>,
    pub options: KernelOptions,
    pub output: Option<PathBuf>,
    /// Canonical text the config hash is computed from.
    pub canonical: String,
}

impl ProblemConfig {
    pub fn warm_start(&self) -> Result<Vec<DVector<f64>>> {
        if !self.warm_axes && self.warm_fans.is_empty() {
            return Ok(Vec::new());
        }
        Ok(warm_start_directions(self.problem.n(), self.warm_axes, &self.warm_fans, self.warm_per_fan)?)
    }
}

/// Names accepted by `preset =`.
pub const PRESETS: &str = "double_integrator, quadrotor, integrator_chain:<n>";

fn preset_defaults(name: &str) -> Result<(SampledDataProblem, Vec<(&'static str, String)>)> {
    match name {
        "double_integrator" => Ok((
            presets::double_integrator()?,
            vec![("mode", "uniform".into()), ("samples", "20".into())],
        )),
        "quadrotor" => Ok((
            presets::quadrotor()?,
            vec![
                ("mode", "avg_opposite".into()),
                ("samples", "96".into()),
                ("over", "false".into()),
                ("warm_axes", "true".into()),
                ("warm_fans", "0:3 1:4 2:5 6:9 7:10 8:11".into()),
                ("warm_per_fan", "12".into()),
            ],
        )),
        _ => {
            let n: usize = name
                .strip_prefix("integrator_chain:")
                .and_then(|s| s.parse().ok())
                .filter(|n| *n >= 1)
                .ok_or_else(|| anyhow!("unknown preset '{name}' (known: {PRESETS})"))?;
            Ok((
                presets::integrator_chain(n)?,
                vec![
                    ("mode", "uniform".into()),
                    ("samples", (2 * n).to_string()),
                    ("max_bisection_depth", "3".into()),
                ],
            ))
        }
    }
}

/// Config for a named preset with no overrides.
pub fn preset(name: &str) -> Result<ProblemConfig> {
    parse_str(&format!("preset = {name}\n"), None)
}

pub fn load(path: &Path) -> Result<ProblemConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_str(&text, path.parent())
}

/// Splits the text into `key = value` entries, joining bracketed blocks that span lines.
fn entries(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    let mut pending: Option<(String, String, usize)> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some((key, mut value, start)) = pending.take() {
            value.push(';');
            value.push_str(line);
            if line.contains(']') {
                out.push((key, value, start));
            } else {
                pending = Some((key, value, start));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if value.starts_with('[') && !value.contains(']') {
            pending = Some((key, value, lineno + 1));
        } else {
            out.push((key, value, lineno + 1));
        }
    }
    if let Some((key, _, start)) = pending {
        bail!("line {start}: unterminated matrix block for '{key}'");
    }
    Ok(out)
}

/// Parses a bracketed matrix body (`[1 2; 3 4]`) or a bare body into rows.
fn matrix(value: &str) -> Result<DMatrix<f64>> {
    let body = value.trim().trim_start_matches('[').trim_end_matches(']');
    let rows: Vec<Vec<f64>> = body
        .split([';', '\n'])
        .map(str::trim)
        .filter(|r| !r.is_empty())
        .map(numbers)
        .collect::<Result<_>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        bail!("empty matrix");
    }
    if rows.iter().any(|r| r.len() != cols) {
        bail!("ragged matrix rows");
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| anyhow!("not a number: '{t}'")))
        .collect()
}

fn read_block(path: &str, base: Option<&Path>) -> Result<String> {
    let p = base.map_or_else(|| PathBuf::from(path), |b| b.join(path));
    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(";"))
}

fn hpolytope(m: &DMatrix<f64>) -> Result<Polytope> {
    if m.ncols() < 2 {
        bail!("H-rep rows need at least one coefficient and an offset");
    }
    let n = m.ncols() - 1;
    let rows = (0..m.nrows())
        .map(|i| {
            let a = DVector::from_iterator(n, m.row(i).iter().take(n).copied());
            Halfspace::new(a, m[(i, n)])
        })
        .collect::<sdviab::Result<Vec<_>>>()?;
    Ok(Polytope::from_halfspaces(n, rows)?)
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("{key}: expected true or false, got '{v}'"),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow!("{key}: cannot parse '{v}'"))
}

pub fn parse_str(text: &str, base: Option<&Path>) -> Result<ProblemConfig> {
    let raw = entries(text)?;
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    let mut base_problem = None;
    for (key, value, line) in raw {
        let value = match key.strip_suffix(".file") {
            Some(stem) => {
                let body = read_block(&value, base).with_context(|| format!("line {line}"))?;
                map.insert(stem.to_string(), format!("[{body}]"));
                continue;
            }
            None => value,
        };
        if key == "preset" {
            let (p, defaults) = preset_defaults(&value).with_context(|| format!("line {line}"))?;
            base_problem = Some(p);
            for (k, v) in defaults {
                map.entry(k.to_string()).or_insert(v);
            }
            map.insert(key, value);
            continue;
        }
        map.insert(key, value);
    }
    build(map, base_problem)
}

const KNOWN: &[&str] = &[
    "preset", "A", "B", "K", "K.lo", "K.hi", "U", "U.lo", "U.hi", "delta", "tau", "zeta", "epsilon",
    "epsilon_o", "mode", "nu0", "nu1", "nu2", "seed", "samples", "algorithm", "over", "warm_axes",
    "warm_fans", "warm_per_fan", "anchor", "facet_ratio", "workers", "max_bisection_depth", "scaling",
    "recenter", "bound_cap", "output",
];

fn set_from(map: &BTreeMap<String, String>, name: &str, dim_hint: Option<usize>) -> Result<Option<Polytope>> {
    if let Some(v) = map.get(name) {
        return Ok(Some(hpolytope(&matrix(v).with_context(|| name.to_string())?)?));
    }
    let (lo, hi) = (map.get(&format!("{name}.lo")), map.get(&format!("{name}.hi")));
    match (lo, hi) {
        (Some(lo), Some(hi)) => {
            let (lo, hi) = (numbers(lo)?, numbers(hi)?);
            if dim_hint.is_some_and(|d| d != lo.len()) {
                bail!("{name}.lo has {} entries, expected {}", lo.len(), dim_hint.unwrap_or(0));
            }
            Ok(Some(Polytope::boxed(&lo, &hi)?))
        }
        (None, None) => Ok(None),
        _ => bail!("{name}.lo and {name}.hi must be given together"),
    }
}

fn build(map: BTreeMap<String, String>, base: Option<SampledDataProblem>) -> Result<ProblemConfig> {
    if let Some(unknown) = map.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        bail!("unknown key '{unknown}'");
    }
    let get = |k: &str| map.get(k).map(String::as_str);

    let a = get("A").map(matrix).transpose().context("A")?;
    let b = get("B").map(matrix).transpose().context("B")?;
    let system = match (a, b, &base) {
        (Some(a), Some(b), _) => LtiSystem::new(a, b)?,
        (None, None, Some(p)) => p.system.clone(),
        (Some(a), None, Some(p)) => LtiSystem::new(a, p.system.b().clone())?,
        (None, Some(b), Some(p)) => LtiSystem::new(p.system.a().clone(), b)?,
        _ => bail!("A and B are required without a preset"),
    };
    let k = match set_from(&map, "K", Some(system.n()))? {
        Some(k) => k,
        None => base.as_ref().map(|p| p.k.clone()).ok_or_else(|| anyhow!("K is required"))?,
    };
    let u = match set_from(&map, "U", Some(system.m()))? {
        Some(u) => u,
        None => base.as_ref().map(|p| p.u.clone()).ok_or_else(|| anyhow!("U is required"))?,
    };
    let scalar = |key: &str, fallback: Option<f64>| -> Result<f64> {
        match get(key) {
            Some(v) => parse_num(key, v),
            None => fallback.ok_or_else(|| anyhow!("{key} is required")),
        }
    };
    let delta = scalar("delta", base.as_ref().map(|p| p.delta))?;
    let tau = scalar("tau", base.as_ref().map(|p| p.tau))?;
    let zeta = match get("zeta") {
        Some(v) => parse_num("zeta", v)?,
        None => base.as_ref().map_or(4, |p| p.zeta),
    };
    let epsilon = scalar("epsilon", base.as_ref().map(|p| p.epsilon).or(Some(0.01)))?;
    let epsilon_o = scalar("epsilon_o", base.as_ref().map(|p| p.epsilon_o).or(Some(epsilon)))?;
    let problem = SampledDataProblem::new(system, k, u, delta, tau, zeta, epsilon, epsilon_o)?;
    let n = problem.n();

    let mode: SamplerMode = get("mode").unwrap_or("uniform").parse()?;
    let mut params = mode.default_params(n);
    if let Some(v) = get("nu0") {
        params.nu0 = parse_num("nu0", v)?;
    }
    if let Some(v) = get("nu1") {
        params.nu1 = parse_num("nu1", v)?;
    }
    if let Some(v) = get("nu2") {
        params.nu2 = parse_num("nu2", v)?;
    }
    let algorithm = match get("algorithm") {
        None if mode.needs_over_approximation() => Algorithm::Guided,
        None | Some("sample") => Algorithm::Sample,
        Some("guided") => Algorithm::Guided,
        Some(other) => bail!("algorithm: expected sample or guided, got '{other}'"),
    };
    if algorithm == Algorithm::Sample && mode.needs_over_approximation() {
        bail!("mode {mode} needs the running outer approximation; use algorithm = guided");
    }

    let mut options = KernelOptions::default();
    if let Some(v) = get("facet_ratio") {
        options.facet_ratio = parse_num("facet_ratio", v)?;
    }
    if let Some(v) = get("workers") {
        options.workers = parse_num("workers", v)?;
    }
    if let Some(v) = get("max_bisection_depth") {
        options.max_bisection_depth = match v {
            "none" => None,
            _ => Some(parse_num("max_bisection_depth", v)?),
        };
    }
    if let Some(v) = get("scaling") {
        options.scaling = boolean("scaling", v)?;
    }
    if let Some(v) = get("recenter") {
        options.recenter = boolean("recenter", v)?;
    }
    if let Some(v) = get("bound_cap") {
        options.bound_cap = parse_num("bound_cap", v)?;
    }
    if !(options.facet_ratio > 0.0 && options.facet_ratio <= 1.0) {
        bail!("facet_ratio must lie in (0, 1]");
    }

    let warm_fans = match get("warm_fans") {
        None => Vec::new(),
        Some(v) => v
            .split_whitespace()
            .map(|pair| {
                let (i, j) = pair.split_once(':').ok_or_else(|| anyhow!("warm_fans: expected i:j, got '{pair}'"))?;
                let (i, j): (usize, usize) = (parse_num("warm_fans", i)?, parse_num("warm_fans", j)?);
                if i >= n || j >= n || i == j {
                    bail!("warm_fans: plane {i}:{j} invalid for n = {n}");
                }
                Ok((i, j))
            })
            .collect::<Result<_>>()?,
    };
    let anchor = match get("anchor") {
        None => None,
        Some(v) => {
            let x = numbers(v)?;
            if x.len() != n {
                bail!("anchor has {} entries, expected {n}", x.len());
            }
            Some(DVector::from_vec(x))
        }
    };

    let canonical = map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    Ok(ProblemConfig {
        problem,
        mode,
        params,
        seed: get("seed").map(|v| parse_num("seed", v)).transpose()?.unwrap_or(0),
        samples: get("samples").map(|v| parse_num("samples", v)).transpose()?.unwrap_or(20),
        algorithm,
        over: get("over").map(|v| boolean("over", v)).transpose()?.unwrap_or(true),
        warm_axes: get("warm_axes").map(|v| boolean("warm_axes", v)).transpose()?.unwrap_or(false),
        warm_fans,
        warm_per_fan: get("warm_per_fan").map(|v| parse_num("warm_per_fan", v)).transpose()?.unwrap_or(12),
        anchor,
        options,
        output: get("output").map(PathBuf::from),
        canonical,
    })
}
