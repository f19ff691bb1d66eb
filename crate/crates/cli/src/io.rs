//! Plain-text result files.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so reading a file back gives
//! bit-identical values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DVector;
use sdviab::{Halfspace, Polytope};

fn row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// One vertex per line.
pub fn format_vertices(vertices: &[DVector<f64>]) -> String {
    let n = vertices.first().map_or(0, |v| v.len());
    let mut out = format!("# vertices n = {n} count = {}\n", vertices.len());
    for v in vertices {
        out.push_str(&row(v.iter().copied()));
        out.push('\n');
    }
    out
}

/// One halfspace `a_1 … a_n b` (meaning `aᵀx <= b`) per line.
pub fn format_halfspaces(rows: &[Halfspace]) -> String {
    let n = rows.first().map_or(0, |h| h.normal.len());
    let mut out = format!("# halfspaces a^T x <= b, n = {n} count = {}\n", rows.len());
    for h in rows {
        out.push_str(&row(h.normal.iter().copied().chain([h.offset])));
        out.push('\n');
    }
    out
}

fn numeric_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let r = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| anyhow!("line {}: not a number: '{t}'", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        if rows.first().is_some_and(|f: &Vec<f64>| f.len() != r.len()) {
            bail!("line {}: expected {} columns, found {}", i + 1, rows[0].len(), r.len());
        }
        rows.push(r);
    }
    Ok(rows)
}

pub fn parse_vertices(text: &str) -> Result<Vec<DVector<f64>>> {
    let rows = numeric_rows(text)?;
    if rows.is_empty() {
        bail!("no vertices");
    }
    Ok(rows.into_iter().map(DVector::from_vec).collect())
}

pub fn parse_halfspaces(text: &str) -> Result<Polytope> {
    let rows = numeric_rows(text)?;
    let n = rows.first().ok_or_else(|| anyhow!("no halfspaces"))?.len().saturating_sub(1);
    if n == 0 {
        bail!("halfspace rows need a normal and an offset");
    }
    let h = rows
        .into_iter()
        .map(|r| Halfspace::new(DVector::from_column_slice(&r[..n]), r[n]))
        .collect::<sdviab::Result<Vec<_>>>()?;
    Ok(Polytope::from_halfspaces(n, h)?)
}

pub fn read_vertices(path: &Path) -> Result<Vec<DVector<f64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_vertices(&text).with_context(|| path.display().to_string())
}

pub fn read_halfspaces(path: &Path) -> Result<Polytope> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_halfspaces(&text).with_context(|| path.display().to_string())
}

/// `key = value` lines in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("bad manifest line '{line}'"))?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }
}
