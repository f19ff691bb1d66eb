//! Reference computations for testing: a high-accuracy matrix exponential, the exactly
//! discretized (but un-eroded) feasibility program, and 2D grid sweeps that bracket the kernel.
//!
//! Nothing here shares code with the truncated model in [`crate::discretization`].

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::lp::{Cmp, LinearProgram, LpOutcome};
use crate::problem::SampledDataProblem;

/// Slack allowed when forward-simulating an oracle LP solution.
const SIM_TOL: f64 = 1e-7;

/// `e^{A t}` by scaling and squaring around a Taylor series whose tail is below `1e-17`
/// relative to the scaled argument.
pub fn expm_oracle(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let n = a.nrows();
    let x = a * t;
    let norm = x.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    if !norm.is_finite() {
        return Err(Error::InvalidProblem("matrix exponential of a non-finite matrix".into()));
    }
    let mut squarings = 0u32;
    let mut scaled_norm = norm;
    while scaled_norm > 0.5 {
        scaled_norm *= 0.5;
        squarings += 1;
    }
    let y = x / 2f64.powi(squarings as i32);
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    let mut term_bound = 1.0;
    for k in 1..60 {
        term = &term * &y / k as f64;
        sum += &term;
        term_bound *= scaled_norm / k as f64;
        // geometric tail bound for ‖y‖ <= 1/2
        if term_bound * scaled_norm / (k as f64 + 1.0) * 2.0 < 1e-17 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

/// Exact zero-order-hold model `x⁺ = Φx + Γu` from the exponential of `[[A, B], [0, 0]]δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDiscretization {
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
}

pub fn exact_discretization(a: &DMatrix<f64>, b: &DMatrix<f64>, delta: f64) -> Result<ExactDiscretization> {
    let (n, m) = (a.nrows(), b.ncols());
    if b.nrows() != n {
        return Err(Error::DimensionMismatch("B rows must match A".into()));
    }
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, m)).copy_from(b);
    let e = expm_oracle(&aug, delta)?;
    Ok(ExactDiscretization {
        phi: e.view((0, 0), (n, n)).into_owned(),
        gamma: e.view((0, n), (n, m)).into_owned(),
    })
}

/// State trajectory `x₀ … x_N` of the exact model under a stacked input sequence.
pub fn simulate(model: &ExactDiscretization, x0: &DVector<f64>, u: &DVector<f64>) -> Vec<DVector<f64>> {
    let m = model.gamma.ncols();
    let steps = u.len().checked_div(m).unwrap_or(0);
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    out.push(x.clone());
    for k in 0..steps {
        let uk = u.rows(k * m, m);
        x = &model.phi * &x + &model.gamma * uk;
        out.push(x.clone());
    }
    out
}

/// Whether some admissible input sequence keeps the exactly discretized trajectory from `x0` in
/// `K` at every sampling instant `0 … N_δ`. No erosion, so `false` proves `x0` is outside the
/// kernel. Solver failures are errors, never silent passes.
pub fn exact_feasible_unreoded(x0: &DVector<f64>, problem: &SampledDataProblem) -> Result<bool> {
    let model = exact_discretization(problem.system.a(), problem.system.b(), problem.delta)?;
    exact_feasible_with(&model, x0, problem)
}

/// [`exact_feasible_unreoded`] with a precomputed model.
pub fn exact_feasible_with(model: &ExactDiscretization, x0: &DVector<f64>, problem: &SampledDataProblem) -> Result<bool> {
    let (n, m, steps) = (problem.n(), problem.m(), problem.steps());
    if x0.len() != n {
        return Err(Error::DimensionMismatch("oracle query point".into()));
    }
    let k_rows = problem.k.require_hrep()?;
    let u_rows = problem.u.require_hrep()?;
    if k_rows.iter().any(|h| h.slack(x0) < -SIM_TOL) {
        return Ok(false);
    }
    let mut lp = LinearProgram::new(steps * m);
    for j in 0..steps * m {
        lp.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY);
    }
    for j in 0..steps {
        for h in u_rows {
            lp.add_row_at(j * m, h.normal.as_slice(), Cmp::Le, h.offset);
        }
    }
    // x_k = Φ^k x0 + Σ_{j<k} Φ^{k−1−j} Γ u_j
    let mut phi_k = DMatrix::identity(n, n);
    let mut input_blocks: Vec<DMatrix<f64>> = Vec::with_capacity(steps);
    for _ in 1..=steps {
        for blk in input_blocks.iter_mut() {
            *blk = &model.phi * &*blk;
        }
        input_blocks.push(model.gamma.clone());
        phi_k = &model.phi * &phi_k;
        let free = &phi_k * x0;
        for h in k_rows {
            let mut coeffs = vec![0.0; steps * m];
            for (j, blk) in input_blocks.iter().enumerate() {
                let c = blk.transpose() * &h.normal;
                coeffs[j * m..(j + 1) * m].copy_from_slice(c.as_slice());
            }
            lp.add_row(&coeffs, Cmp::Le, h.offset - h.normal.dot(&free));
        }
    }
    match lp.solve() {
        LpOutcome::Solved { x, .. } => {
            let u = DVector::from_vec(x);
            let traj = simulate(model, x0, &u);
            let inside = traj.iter().all(|xk| k_rows.iter().all(|h| h.slack(xk) >= -SIM_TOL));
            let admissible = (0..steps).all(|j| {
                let uj = u.rows(j * m, m).into_owned();
                u_rows.iter().all(|h| h.slack(&uj) >= -SIM_TOL)
            });
            if inside && admissible {
                Ok(true)
            } else {
                Err(Error::LpNumericalFailure("oracle solution fails forward simulation".into()))
            }
        }
        LpOutcome::Infeasible => Ok(false),
        LpOutcome::Unbounded => Ok(true),
        LpOutcome::Failed(why) => Err(Error::LpNumericalFailure(format!("oracle LP failed: {why}"))),
    }
}

/// One grid cell, classified at its center.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub center: [f64; 2],
    /// Exact un-eroded program feasible: the cell center may lie in the kernel.
    pub outer: bool,
    /// Also feasible for the eroded program: the center is certified to lie in the kernel.
    pub inner: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridBracket {
    pub h: f64,
    pub cells: Vec<GridCell>,
}

impl GridBracket {
    pub fn outer_area(&self) -> f64 {
        self.cells.iter().filter(|c| c.outer).count() as f64 * self.h * self.h
    }

    pub fn inner_area(&self) -> f64 {
        self.cells.iter().filter(|c| c.inner).count() as f64 * self.h * self.h
    }
}

/// Sweeps the bounding box of `K` with square cells of side `h` (original coordinates) and
/// classifies every cell center.
pub fn grid_bracket_2d(kernel: &Kernel, h: f64) -> Result<GridBracket> {
    let problem = kernel.problem();
    if problem.n() != 2 {
        return Err(Error::DimensionMismatch("grid bracket needs n = 2".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidProblem("grid spacing must be positive".into()));
    }
    let scale = kernel.transform().factors.min();
    let m_delta = kernel.transform().m_bound * problem.delta * scale;
    if h * std::f64::consts::SQRT_2 > m_delta {
        log::warn!("grid cells (diameter {:.3e}) are coarser than M·δ = {m_delta:.3e}", h * std::f64::consts::SQRT_2);
    }
    let mut lo = [0.0; 2];
    let mut hi = [0.0; 2];
    for i in 0..2 {
        let mut e = DVector::zeros(2);
        e[i] = 1.0;
        hi[i] = problem.k.support_function(&e)?.0;
        lo[i] = -problem.k.support_function(&-e)?.0;
    }
    let nx = ((hi[0] - lo[0]) / h).round().max(1.0) as usize;
    let ny = ((hi[1] - lo[1]) / h).round().max(1.0) as usize;
    let model = exact_discretization(problem.system.a(), problem.system.b(), problem.delta)?;
    let cells: Result<Vec<GridCell>> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % nx, idx / nx);
            let center = [lo[0] + (i as f64 + 0.5) * h, lo[1] + (j as f64 + 0.5) * h];
            let x = DVector::from_row_slice(&center);
            if !problem.k.contains(&x, 0.0) {
                return Ok(GridCell {
                    center,
                    outer: false,
                    inner: false,
                });
            }
            let outer = exact_feasible_with(&model, &x, problem)?;
            let inner = outer && kernel.feasible(&x)?.feasible;
            Ok(GridCell { center, outer, inner })
        })
        .collect();
    Ok(GridBracket { h, cells: cells? })
}
