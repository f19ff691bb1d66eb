//! Truncated-Taylor discretization of the sampled-data plant and certified bounds on
//! what the truncation loses.
//!
//! With `A_ζδ = Σ_{i≤ζ} (Aδ)^i/i!` and `B_ζδ = (Σ_{i≤ζ} A^i δ^{i+1}/(i+1)!) B`, the nominal
//! model `x̂ₖ₊₁ = A_ζδ x̂ₖ + B_ζδ uₖ` tracks the true sampled state to within
//! `γ̃ₖ = αₖ‖x₀‖∞ + βₖ` for every admissible input sequence.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::problem::{inf_norm, SampledDataProblem};

/// Default cap on `αₖ`, `βₖ` before [`Error::BoundBlowup`] is raised.
pub const DEFAULT_BOUND_CAP: f64 = 1e6;

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

/// `Σ_{i=0}^{ζ} (As)^i / i!`, by Horner accumulation.
pub fn truncated_exponential(a: &DMatrix<f64>, s: f64, zeta: usize) -> Result<DMatrix<f64>> {
    check_square(a)?;
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let as_ = a * s;
    let mut r = id.clone();
    for i in (1..=zeta).rev() {
        r = &id + &as_ * r / i as f64;
    }
    Ok(r)
}

/// `Σ_{i=0}^{ζ} A^i δ^{i+1}/(i+1)!`, the truncated integral of `e^{Aλ}` over `[0, δ]`.
pub fn integrated_series(a: &DMatrix<f64>, delta: f64, zeta: usize) -> Result<DMatrix<f64>> {
    check_square(a)?;
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let ad = a * delta;
    let mut r = id.clone();
    for i in (1..=zeta).rev() {
        r = &id + &ad * r / (i + 1) as f64;
    }
    Ok(r * delta)
}

/// `B_ζδ`.
pub fn input_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, delta: f64, zeta: usize) -> Result<DMatrix<f64>> {
    check_square(a)?;
    if b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "B has {} rows, A is {}x{}",
            b.nrows(),
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(integrated_series(a, delta, zeta)? * b)
}

fn order_ratio(a: &DMatrix<f64>, delta: f64, zeta: usize) -> Result<f64> {
    check_square(a)?;
    let ratio = inf_norm(a) * delta / (zeta as f64 + 2.0);
    if ratio >= 1.0 {
        return Err(Error::OrderTooLow { ratio });
    }
    Ok(ratio)
}

/// `ψ_δ = (‖A‖∞δ)^{ζ+1}/(ζ+1)! · 1/(1 − ε)` with `ε = ‖A‖∞δ/(ζ+2)`; bounds `‖e^{Aδ} − A_ζδ‖∞`.
pub fn psi_delta(a: &DMatrix<f64>, delta: f64, zeta: usize) -> Result<f64> {
    let ratio = order_ratio(a, delta, zeta)?;
    let x = inf_norm(a) * delta;
    let mut term = 1.0;
    for i in 1..=(zeta + 1) {
        term *= x / i as f64;
    }
    Ok(term / (1.0 - ratio))
}

/// `ψ_δ·δ/(ζ+2)`; bounds `‖∫₀^δ (e^{Aλ} − A_ζλ) dλ‖∞`.
pub fn integral_error_bound(a: &DMatrix<f64>, delta: f64, zeta: usize) -> Result<f64> {
    Ok(psi_delta(a, delta, zeta)? * delta / (zeta as f64 + 2.0))
}

/// `max_{u∈U} ‖Bu‖∞`, one pair of support evaluations per row of `B`.
pub fn sup_bu_norm(b: &DMatrix<f64>, u: &Polytope) -> Result<f64> {
    if b.ncols() != u.dim() {
        return Err(Error::DimensionMismatch(format!(
            "B has {} columns, U lives in dimension {}",
            b.ncols(),
            u.dim()
        )));
    }
    let boxed = u.as_box();
    let mut best: f64 = 0.0;
    for row in b.row_iter() {
        if row.iter().all(|v| *v == 0.0) {
            continue;
        }
        let l = DVector::from_iterator(row.len(), row.iter().copied());
        for sign in [1.0, -1.0] {
            let dir = &l * sign;
            let value = match &boxed {
                Some((lo, hi)) => dir
                    .iter()
                    .enumerate()
                    .map(|(j, c)| if *c >= 0.0 { c * hi[j] } else { c * lo[j] })
                    .sum(),
                None => u.support_function(&dir)?.0,
            };
            best = best.max(value);
        }
    }
    Ok(best)
}

/// Coefficients of `γ̃ₖ = αₖ‖x₀‖∞ + βₖ`, `k = 1..=steps`.
///
/// `alpha[k-1]`, `beta[k-1]` hold step `k`; step 0 is exact (`γ̃₀ = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct GammaCoefficients {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl GammaCoefficients {
    /// `γ̃ₖ` for a given `‖x₀‖∞`; `k = 0` gives 0.
    pub fn gamma(&self, k: usize, x0_norm: f64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.alpha[k - 1] * x0_norm + self.beta[k - 1]
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.alpha.iter().copied().zip(self.beta.iter().copied())
    }
}

/// Discretization error coefficients for `steps` sampling intervals.
///
/// Uses the norms of the explicit powers `A_ζδ^l` rather than `‖A_ζδ‖^l`. Both sequences are
/// made nondecreasing by a running maximum, which only loosens the bound.
pub fn gamma_coefficients(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    u: &Polytope,
    delta: f64,
    zeta: usize,
    steps: usize,
    cap: f64,
) -> Result<GammaCoefficients> {
    let psi = psi_delta(a, delta, zeta)?;
    let psi_int = psi * delta / (zeta as f64 + 2.0);
    let a_zd = truncated_exponential(a, delta, zeta)?;
    let q = inf_norm(&integrated_series(a, delta, zeta)?);
    let s = sup_bu_norm(b, u)?;

    // p[l] = ‖A_ζδ^l‖∞ for l = 0..steps-1
    let mut p = Vec::with_capacity(steps);
    let mut power = DMatrix::<f64>::identity(a.nrows(), a.nrows());
    for _ in 0..steps {
        p.push(inf_norm(&power));
        power = &a_zd * power;
    }

    let mut raw_alpha = vec![0.0; steps + 1];
    for k in 1..=steps {
        let mut binom = 1.0;
        let mut sum = 0.0;
        for (l, pl) in p.iter().enumerate().take(k) {
            sum += binom * pl * psi.powi((k - l) as i32);
            binom *= (k - l) as f64 / (l + 1) as f64;
        }
        raw_alpha[k] = sum;
    }

    let mut alpha = Vec::with_capacity(steps);
    let mut beta = Vec::with_capacity(steps);
    let mut running_alpha: f64 = 0.0;
    let mut input_sum = 0.0;
    for k in 1..=steps {
        // input u_{k-1-i} has been propagated i steps; i = k-1 is the newest term of the sum
        let i = k - 1;
        input_sum += raw_alpha[i] * q + (raw_alpha[i] + p[i]) * psi_int;
        running_alpha = running_alpha.max(raw_alpha[k]);
        let bk = s * input_sum;
        if !running_alpha.is_finite() || running_alpha > cap {
            return Err(Error::BoundBlowup {
                step: k,
                value: running_alpha,
            });
        }
        if !bk.is_finite() || bk > cap {
            return Err(Error::BoundBlowup { step: k, value: bk });
        }
        alpha.push(running_alpha);
        beta.push(bk);
    }
    Ok(GammaCoefficients { alpha, beta })
}

/// Stacked prediction `[x̂₀; …; x̂_N] = G x₀ + H u` of the nominal model.
pub fn prediction_matrices(
    a_zd: &DMatrix<f64>,
    b_zd: &DMatrix<f64>,
    steps: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_square(a_zd)?;
    if steps == 0 {
        return Err(Error::InvalidProblem("prediction needs at least one step".into()));
    }
    if b_zd.nrows() != a_zd.nrows() {
        return Err(Error::DimensionMismatch("B_zd rows".into()));
    }
    let (n, m) = (a_zd.nrows(), b_zd.ncols());
    let powers = matrix_powers(a_zd, steps);
    let mut g = DMatrix::zeros((steps + 1) * n, n);
    let mut h = DMatrix::zeros((steps + 1) * n, steps * m);
    for k in 0..=steps {
        g.view_mut((k * n, 0), (n, n)).copy_from(&powers[k]);
        for j in 0..k {
            let block = &powers[k - 1 - j] * b_zd;
            h.view_mut((k * n, j * m), (n, m)).copy_from(&block);
        }
    }
    Ok((g, h))
}

/// `[I, M, M², …, M^steps]`.
pub fn matrix_powers(m: &DMatrix<f64>, steps: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(DMatrix::identity(m.nrows(), m.ncols()));
    for k in 1..=steps {
        let next = m * &out[k - 1];
        out.push(next);
    }
    out
}

/// Everything the feasibility programs need for one problem, in the coordinates the problem
/// is stated in (the kernel passes the scaled problem).
#[derive(Debug, Clone)]
pub struct DiscretizationBundle {
    pub a_zd: DMatrix<f64>,
    pub b_zd: DMatrix<f64>,
    pub psi: f64,
    pub gamma: GammaCoefficients,
    pub sup_bu: f64,
    /// `(N_δ+1)n × n`.
    pub g: DMatrix<f64>,
    /// `(N_δ+1)n × N_δ m`.
    pub h: DMatrix<f64>,
    /// Vector-field bound used for the inter-sample erosion.
    pub m_bound: f64,
    /// `K ⊖ B∞(Mδ)`.
    pub k_down: Polytope,
    /// `K ⊖ B∞(Mδ + βₖ)` for `k = 0..=N_δ`; the `αₖ‖x₀‖∞` part is applied per query.
    pub eroded_sets: Vec<Polytope>,
    pub steps: usize,
}

impl DiscretizationBundle {
    /// Builds the bundle and checks that every eroded set is nonempty at `x₀ = 0`.
    pub fn new(problem: &SampledDataProblem, m_bound: f64, cap: f64) -> Result<Self> {
        problem.validate()?;
        let (a, b) = (problem.system.a(), problem.system.b());
        let (delta, zeta, steps) = (problem.delta, problem.zeta, problem.steps());
        let a_zd = truncated_exponential(a, delta, zeta)?;
        let b_zd = input_matrix(a, b, delta, zeta)?;
        let psi = psi_delta(a, delta, zeta)?;
        let gamma = gamma_coefficients(a, b, &problem.u, delta, zeta, steps, cap)?;
        let sup_bu = sup_bu_norm(b, &problem.u)?;
        let (g, h) = prediction_matrices(&a_zd, &b_zd, steps)?;

        let k_down = problem
            .k
            .erode_by_inf_ball(m_bound * delta)
            .map_err(|e| match e {
                Error::EmptyErosion { .. } => Error::EmptyErosion { step: Some(0) },
                other => other,
            })?;
        let mut eroded_sets = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            eroded_sets.push(k_down.eroded_unchecked(gamma.gamma(k, 0.0))?);
        }
        // βₖ is nondecreasing, so the last set is the smallest.
        if let Err(Error::EmptyErosion { .. }) = problem.k.erode_by_inf_ball(m_bound * delta + gamma.gamma(steps, 0.0)) {
            let first = (1..=steps)
                .find(|&k| problem.k.erode_by_inf_ball(m_bound * delta + gamma.gamma(k, 0.0)).is_err())
                .unwrap_or(steps);
            return Err(Error::EmptyErosion { step: Some(first) });
        }

        Ok(Self {
            a_zd,
            b_zd,
            psi,
            gamma,
            sup_bu,
            g,
            h,
            m_bound,
            k_down,
            eroded_sets,
            steps,
        })
    }

    pub fn n(&self) -> usize {
        self.a_zd.nrows()
    }

    pub fn m(&self) -> usize {
        self.b_zd.ncols()
    }

    /// `Kᵏ↓` instantiated for a particular `‖x₀‖∞`.
    pub fn eroded_set(&self, k: usize, x0_norm: f64) -> Result<Polytope> {
        let extra = if k == 0 { 0.0 } else { self.gamma.alpha[k - 1] * x0_norm };
        self.eroded_sets[k].eroded_unchecked(extra)
    }

    /// Block `k` of `G`, i.e. `A_ζδ^k`.
    pub fn g_block(&self, k: usize) -> nalgebra::DMatrixView<'_, f64> {
        let n = self.n();
        self.g.view((k * n, 0), (n, n))
    }

    /// Block row `k` of `H` restricted to the first `k` inputs.
    pub fn h_row(&self, k: usize) -> nalgebra::DMatrixView<'_, f64> {
        let (n, m) = (self.n(), self.m());
        self.h.view((k * n, 0), (n, k * m))
    }

    /// Nominal states `x̂₀ … x̂_N` for a stacked input.
    pub fn predict(&self, x0: &DVector<f64>, u: &DVector<f64>) -> Vec<DVector<f64>> {
        let stacked = &self.g * x0 + &self.h * u;
        let n = self.n();
        (0..=self.steps)
            .map(|k| stacked.rows(k * n, n).into_owned())
            .collect()
    }
}
