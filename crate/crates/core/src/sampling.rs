//! Direction generation: uniform and von Mises–Fisher sampling on the unit sphere, plus the
//! guidance heuristics that steer the vMF mean and concentration.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{min_vertex_to_facet, Polytope};

/// Concentration cap of the averaged-opposite heuristic.
pub const KAPPA_CAP: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerMode {
    Uniform,
    GradientHausdorff,
    GradientVolume,
    AvgOpposite,
    PointToPlane,
}

impl SamplerMode {
    pub const ALL: [SamplerMode; 5] = [
        SamplerMode::Uniform,
        SamplerMode::GradientHausdorff,
        SamplerMode::GradientVolume,
        SamplerMode::AvgOpposite,
        SamplerMode::PointToPlane,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerMode::Uniform => "uniform",
            SamplerMode::GradientHausdorff => "gradient_hausdorff",
            SamplerMode::GradientVolume => "gradient_volume",
            SamplerMode::AvgOpposite => "avg_opposite",
            SamplerMode::PointToPlane => "point_to_plane",
        }
    }

    /// Whether the mode consumes an error value after every iteration.
    pub fn is_gradient(self) -> bool {
        matches!(self, SamplerMode::GradientHausdorff | SamplerMode::GradientVolume)
    }

    /// Whether the mode needs the running outer approximation.
    pub fn needs_over_approximation(self) -> bool {
        matches!(
            self,
            SamplerMode::GradientHausdorff | SamplerMode::GradientVolume | SamplerMode::PointToPlane
        )
    }

    /// Calibrated `(ν₀, ν₁, ν₂)` for dimension `n`.
    pub fn default_params(self, n: usize) -> SamplerParams {
        let n = n as f64;
        match self {
            SamplerMode::Uniform => SamplerParams { nu0: 0.0, nu1: 0.0, nu2: 0.0 },
            SamplerMode::GradientHausdorff => SamplerParams { nu0: 1.0, nu1: 1.0, nu2: 1.0 / n },
            SamplerMode::GradientVolume => SamplerParams { nu0: 0.1, nu1: 1.0, nu2: 1.0 / n },
            SamplerMode::AvgOpposite => SamplerParams { nu0: 0.0, nu1: 0.1 / n, nu2: 0.0 },
            SamplerMode::PointToPlane => SamplerParams { nu0: 0.0, nu1: 1.0 / n, nu2: 0.0 },
        }
    }
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sampler mode '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerParams {
    pub nu0: f64,
    pub nu1: f64,
    pub nu2: f64,
}

/// Uniform direction on the unit sphere (normalized Gaussian).
pub fn sample_uniform_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let norm: f64 = g.norm();
        if norm > 1e-300 && norm.is_finite() {
            return g / norm;
        }
    }
}

/// Draws from the vMF density `∝ exp(κ μᵀx)` on the unit sphere (Wood's rejection scheme).
pub fn sample_vmf<R: Rng + ?Sized>(mu: &DVector<f64>, kappa: f64, rng: &mut R) -> Result<DVector<f64>> {
    if kappa < 0.0 || kappa.is_nan() {
        return Err(Error::NegativeConcentration(kappa));
    }
    let n = mu.len();
    if kappa == 0.0 {
        return Ok(sample_uniform_sphere(n, rng));
    }
    let mu = mu.normalize();
    if n == 1 {
        let p_plus = 1.0 / (1.0 + (-2.0 * kappa).exp());
        let sign = if rng.random::<f64>() < p_plus { 1.0 } else { -1.0 };
        return Ok(mu * sign);
    }

    let d = (n - 1) as f64;
    let b = d / (2.0 * kappa + (4.0 * kappa * kappa + d * d).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + d * (1.0 - x0 * x0).ln();
    let beta = Beta::new(d / 2.0, d / 2.0).expect("positive shape parameters");
    let w = loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if kappa * w + d * (1.0 - x0 * w).ln() - c >= u.ln() {
            break w;
        }
    };

    // uniform unit vector orthogonal to mu
    let tangent = loop {
        let g = sample_uniform_sphere(n, rng);
        let t = &g - &mu * mu.dot(&g);
        let norm = t.norm();
        if norm > 1e-8 {
            break t / norm;
        }
    };
    let x = &mu * w + tangent * (1.0 - w * w).max(0.0).sqrt();
    Ok(x.normalize())
}

/// Mean and concentration of the next draw from the error decrease along the last two
/// directions.
///
/// `∇err = (1 − dᵢ/d_prev) / (arccos⟨rᵢ, r_prev⟩/π)` with `0/0 → 0`, `ω = ν₁ tanh(ν₂ ∇err)`,
/// `κ = max(ν₀, ω)` and `μ = sgn(ω − ν₀)·rᵢ` where `sgn(0) = +1`.
pub fn grad_err_update(
    d_i: f64,
    d_prev: f64,
    r_i: &DVector<f64>,
    r_prev: &DVector<f64>,
    params: SamplerParams,
) -> (DVector<f64>, f64) {
    let ratio = if d_prev == 0.0 {
        if d_i == 0.0 {
            1.0
        } else {
            // error appeared from nothing: treat as maximal worsening
            f64::INFINITY
        }
    } else {
        d_i / d_prev
    };
    let numerator = 1.0 - ratio;
    let angle = r_i.dot(r_prev).clamp(-1.0, 1.0).acos() / PI;
    let grad = if numerator == 0.0 {
        0.0
    } else if angle == 0.0 {
        numerator.signum() * f64::INFINITY
    } else {
        numerator / angle
    };
    let omega = params.nu1 * (params.nu2 * grad).tanh();
    let omega = if omega.is_nan() { 0.0 } else { omega };
    let kappa = params.nu0.max(omega);
    let sign = if omega - params.nu0 >= 0.0 { 1.0 } else { -1.0 };
    (r_i * sign, kappa)
}

/// Mean opposite to the resultant of the past directions, concentration `min(ν₁·i, 100)`.
///
/// Returns `None` for the mean when the resultant vanishes (the draw is then uniform).
pub fn avg_opposite_direction(
    history: &[DVector<f64>],
    i: usize,
    nu1: f64,
) -> (Option<DVector<f64>>, f64) {
    let Some(first) = history.first() else {
        return (None, 0.0);
    };
    let mut sum = DVector::zeros(first.len());
    for r in history {
        sum += r;
    }
    let norm = sum.norm();
    if norm <= 1e-12 * history.len() as f64 {
        return (None, 0.0);
    }
    (Some(-sum / norm), (nu1 * i as f64).min(KAPPA_CAP))
}

/// Mean toward the facet foot point nearest the most uncertain under-approximation vertex,
/// concentration `ν₁ · distance`.
pub fn point_to_plane_direction(
    under: &[DVector<f64>],
    over: &Polytope,
    v0: &DVector<f64>,
    nu1: f64,
) -> Result<(Option<DVector<f64>>, f64)> {
    let gap = min_vertex_to_facet(under, over)?;
    if gap.distance <= 0.0 {
        return Ok((None, 0.0));
    }
    let dir = &gap.foot - v0;
    let norm = dir.norm();
    if norm <= 1e-12 {
        return Ok((None, 0.0));
    }
    Ok((Some(dir / norm), (nu1 * gap.distance).max(0.0)))
}

/// Sequential direction generator for the guided algorithms.
#[derive(Debug, Clone)]
pub struct SamplerState {
    mode: SamplerMode,
    n: usize,
    params: SamplerParams,
    mu: Option<DVector<f64>>,
    kappa: f64,
    history: Vec<DVector<f64>>,
    err_history: Vec<f64>,
    queued: VecDeque<DVector<f64>>,
    seed: u64,
    rng: ChaCha8Rng,
    volume_fallback_warned: bool,
}

impl SamplerState {
    /// New sampler with the calibrated parameters for `mode` in dimension `n`.
    pub fn new(mode: SamplerMode, n: usize, seed: u64) -> Self {
        Self::with_params(mode, n, seed, mode.default_params(n))
    }

    pub fn with_params(mode: SamplerMode, n: usize, seed: u64, params: SamplerParams) -> Self {
        Self {
            mode,
            n,
            params,
            mu: None,
            kappa: 0.0,
            history: Vec::new(),
            err_history: Vec::new(),
            queued: VecDeque::new(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            volume_fallback_warned: false,
        }
    }

    pub fn mode(&self) -> SamplerMode {
        self.mode
    }

    pub fn params(&self) -> SamplerParams {
        self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mu(&self) -> Option<&DVector<f64>> {
        self.mu.as_ref()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn history(&self) -> &[DVector<f64>] {
        &self.history
    }

    pub fn err_history(&self) -> &[f64] {
        &self.err_history
    }

    /// Directions handed out before any random draw (warm start).
    pub fn queue(&mut self, directions: impl IntoIterator<Item = DVector<f64>>) {
        for d in directions {
            let norm = d.norm();
            if norm > 0.0 {
                self.queued.push_back(d / norm);
            }
        }
    }

    pub fn queued(&self) -> usize {
        self.queued.len()
    }

    /// Next direction. `under` holds the current vertices, `over` the current outer
    /// approximation and `v0` the current anchor; uniform and averaged-opposite modes ignore them.
    pub fn next_direction(
        &mut self,
        under: &[DVector<f64>],
        over: Option<&Polytope>,
        v0: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let r = if let Some(q) = self.queued.pop_front() {
            q
        } else {
            match self.mode {
                SamplerMode::Uniform => sample_uniform_sphere(self.n, &mut self.rng),
                SamplerMode::GradientHausdorff | SamplerMode::GradientVolume => {
                    self.draw_current()?
                }
                SamplerMode::AvgOpposite => {
                    let (mu, kappa) = avg_opposite_direction(&self.history, self.history.len(), self.params.nu1);
                    self.mu = mu;
                    self.kappa = kappa;
                    self.draw_current()?
                }
                SamplerMode::PointToPlane => {
                    let over = over.ok_or(Error::MissingOverApproximation("point_to_plane"))?;
                    let (mu, kappa) = if over.hrep().is_some_and(|h| !h.is_empty()) && !under.is_empty() {
                        point_to_plane_direction(under, over, v0, self.params.nu1)?
                    } else {
                        (None, 0.0)
                    };
                    self.mu = mu;
                    self.kappa = kappa;
                    self.draw_current()?
                }
            }
        };
        self.history.push(r.clone());
        Ok(r)
    }

    fn draw_current(&mut self) -> Result<DVector<f64>> {
        match &self.mu {
            Some(mu) if self.kappa > 0.0 => sample_vmf(mu, self.kappa, &mut self.rng),
            _ => Ok(sample_uniform_sphere(self.n, &mut self.rng)),
        }
    }

    /// Records the approximation error after the latest direction; gradient modes update their
    /// vMF parameters from it.
    pub fn record_error(&mut self, err: f64) {
        if self.mode.is_gradient() && self.history.len() >= 2 {
            if let Some(&prev) = self.err_history.last() {
                let r_i = &self.history[self.history.len() - 1];
                let r_prev = &self.history[self.history.len() - 2];
                let (mu, kappa) = grad_err_update(err, prev, r_i, r_prev, self.params);
                self.mu = Some(mu);
                self.kappa = kappa;
            }
        }
        self.err_history.push(err);
    }

    /// Forgets the latest direction (its ray produced no vertex), so gradient updates pair
    /// errors with the directions that actually moved the approximation.
    pub fn discard_last(&mut self) {
        self.history.pop();
    }

    /// Logs (once) that the volume heuristic is running on its fallback metric.
    pub fn warn_volume_fallback(&mut self, why: &str) {
        if !self.volume_fallback_warned {
            log::warn!("gradient_volume: {why}; using the Hausdorff error instead");
            self.volume_fallback_warned = true;
        }
    }
}

/// `count` uniform directions from a fixed seed, for parallel consumption.
pub fn uniform_stream(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_uniform_sphere(n, &mut rng)).collect()
}
