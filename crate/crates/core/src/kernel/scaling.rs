//! Diagonal state-space scaling that equalizes the ranges of the vector field, and the
//! vector-field bound `M` used for the inter-sample erosion.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{Halfspace, Polytope};
use crate::problem::{LtiSystem, SampledDataProblem};

/// `x' = D⁻¹x` with `D = diag(factors)`, the scaled problem and `M` in scaled coordinates.
#[derive(Debug, Clone)]
pub struct ScalingTransform {
    pub factors: DVector<f64>,
    pub scaled: SampledDataProblem,
    pub m_bound: f64,
}

impl ScalingTransform {
    /// No scaling; only `M` is computed.
    pub fn identity(problem: &SampledDataProblem) -> Result<Self> {
        let factors = DVector::from_element(problem.n(), 1.0);
        let m_bound = field_bound(problem)?;
        Ok(Self {
            factors,
            scaled: problem.clone(),
            m_bound,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.factors.iter().all(|f| *f == 1.0)
    }

    pub fn to_scaled(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_div(&self.factors)
    }

    pub fn to_original(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.factors)
    }

    /// `rᵀx' <= c` in scaled coordinates, rewritten with a unit normal in original coordinates.
    pub fn halfspace_to_original(&self, normal: &DVector<f64>, offset: f64) -> Result<Halfspace> {
        let a = normal.component_div(&self.factors);
        let s = a.norm();
        Halfspace::new(a / s, offset / s)
    }
}

/// `max ±(Ax + Bu)_d` over `K × U` for every row `d`: returns `(upper, lower)` per row, with
/// `lower` already negated back (so the range is `upper − lower`).
fn field_extremes(problem: &SampledDataProblem) -> Result<Vec<(f64, f64)>> {
    let (a, b) = (problem.system.a(), problem.system.b());
    let mut out = Vec::with_capacity(problem.n());
    for d in 0..problem.n() {
        let ad = DVector::from_iterator(a.ncols(), a.row(d).iter().copied());
        let bd = DVector::from_iterator(b.ncols(), b.row(d).iter().copied());
        let support = |set: &Polytope, l: &DVector<f64>| -> Result<f64> {
            if l.iter().all(|v| *v == 0.0) {
                return Ok(0.0);
            }
            Ok(set.support_function(l)?.0)
        };
        let hi = support(&problem.k, &ad)? + support(&problem.u, &bd)?;
        let lo = -(support(&problem.k, &-&ad)? + support(&problem.u, &-&bd)?);
        out.push((hi, lo));
    }
    Ok(out)
}

/// `M = max_d max |(Ax + Bu)_d|` over `K × U`.
pub fn field_bound(problem: &SampledDataProblem) -> Result<f64> {
    Ok(field_extremes(problem)?
        .into_iter()
        .map(|(hi, lo)| hi.max(-lo))
        .fold(0.0, f64::max))
}

/// Scales each state coordinate by its vector-field range relative to the smallest nonzero range,
/// then computes `M` for the scaled problem.
pub fn scale_and_bound(problem: &SampledDataProblem) -> Result<ScalingTransform> {
    let ranges: Vec<f64> = field_extremes(problem)?
        .into_iter()
        .map(|(hi, lo)| (hi - lo).max(0.0))
        .collect();
    let min_positive = ranges.iter().copied().filter(|r| *r > 0.0).fold(f64::INFINITY, f64::min);
    let factors = DVector::from_iterator(
        ranges.len(),
        ranges.iter().enumerate().map(|(d, r)| {
            if *r > 0.0 {
                r / min_positive
            } else {
                log::warn!("state {d} has no vector-field range over K x U; leaving it unscaled");
                1.0
            }
        }),
    );

    let n = problem.n();
    let d = DMatrix::from_diagonal(&factors);
    let d_inv = DMatrix::from_diagonal(&factors.map(|f| 1.0 / f));
    let a = &d_inv * problem.system.a() * &d;
    let b = &d_inv * problem.system.b();
    let system = LtiSystem::new(a, b)?;
    let scaled = SampledDataProblem {
        system,
        k: problem.k.rescaled(&factors),
        u: problem.u.clone(),
        ..problem.clone()
    };
    if scaled.k.dim() != n {
        return Err(Error::DimensionMismatch("scaled constraint set".into()));
    }
    let m_bound = field_bound(&scaled)?;
    Ok(ScalingTransform {
        factors,
        scaled,
        m_bound,
    })
}
