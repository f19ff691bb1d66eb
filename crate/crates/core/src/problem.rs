//! Problem data: the plant, the constraint sets and the discretization parameters.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::Polytope;

/// Continuous-time plant `ẋ = Ax + Bu`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::NonSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if a.nrows() == 0 || b.ncols() == 0 {
            return Err(Error::InvalidProblem("state and input dimensions must be at least 1".into()));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows, A is {}x{}",
                b.nrows(),
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("system matrices contain non-finite entries".into()));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }
}

/// One finite-horizon sampled-data kernel computation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDataProblem {
    pub system: LtiSystem,
    /// State constraint set `K` (H-rep).
    pub k: Polytope,
    /// Input constraint set `U` (H-rep).
    pub u: Polytope,
    /// Sampling interval in seconds.
    pub delta: f64,
    /// Horizon in seconds.
    pub tau: f64,
    /// Taylor truncation order.
    pub zeta: usize,
    /// Accuracy of the vertex bisection.
    pub epsilon: f64,
    /// Accuracy of the facet bisection.
    pub epsilon_o: f64,
}

impl SampledDataProblem {
    /// Validates everything that can be checked without solving an LP.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        system: LtiSystem,
        k: Polytope,
        u: Polytope,
        delta: f64,
        tau: f64,
        zeta: usize,
        epsilon: f64,
        epsilon_o: f64,
    ) -> Result<Self> {
        let p = Self {
            system,
            k,
            u,
            delta,
            tau,
            zeta,
            epsilon,
            epsilon_o,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return bad(format!("sampling interval must be positive, got {}", self.delta));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return bad(format!("horizon must be positive, got {}", self.tau));
        }
        if self.zeta < 1 {
            return bad("discretization order must be at least 1".into());
        }
        if !(self.epsilon > 0.0) || !(self.epsilon_o > 0.0) {
            return bad("bisection accuracies must be positive".into());
        }
        if self.k.dim() != self.system.n() {
            return Err(Error::DimensionMismatch(format!(
                "K lives in dimension {}, system state in {}",
                self.k.dim(),
                self.system.n()
            )));
        }
        if self.u.dim() != self.system.m() {
            return Err(Error::DimensionMismatch(format!(
                "U lives in dimension {}, system input in {}",
                self.u.dim(),
                self.system.m()
            )));
        }
        self.k.require_hrep()?;
        self.u.require_hrep()?;
        let ratio = inf_norm(self.system.a()) * self.delta / (self.zeta as f64 + 2.0);
        if ratio >= 1.0 {
            return Err(Error::OrderTooLow { ratio });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.system.n()
    }

    pub fn m(&self) -> usize {
        self.system.m()
    }

    /// `N_δ = ⌈τ/δ⌉`, guarded against round-off just above an integer.
    pub fn steps(&self) -> usize {
        let r = self.tau / self.delta;
        let nearest = r.round();
        let steps = if (r - nearest).abs() <= 1e-9 * r.max(1.0) {
            nearest
        } else {
            r.ceil()
        };
        (steps as usize).max(1)
    }
}

/// Induced ∞-norm (maximum absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn di() -> LtiSystem {
        LtiSystem::new(dmatrix![0.0, 1.0; 0.0, 0.0], dmatrix![0.0; 1.0]).unwrap()
    }

    #[test]
    fn system_shape_checks() {
        assert!(matches!(
            LtiSystem::new(DMatrix::zeros(2, 3), DMatrix::zeros(2, 1)),
            Err(Error::NonSquare { .. })
        ));
        assert!(matches!(
            LtiSystem::new(DMatrix::zeros(2, 2), DMatrix::zeros(3, 1)),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(LtiSystem::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 0)).is_err());
    }

    #[test]
    fn problem_validation() {
        let k = Polytope::inf_ball(2, 0.5).unwrap();
        let u = Polytope::inf_ball(1, 0.15).unwrap();
        let p = SampledDataProblem::new(di(), k.clone(), u.clone(), 0.05, 1.0, 4, 0.01, 0.01).unwrap();
        assert_eq!(p.steps(), 20);
        assert!(SampledDataProblem::new(di(), k.clone(), u.clone(), 0.0, 1.0, 4, 0.01, 0.01).is_err());
        assert!(SampledDataProblem::new(di(), k.clone(), u.clone(), -0.1, 1.0, 4, 0.01, 0.01).is_err());
        assert!(SampledDataProblem::new(di(), k.clone(), u.clone(), 0.05, 1.0, 4, 0.0, 0.01).is_err());
        let fast = LtiSystem::new(DMatrix::identity(2, 2) * 100.0, dmatrix![0.0; 1.0]).unwrap();
        assert!(matches!(
            SampledDataProblem::new(fast, k, u, 0.1, 1.0, 4, 0.01, 0.01),
            Err(Error::OrderTooLow { .. })
        ));
    }

    #[test]
    fn step_count_rounding() {
        let k = Polytope::inf_ball(2, 0.5).unwrap();
        let u = Polytope::inf_ball(1, 0.15).unwrap();
        let mut p = SampledDataProblem::new(di(), k, u, 0.1, 2.0, 4, 0.01, 0.01).unwrap();
        assert_eq!(p.steps(), 20);
        p.tau = 0.25;
        assert_eq!(p.steps(), 3);
        p.tau = 0.01;
        assert_eq!(p.steps(), 1);
    }
}
