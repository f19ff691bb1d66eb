//! Khachiyan's algorithm for the minimum-volume enclosing ellipsoid.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `{x | (x − center)ᵀ shape (x − center) <= 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
}

impl Ellipsoid {
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        let d = x - &self.center;
        (d.transpose() * &self.shape * &d)[(0, 0)] <= 1.0 + tol
    }

    /// Volume, `unit_ball_volume(n) / sqrt(det shape)`.
    pub fn volume(&self) -> f64 {
        let n = self.center.len();
        unit_ball_volume(n) / self.shape.determinant().sqrt()
    }

    /// Same center, every semi-axis divided by `factor`.
    pub fn shrunk(&self, factor: f64) -> Ellipsoid {
        Ellipsoid {
            center: self.center.clone(),
            shape: &self.shape * (factor * factor),
        }
    }
}

/// Volume of the unit 2-norm ball in dimension `n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    // V_n = V_{n−2} · 2π/n
    let (mut v, start) = if n % 2 == 0 { (1.0, 2) } else { (2.0, 3) };
    let mut k = start;
    while k <= n {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// Ellipsoid containing `points` whose volume is within a `(1 + tol)`-type factor of the minimum.
///
/// Shrinking the result by `n` ([`Ellipsoid::shrunk`]) gives an ellipsoid inside the hull.
pub fn mvce_khachiyan(points: &[DVector<f64>], tol: f64) -> Result<Ellipsoid> {
    let n = points.first().ok_or(Error::Empty("point list"))?.len();
    let m = points.len();
    if m < n + 1 {
        return Err(Error::Degenerate(format!("{m} points cannot span dimension {n}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidProblem("ellipsoid tolerance must be positive".into()));
    }
    let p = DMatrix::from_fn(n, m, |i, j| points[j][i]);
    let mut q = DMatrix::from_element(n + 1, m, 1.0);
    q.view_mut((0, 0), (n, m)).copy_from(&p);

    let d = (n + 1) as f64;
    let mut u = DVector::from_element(m, 1.0 / m as f64);
    for _ in 0..100_000 {
        let x = &q * DMatrix::from_diagonal(&u) * q.transpose();
        let x_inv = x
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("points are affinely dependent".into()))?;
        let mut j_max = 0;
        let mut m_max = f64::NEG_INFINITY;
        for j in 0..m {
            let qj = q.column(j);
            let mj = (qj.transpose() * &x_inv * qj)[(0, 0)];
            if mj > m_max {
                m_max = mj;
                j_max = j;
            }
        }
        if m_max <= d * (1.0 + tol) {
            break;
        }
        let step = (m_max - d) / (d * (m_max - 1.0));
        u *= 1.0 - step;
        u[j_max] += step;
    }

    let center = &p * &u;
    let cov = &p * DMatrix::from_diagonal(&u) * p.transpose() - &center * center.transpose();
    let shape = cov
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("points are affinely dependent".into()))?
        / n as f64;
    // Inflate so every point is covered exactly, not just to within the tolerance.
    let worst = points
        .iter()
        .map(|p| {
            let d = p - &center;
            (d.transpose() * &shape * d)[(0, 0)]
        })
        .fold(1.0, f64::max);
    Ok(Ellipsoid {
        center,
        shape: shape / worst,
    })
}
