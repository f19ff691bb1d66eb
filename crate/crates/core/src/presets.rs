//! Benchmark problems.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::geometry::{Halfspace, Polytope};
use crate::kernel::warm_start_directions;
use crate::problem::{LtiSystem, SampledDataProblem};

/// Gravitational acceleration used by the quadrotor model.
pub const GRAVITY: f64 = 9.81;

/// `ẍ = u` on `‖x‖∞ <= 0.5`, `|u| <= 0.15`, δ = 0.05, τ = 1, ζ = 4, ε = ε_o = 0.01.
pub fn double_integrator() -> Result<SampledDataProblem> {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    SampledDataProblem::new(
        LtiSystem::new(a, b)?,
        Polytope::inf_ball(2, 0.5)?,
        Polytope::inf_ball(1, 0.15)?,
        0.05,
        1.0,
        4,
        0.01,
        0.01,
    )
}

/// Chain of `n` integrators driven by one input: `ẋᵢ = xᵢ₊₁`, `ẋₙ = u`, on the unit box with
/// `|u| <= 1`, δ = 0.1, τ = 1, ζ = 4, ε = ε_o = 0.01.
pub fn integrator_chain(n: usize) -> Result<SampledDataProblem> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    let mut b = DMatrix::zeros(n, 1);
    if n > 0 {
        b[(n - 1, 0)] = 1.0;
    }
    SampledDataProblem::new(
        LtiSystem::new(a, b)?,
        Polytope::inf_ball(n.max(1), 1.0)?,
        Polytope::inf_ball(1, 1.0)?,
        0.1,
        1.0,
        4,
        0.01,
        0.01,
    )
}

/// Hover linearization of a quadrotor.
///
/// State `(x, y, z, ẋ, ẏ, ż, φ, θ, ψ, p, q, r)`, input `(thrust deviation, three torques)`
/// with unit mass and inertia: `ẍ = gθ`, `ÿ = −gφ`, `z̈ = u₁`, `φ̈ = u₂`, `θ̈ = u₃`, `ψ̈ = u₄`.
pub fn quadrotor_system() -> Result<LtiSystem> {
    let g = GRAVITY;
    let mut a = DMatrix::zeros(12, 12);
    for i in 0..3 {
        a[(i, i + 3)] = 1.0;
        a[(i + 6, i + 9)] = 1.0;
    }
    a[(3, 7)] = g;
    a[(4, 6)] = -g;
    let mut b = DMatrix::zeros(12, 4);
    b[(5, 0)] = 1.0;
    b[(9, 1)] = 1.0;
    b[(10, 2)] = 1.0;
    b[(11, 3)] = 1.0;
    LtiSystem::new(a, b)
}

/// Flight envelope: position box, speed limit 5 (a box plus a 16-gon prism in every pair of
/// velocity axes, each circumscribing the speed ball), tilt `±π/4`, yaw `±π`, body rates `±3`.
pub fn quadrotor_constraints() -> Result<Polytope> {
    let v_max = 5.0;
    let lo = [-6.0, -6.0, 1.0, -v_max, -v_max, -v_max, -PI / 4.0, -PI / 4.0, -PI, -3.0, -3.0, -3.0];
    let hi = [6.0, 6.0, 7.0, v_max, v_max, v_max, PI / 4.0, PI / 4.0, PI, 3.0, 3.0, 3.0];
    let mut facets = Polytope::boxed(&lo, &hi)?.require_hrep()?.to_vec();
    for (i, j) in [(3, 4), (3, 5), (4, 5)] {
        for k in 0..16 {
            let theta = k as f64 * 2.0 * PI / 16.0;
            // the axis-aligned members duplicate box faces
            if k % 4 == 0 {
                continue;
            }
            let mut normal = DVector::zeros(12);
            normal[i] = theta.cos();
            normal[j] = theta.sin();
            facets.push(Halfspace::new(normal, v_max)?);
        }
    }
    Polytope::from_halfspaces(12, facets)
}

/// 12-state quadrotor at 10 Hz over two seconds, ζ = 4, ε = ε_o = 0.01.
pub fn quadrotor() -> Result<SampledDataProblem> {
    let g = GRAVITY;
    let u = Polytope::boxed(&[-g, -0.5, -0.5, -0.5], &[2.38, 0.5, 0.5, 0.5])?;
    SampledDataProblem::new(quadrotor_system()?, quadrotor_constraints()?, u, 0.1, 2.0, 4, 0.01, 0.01)
}

/// Coordinate planes of the quadrotor warm-start fans: position/velocity and angle/rate pairs.
pub const QUADROTOR_FANS: [(usize, usize); 6] = [(0, 3), (1, 4), (2, 5), (6, 9), (7, 10), (8, 11)];

/// The 24 axis directions followed by 72 fan directions (12 per plane).
pub fn quadrotor_warm_start() -> Result<Vec<DVector<f64>>> {
    warm_start_directions(12, true, &QUADROTOR_FANS, 12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrotor_structure() {
        let s = quadrotor_system().unwrap();
        let nz = |m: &DMatrix<f64>| m.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nz(s.a()), 8);
        assert_eq!(nz(s.b()), 4);
        let k = quadrotor_constraints().unwrap();
        assert_eq!(k.require_hrep().unwrap().len(), 24 + 3 * 12);
        // speed ball touches every prism face; box corner in a velocity plane is cut off
        let mut v = DVector::zeros(12);
        v[2] = 4.0;
        v[3] = 4.9;
        v[4] = 4.9;
        assert!(!k.contains(&v, 0.0));
        v[3] = 3.5;
        v[4] = 3.5;
        assert!(k.contains(&v, 0.0));
        assert_eq!(quadrotor_warm_start().unwrap().len(), 96);
        assert_eq!(quadrotor().unwrap().steps(), 20);
    }

    #[test]
    fn chain_shapes() {
        for n in [2, 5, 10] {
            let p = integrator_chain(n).unwrap();
            assert_eq!(p.n(), n);
            assert_eq!(p.system.a().iter().filter(|v| **v != 0.0).count(), n - 1);
        }
        assert_eq!(double_integrator().unwrap().steps(), 20);
    }
}
