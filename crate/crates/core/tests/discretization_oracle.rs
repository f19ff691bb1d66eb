//! Truncated model and its error bounds against the high-accuracy exponential.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sdviab::discretization::{
    gamma_coefficients, input_matrix, integral_error_bound, integrated_series, prediction_matrices, psi_delta,
    truncated_exponential,
};
use sdviab::oracle::{exact_discretization, expm_oracle, simulate};
use sdviab::problem::inf_norm;
use sdviab::Polytope;

/// Rounding allowance on top of the analytic bounds.
fn slack(scale: f64) -> f64 {
    1e-13 * scale.max(1.0)
}

fn matrix(n: usize, m: usize, range: f64) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-range..range, n * m).prop_map(move |v| DMatrix::from_vec(n, m, v))
}

fn system() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>, f64, usize)> {
    (1usize..=6, 1usize..=3, 1usize..=8)
        .prop_flat_map(|(n, m, zeta)| (matrix(n, n, 3.0), matrix(n, m, 2.0), 0.005f64..0.4, Just(zeta)))
        .prop_map(|(a, b, delta, zeta)| {
            // keep ‖A‖δ/(ζ+2) well below one
            let limit = 0.9 * (zeta as f64 + 2.0) / inf_norm(&a).max(1e-9);
            (a, b, delta.min(limit), zeta)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn psi_bounds_the_truncation((a, _b, delta, zeta) in system()) {
        let exact = expm_oracle(&a, delta).unwrap();
        let approx = truncated_exponential(&a, delta, zeta).unwrap();
        let err = inf_norm(&(&exact - &approx));
        let psi = psi_delta(&a, delta, zeta).unwrap();
        prop_assert!(err <= psi + slack(inf_norm(&exact)), "err {err} > psi {psi}");
    }

    #[test]
    fn integral_bound_covers_the_input_series((a, b, delta, zeta) in system()) {
        let n = a.nrows();
        let exact = exact_discretization(&a, &DMatrix::identity(n, n), delta).unwrap();
        let series = integrated_series(&a, delta, zeta).unwrap();
        let err = inf_norm(&(&exact.gamma - &series));
        let bound = integral_error_bound(&a, delta, zeta).unwrap();
        prop_assert!(err <= bound + slack(inf_norm(&exact.gamma)));
        let bzd = input_matrix(&a, &b, delta, zeta).unwrap();
        prop_assert!((bzd - &series * &b).amax() <= 1e-14 * (1.0 + series.amax() * b.amax()));
    }

    #[test]
    fn prediction_matches_stepping((a, b, delta, zeta) in system(), steps in 1usize..8, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (a.nrows(), b.ncols());
        let azd = truncated_exponential(&a, delta, zeta).unwrap();
        let bzd = input_matrix(&a, &b, delta, zeta).unwrap();
        let (g, h) = prediction_matrices(&azd, &bzd, steps).unwrap();
        let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let u = DVector::from_fn(steps * m, |_, _| rng.random_range(-1.0..1.0));
        let stacked = &g * &x0 + &h * &u;
        let mut x = x0.clone();
        for k in 0..=steps {
            let row = stacked.rows(k * n, n);
            prop_assert!((&x - row).amax() <= 1e-10 * (1.0 + x.amax()));
            if k < steps {
                x = &azd * &x + &bzd * u.rows(k * m, m);
            }
        }
    }

    #[test]
    fn gamma_covers_trajectory_mismatch((a, b, delta, zeta) in system(), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (a.nrows(), b.ncols());
        let steps = 12;
        let u_set = Polytope::inf_ball(m, 1.0).unwrap();
        let gamma = gamma_coefficients(&a, &b, &u_set, delta, zeta, steps, f64::INFINITY).unwrap();
        let exact = exact_discretization(&a, &b, delta).unwrap();
        let azd = truncated_exponential(&a, delta, zeta).unwrap();
        let bzd = input_matrix(&a, &b, delta, zeta).unwrap();
        for _ in 0..5 {
            let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            // bang-bang inputs push the mismatch hardest
            let u = DVector::from_fn(steps * m, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
            let truth = simulate(&exact, &x0, &u);
            let mut nominal = x0.clone();
            for k in 1..=steps {
                nominal = &azd * &nominal + &bzd * u.rows((k - 1) * m, m);
                let err = (&truth[k] - &nominal).amax();
                let bound = gamma.gamma(k, x0.amax());
                prop_assert!(err <= bound + slack(truth[k].amax()), "k={k} err {err} > {bound}");
            }
        }
    }

    #[test]
    fn higher_order_tightens_gamma((a, b, delta, _zeta) in system()) {
        prop_assume!(inf_norm(&a) > 1e-6 && b.amax() > 1e-6);
        let delta = delta.min(0.9 * 6.0 / inf_norm(&a));
        let u_set = Polytope::inf_ball(b.ncols(), 1.0).unwrap();
        let g4 = gamma_coefficients(&a, &b, &u_set, delta, 4, 10, f64::INFINITY).unwrap();
        let g8 = gamma_coefficients(&a, &b, &u_set, delta, 8, 10, f64::INFINITY).unwrap();
        for k in 1..=10 {
            prop_assert!(g8.gamma(k, 1.0) < g4.gamma(k, 1.0));
        }
    }
}

#[test]
fn psi_scalar_series() {
    // a = 1, δ = 0.1: e^{0.1} against the order-4 Taylor sum
    let a = DMatrix::from_element(1, 1, 1.0);
    let e = expm_oracle(&a, 0.1).unwrap()[(0, 0)];
    assert!((e - 1.105_170_918_075_647_6).abs() < 1e-15);
    let t4 = truncated_exponential(&a, 0.1, 4).unwrap()[(0, 0)];
    let psi = psi_delta(&a, 0.1, 4).unwrap();
    assert!(e - t4 <= psi);
    // the first neglected term dominates the remainder
    assert!(psi < 1.1 * 0.1f64.powi(5) / 120.0);
}
