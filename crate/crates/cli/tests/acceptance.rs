//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sdviab::discretization::{gamma_coefficients, input_matrix, psi_delta, truncated_exponential};
use sdviab::hull::{hull_volume_lowdim, polygon_area, polygon_from_hrep_2d};
use sdviab::kernel::{Kernel, KernelOptions};
use sdviab::oracle::{exact_discretization, exact_feasible_unreoded, expm_oracle, grid_bracket_2d, simulate};
use sdviab::presets;
use sdviab::problem::inf_norm;
use sdviab::sampling::{SamplerMode, SamplerState};
use sdviab::{LtiSystem, Polytope, SampledDataProblem};
use sdviab_cli::commands::{project, run_approx};
use sdviab_cli::config;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn di_kernel() -> Kernel {
    Kernel::new(presets::double_integrator().unwrap(), KernelOptions::default()).unwrap()
}

fn hull_area(v: &[DVector<f64>]) -> f64 {
    hull_volume_lowdim(v).unwrap().volume
}

fn criterion_1() -> Outcome {
    let cfg = config::preset("double_integrator").map_err(|e| e.to_string())?;
    let out = run_approx(&cfg).map_err(|e| e.to_string())?;
    let over = out.over.as_ref().ok_or("no outer approximation")?;
    let p = &cfg.problem;
    let mut oracle_fail = 0;
    let mut worst_slack = f64::INFINITY;
    for v in &out.under.vertices {
        if !exact_feasible_unreoded(v, p).map_err(|e| e.to_string())? {
            oracle_fail += 1;
        }
        for f in &over.facets {
            worst_slack = worst_slack.min(f.slack(v));
        }
    }
    let area = hull_area(&out.under.vertices);
    let bracket = grid_bracket_2d(&di_kernel(), 0.02).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} vertices, {} facets in {:.2} s; oracle rejections {oracle_fail}; min facet slack {worst_slack:.2e}; \
         hull area {area:.4} vs outer bracket {:.4}",
        out.under.len(),
        over.len(),
        out.total.as_secs_f64(),
        bracket.outer_area()
    );
    check(
        out.total < Duration::from_secs(60)
            && out.under.len() == 21
            && over.len() == 10
            && oracle_fail == 0
            && worst_slack >= -1e-7
            && area > 0.0
            && area <= bracket.outer_area(),
        detail,
    )
}

fn random_system(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>, f64) {
    let n = rng.random_range(1..=6);
    let m = rng.random_range(1..=3);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-3.0..3.0));
    let b = DMatrix::from_fn(n, m, |_, _| rng.random_range(-2.0..2.0));
    let limit = 0.9 * 6.0 / inf_norm(&a).max(1e-9);
    let delta = rng.random_range(0.005..0.4f64).min(limit);
    (a, b, delta)
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let round = |x: f64| 1e-13 * x.max(1.0);
    let mut psi_viol = 0;
    let mut mc_viol = 0;
    let mut mc_pairs = 0;
    let mut not_tighter = 0;
    let systems = 1000;
    let steps = 10;
    for s in 0..systems {
        let (a, b, delta) = random_system(&mut rng);
        let (n, m) = (a.nrows(), b.ncols());
        for zeta in [4, 8] {
            let err = inf_norm(&(expm_oracle(&a, delta).unwrap() - truncated_exponential(&a, delta, zeta).unwrap()));
            let bound = psi_delta(&a, delta, zeta).unwrap();
            if err > bound + round(1.0) {
                psi_viol += 1;
            }
        }
        let u_set = Polytope::inf_ball(m, 1.0).unwrap();
        let g4 = gamma_coefficients(&a, &b, &u_set, delta, 4, steps, f64::INFINITY).unwrap();
        let g8 = gamma_coefficients(&a, &b, &u_set, delta, 8, steps, f64::INFINITY).unwrap();
        if (1..=steps).any(|k| g8.gamma(k, 1.0) >= g4.gamma(k, 1.0)) {
            not_tighter += 1;
        }
        // 10 (x₀, u) pairs per system: 10⁴ in total
        let exact = exact_discretization(&a, &b, delta).unwrap();
        let azd = truncated_exponential(&a, delta, 4).unwrap();
        let bzd = input_matrix(&a, &b, delta, 4).unwrap();
        for _ in 0..10 {
            mc_pairs += 1;
            let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let u = DVector::from_fn(steps * m, |_, _| {
                if s % 2 == 0 {
                    if rng.random_bool(0.5) { 1.0 } else { -1.0 }
                } else {
                    rng.random_range(-1.0..1.0)
                }
            });
            let truth = simulate(&exact, &x0, &u);
            let mut nominal = x0.clone();
            for k in 1..=steps {
                nominal = &azd * &nominal + &bzd * u.rows((k - 1) * m, m);
                if (&truth[k] - &nominal).amax() > g4.gamma(k, x0.amax()) + round(truth[k].amax()) {
                    mc_viol += 1;
                    break;
                }
            }
        }
    }
    check(
        psi_viol == 0 && mc_viol == 0 && not_tighter == 0,
        format!(
            "{systems} systems: psi violations {psi_viol}; {mc_pairs} trajectory pairs, violations {mc_viol}; \
             zeta=8 not tighter on {not_tighter}"
        ),
    )
}

fn stable_4d() -> SampledDataProblem {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[-0.8, 0.3, 0.0, 0.1, -0.2, -0.5, 0.4, 0.0, 0.0, -0.1, -0.9, 0.3, 0.1, 0.0, -0.2, -0.6],
    );
    let b = DMatrix::from_row_slice(4, 2, &[0.0, 0.2, 1.0, 0.0, 0.0, 0.5, 0.3, 1.0]);
    SampledDataProblem::new(
        LtiSystem::new(a, b).unwrap(),
        Polytope::inf_ball(4, 1.0).unwrap(),
        Polytope::inf_ball(2, 0.5).unwrap(),
        0.1,
        1.0,
        4,
        0.01,
        0.01,
    )
    .unwrap()
}

fn combination_failures(kernel: &Kernel, vertices: &[DVector<f64>], seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..100)
        .filter(|_| {
            let w: Vec<f64> = (0..vertices.len()).map(|_| -rng.random::<f64>().ln()).collect();
            let total: f64 = w.iter().sum();
            let x = vertices
                .iter()
                .zip(&w)
                .fold(DVector::zeros(vertices[0].len()), |acc, (v, wi)| acc + v * (wi / total));
            !kernel.feasible(&x).unwrap().feasible
        })
        .count()
}

fn criterion_3() -> Outcome {
    let di = di_kernel();
    let mut s = SamplerState::new(SamplerMode::Uniform, 2, 3);
    let u = di.polytopic_approx(None, 20, &mut s).map_err(|e| e.to_string())?;
    let f_di = combination_failures(&di, &u.vertices, 30);
    let k4 = Kernel::new(stable_4d(), KernelOptions::default()).map_err(|e| e.to_string())?;
    let mut s = SamplerState::new(SamplerMode::Uniform, 4, 3);
    let u4 = k4.polytopic_approx(None, 30, &mut s).map_err(|e| e.to_string())?;
    let f_4d = combination_failures(&k4, &u4.vertices, 31);
    check(
        f_di == 0 && f_4d == 0,
        format!("infeasible convex combinations: double integrator {f_di}/100, 4D system {f_4d}/100"),
    )
}

fn criterion_4() -> Outcome {
    let k = di_kernel();
    let eps_o = k.problem().epsilon_o;
    let mut bad_support = 0;
    let mut bad_gap = 0;
    let mut facets = 0;
    let mut gaps = Vec::new();
    for n in [8, 16, 32] {
        let mut s = SamplerState::new(SamplerMode::Uniform, 2, 4);
        let under = k.polytopic_approx(None, n, &mut s).map_err(|e| e.to_string())?;
        let over = k.over_approx(&under, eps_o).map_err(|e| e.to_string())?;
        let inner = under.scaled_polytope().map_err(|e| e.to_string())?;
        for f in &over.scaled_facets {
            facets += 1;
            let (rho, _) = inner.support_function(&f.normal).map_err(|e| e.to_string())?;
            if rho > f.offset + 1e-9 {
                bad_support += 1;
            }
            if f.offset - f.feasible_offset >= eps_o {
                bad_gap += 1;
            }
        }
        let outer = polygon_from_hrep_2d(&over.polytope().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        gaps.push(polygon_area(&outer) - hull_area(&under.vertices));
    }
    let decreasing = gaps[1] < gaps[0] - 1e-6 && gaps[2] < gaps[1] - 1e-6;
    check(
        bad_support == 0 && bad_gap == 0 && decreasing,
        format!(
            "{facets} facets: support violations {bad_support}, bisection gaps >= eps_o {bad_gap}; \
             area gap N=8,16,32: {:.4} {:.4} {:.4}",
            gaps[0], gaps[1], gaps[2]
        ),
    )
}

fn criterion_5() -> Outcome {
    let k = di_kernel();
    let outer = grid_bracket_2d(&k, 0.02).map_err(|e| e.to_string())?.outer_area();
    let mut monotone = true;
    let mut worst_gap: f64 = 0.0;
    for seed in 0..5 {
        let mut prev = 0.0;
        for n in [5, 10, 20, 40, 80] {
            let mut s = SamplerState::new(SamplerMode::Uniform, 2, seed);
            let under = k.polytopic_approx(None, n, &mut s).map_err(|e| e.to_string())?;
            let a = hull_area(&under.vertices);
            if a < prev - 1e-12 {
                monotone = false;
            }
            prev = a;
            if n == 80 {
                worst_gap = worst_gap.max((outer - a) / outer);
            }
        }
    }
    check(
        monotone && worst_gap < 0.15,
        format!("5 seeds: areas nondecreasing {monotone}; worst relative gap to outer bracket at N=80 {:.1}%", 100.0 * worst_gap),
    )
}

fn criterion_6() -> Outcome {
    let mut points = Vec::new();
    let mut detail = String::new();
    for n in [2, 4, 6, 8, 10] {
        let options = KernelOptions {
            max_bisection_depth: Some(3),
            workers: 1,
            ..KernelOptions::default()
        };
        let kernel = Kernel::new(presets::integrator_chain(n).map_err(|e| e.to_string())?, options)
            .map_err(|e| e.to_string())?;
        // median over repeats to damp timer noise at millisecond scale
        let mut times = Vec::new();
        let mut accepted = 0;
        for rep in 0..5 {
            let mut s = SamplerState::new(SamplerMode::Uniform, n, rep);
            let start = Instant::now();
            let under = kernel.polytopic_approx(None, 2 * n, &mut s).map_err(|e| e.to_string())?;
            times.push(start.elapsed().as_secs_f64() / under.sampled().max(1) as f64);
            accepted = under.sampled();
        }
        if accepted != 2 * n {
            return Err(format!("n = {n}: only {accepted} of {} vertices", 2 * n));
        }
        times.sort_by(f64::total_cmp);
        let t = times[times.len() / 2];
        detail += &format!(" n={n}:{:.2}ms", 1e3 * t);
        points.push(((n as f64).ln(), t.ln()));
    }
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let slope = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mean_x).powi(2)).sum::<f64>();
    check(slope <= 3.5, format!("per-vertex time{detail}; log-log slope {slope:.2}"))
}

fn criterion_7() -> Outcome {
    let cfg = config::preset("quadrotor").map_err(|e| e.to_string())?;
    let out = run_approx(&cfg).map_err(|e| e.to_string())?;
    let kernel = Kernel::new(cfg.problem.clone(), cfg.options.clone()).map_err(|e| e.to_string())?;
    let uncertified = out
        .under
        .vertices
        .par_iter()
        .filter(|v| !kernel.feasible(v).map(|c| c.feasible).unwrap_or(false))
        .count();
    let slowest = out.under.timings.iter().max().copied().unwrap_or_default();
    let pairs = [(0, 3), (1, 4), (2, 5), (6, 9), (7, 10), (8, 11)];
    let mut degenerate = 0;
    for dims in pairs {
        let p = project(&out.under.vertices, dims).map_err(|e| e.to_string())?;
        if p.degenerate {
            degenerate += 1;
        }
    }
    check(
        out.under.sampled() == 96 && uncertified == 0 && slowest < Duration::from_secs(30) && degenerate == 0,
        format!(
            "{} sampled vertices in {:.1} s, uncertified {uncertified}, slowest vertex {:.2} s, degenerate projections {degenerate}/6",
            out.under.sampled(),
            out.total.as_secs_f64(),
            slowest.as_secs_f64()
        ),
    )
}

fn random_3d(rng: &mut ChaCha8Rng) -> Option<SampledDataProblem> {
    let a = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
    let b = DMatrix::from_fn(3, 1, |_, _| rng.random_range(-1.0..1.0));
    SampledDataProblem::new(
        LtiSystem::new(a, b).ok()?,
        Polytope::inf_ball(3, 1.0).ok()?,
        Polytope::inf_ball(1, 1.0).ok()?,
        0.1,
        1.0,
        4,
        0.01,
        0.01,
    )
    .ok()
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut uniform = Vec::new();
    let mut opposite = Vec::new();
    let mut attempts = 0;
    while uniform.len() < 10 && attempts < 100 {
        attempts += 1;
        let Some(p) = random_3d(&mut rng) else { continue };
        let Ok(kernel) = Kernel::new(p, KernelOptions::default()) else { continue };
        let seed = rng.random::<u64>();
        let run = |mode| -> Option<f64> {
            let mut s = SamplerState::new(mode, 3, seed);
            let u = kernel.polytopic_approx(None, 50, &mut s).ok()?;
            let h = hull_volume_lowdim(&u.vertices).ok()?;
            (!h.degenerate).then_some(h.volume)
        };
        if let (Some(vu), Some(vo)) = (run(SamplerMode::Uniform), run(SamplerMode::AvgOpposite)) {
            uniform.push(vu);
            opposite.push(vo);
        }
    }
    if uniform.len() < 10 {
        return Err(format!("only {} usable random systems", uniform.len()));
    }
    let mu = uniform.iter().sum::<f64>() / 10.0;
    let mo = opposite.iter().sum::<f64>() / 10.0;
    let gain = 100.0 * (mo - mu) / mu;
    check(
        mo >= mu,
        format!("mean hull volume uniform {mu:.4}, avg_opposite {mo:.4} ({gain:+.1}%)"),
    )
}

fn criterion_9() -> Outcome {
    let mut detail = Vec::new();
    for name in ["double_integrator", "integrator_chain:6", "quadrotor"] {
        let cfg = config::preset(name).map_err(|e| e.to_string())?;
        let a = run_approx(&cfg).map_err(|e| e.to_string())?;
        let b = run_approx(&cfg).map_err(|e| e.to_string())?;
        let same_len = a.under.len() == b.under.len();
        let diff = a
            .under
            .vertices
            .iter()
            .zip(&b.under.vertices)
            .map(|(x, y)| (x - y).amax())
            .fold(0.0, f64::max);
        if !same_len || diff > 1e-9 {
            return Err(format!("{name}: vertex sets differ (max deviation {diff:.2e})"));
        }
        detail.push(format!("{name} max deviation {diff:.1e}"));
    }
    Ok(detail.join(", "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("double integrator reproduction", criterion_1),
        ("error-bound validity", criterion_2),
        ("convex combinations stay feasible", criterion_3),
        ("sandwich property", criterion_4),
        ("convergence trend", criterion_5),
        ("integrator-chain scalability", criterion_6),
        ("quadrotor desk scale", criterion_7),
        ("heuristic sanity", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let r = f();
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("criterion {} ({name}): PASS [{secs:.1} s] {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.1} s] {d}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
