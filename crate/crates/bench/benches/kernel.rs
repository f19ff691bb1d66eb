use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;
use sdviab::discretization::DiscretizationBundle;
use sdviab::feasibility::FeasibilityProgram;
use sdviab::kernel::{scale_and_bound, Kernel, KernelOptions};
use sdviab::presets;
use sdviab::sampling::{SamplerMode, SamplerState};
use sdviab_bench::chain_run;

fn integrator_chain(c: &mut Criterion) {
    let mut group = c.benchmark_group("integrator_chain");
    group.sample_size(10);
    for n in [2, 4, 6, 8, 10] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| chain_run(black_box(n), 0).unwrap())
        });
    }
    group.finish();
}

fn point_feasibility(c: &mut Criterion) {
    let p = presets::double_integrator().unwrap();
    let t = scale_and_bound(&p).unwrap();
    let bundle = DiscretizationBundle::new(&t.scaled, t.m_bound, 1e6).unwrap();
    let prog = FeasibilityProgram::new(&bundle, &t.scaled).unwrap();
    let x = DVector::from_vec(vec![0.05, 0.2]);
    c.bench_function("double_integrator/feasible", |b| b.iter(|| prog.feasible(black_box(&x))));
}

fn double_integrator(c: &mut Criterion) {
    let kernel = Kernel::new(presets::double_integrator().unwrap(), KernelOptions::default()).unwrap();
    let mut group = c.benchmark_group("double_integrator");
    group.sample_size(10);
    group.bench_function("under_20", |b| {
        b.iter(|| {
            let mut s = SamplerState::new(SamplerMode::Uniform, 2, 1);
            kernel.polytopic_approx(None, 20, &mut s).unwrap()
        })
    });
    group.bench_function("under_20_over_10", |b| {
        b.iter(|| {
            let mut s = SamplerState::new(SamplerMode::Uniform, 2, 1);
            let u = kernel.polytopic_approx(None, 20, &mut s).unwrap();
            kernel.over_approx(&u, 0.01).unwrap()
        })
    });
    group.bench_function("guided_hausdorff_20", |b| {
        b.iter(|| {
            let mut s = SamplerState::new(SamplerMode::GradientHausdorff, 2, 1);
            kernel.combined_guided(None, 20, &mut s).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, integrator_chain, point_feasibility, double_integrator);
criterion_main!(benches);
