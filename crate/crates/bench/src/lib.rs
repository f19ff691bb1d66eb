//! Shared workloads for the criterion benches.

use std::time::Duration;

use sdviab::kernel::{Kernel, KernelOptions, UnderApproximation};
use sdviab::presets;
use sdviab::sampling::{SamplerMode, SamplerState};
use sdviab::Result;

/// Integrator chain of length `n` with `2n` vertices and bisection depth 3, sequential.
pub fn chain_run(n: usize, seed: u64) -> Result<UnderApproximation> {
    let options = KernelOptions {
        max_bisection_depth: Some(3),
        workers: 1,
        ..KernelOptions::default()
    };
    let kernel = Kernel::new(presets::integrator_chain(n)?, options)?;
    let mut sampler = SamplerState::new(SamplerMode::Uniform, n, seed);
    kernel.polytopic_approx(None, 2 * n, &mut sampler)
}

/// Mean wall time per sampled vertex.
pub fn per_vertex_time(under: &UnderApproximation) -> Duration {
    let sampled = under.sampled().max(1) as u32;
    under.timings.iter().sum::<Duration>() / sampled
}
