//! The guided loop and the error metrics that steer the gradient samplers.

use std::time::Instant;

use nalgebra::DVector;

use super::{Kernel, OverApproximation, UnderApproximation, Vertex};
use crate::error::{Error, Result};
use crate::feasibility::{bisect, FeasibilityProgram};
use crate::geometry::{centroid, hausdorff_estimate, Polytope, Ray};
use crate::sampling::{SamplerMode, SamplerState};

/// Output of [`Kernel::combined_guided`].
#[derive(Debug, Clone)]
pub struct GuidedRun {
    pub under: UnderApproximation,
    pub over: OverApproximation,
    /// Approximation error after each accepted sampled vertex.
    pub err_trace: Vec<f64>,
    /// Anchor (scaled frame) in force after each accepted sampled vertex.
    pub anchor_trace: Vec<DVector<f64>>,
}

/// Error between the inner vertex set and the outer polytope, both in the scaled frame.
///
/// `GradientVolume` measures `vol(box(outer)) − vol(E/n)` with `E` the minimum-volume ellipsoid
/// around the vertices; every other mode (and the volume mode when the vertices are still
/// degenerate) uses the support-function gap over `directions`. The flag reports that fallback.
pub fn approximation_error(
    mode: SamplerMode,
    vertices: &[DVector<f64>],
    outer: &Polytope,
    directions: &[DVector<f64>],
) -> Result<(f64, bool)> {
    if mode == SamplerMode::GradientVolume {
        match volume_error(vertices, outer) {
            Ok(v) => return Ok((v, false)),
            Err(e) => log::debug!("volume error unavailable: {e}"),
        }
        let h = hausdorff(vertices, outer, directions)?;
        return Ok((h, true));
    }
    Ok((hausdorff(vertices, outer, directions)?, false))
}

fn hausdorff(vertices: &[DVector<f64>], outer: &Polytope, directions: &[DVector<f64>]) -> Result<f64> {
    let inner = Polytope::from_vertices(vertices.to_vec())?;
    hausdorff_estimate(&inner, outer, directions)
}

#[cfg(feature = "ellipsoid")]
fn volume_error(vertices: &[DVector<f64>], outer: &Polytope) -> Result<f64> {
    use crate::ellipsoid::mvce_khachiyan;
    let n = outer.dim();
    let mut box_volume = 1.0;
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        let hi = outer.support_function(&e)?.0;
        let lo = -outer.support_function(&-e)?.0;
        box_volume *= (hi - lo).max(0.0);
    }
    let inner = mvce_khachiyan(vertices, 1e-3)?.shrunk(n as f64).volume();
    if !inner.is_finite() {
        return Err(Error::Degenerate("ellipsoid volume is not finite".into()));
    }
    Ok(box_volume - inner)
}

#[cfg(not(feature = "ellipsoid"))]
fn volume_error(_vertices: &[DVector<f64>], _outer: &Polytope) -> Result<f64> {
    Err(Error::Config("built without the ellipsoid feature".into()))
}

pub(super) fn run(
    kernel: &Kernel,
    v0: Option<&DVector<f64>>,
    n_samples: usize,
    sampler: &mut SamplerState,
) -> Result<GuidedRun> {
    if sampler.dim() != kernel.problem.n() {
        return Err(Error::DimensionMismatch("sampler dimension".into()));
    }
    let eps_o = kernel.problem.epsilon_o;
    let prog = kernel.program()?;
    let (mut anchor, mut anchor_u) = kernel.find_anchor(&prog, v0)?;
    let mut under = kernel.new_under(&anchor, anchor_u.clone());
    let mut over = OverApproximation::empty(kernel.problem.k.clone(), kernel.transform.scaled.k.clone());
    let mut outer = over.scaled_polytope()?;
    let mut err_trace = Vec::new();
    let mut anchor_trace = Vec::new();

    let ratio = kernel.options.facet_ratio;
    let max_attempts = n_samples
        .saturating_mul(kernel.options.max_attempts_per_vertex)
        .max(n_samples + 10);
    let mut attempts = 0;
    let mut accepted = 0usize;

    while accepted < n_samples && attempts < max_attempts {
        attempts += 1;
        let dir = sampler.next_direction(&under.scaled_vertices, Some(&outer), &anchor)?;
        let Some(vertex) = kernel.vertex_along(&prog, &anchor, &anchor_u, &dir) else {
            under.skipped += 1;
            sampler.discard_last();
            continue;
        };
        accepted += 1;
        let idx = under.len();
        under.push(vertex, &kernel.transform, false);

        // facet for sampled vertices ⌈j/ratio⌉
        if super::facet_schedule(accepted, ratio).last() == Some(&accepted) {
            let start = Instant::now();
            match kernel.facet_for(&prog, &under, idx, eps_o) {
                Ok(facet) => {
                    let extra = support_guided_vertex(kernel, &prog, &facet.x0_star, &anchor, &anchor_u, eps_o);
                    over.push(facet, idx, start.elapsed(), &kernel.transform)?;
                    outer = over.scaled_polytope()?;
                    if let Some(v) = extra {
                        under.push(v, &kernel.transform, true);
                    }
                }
                Err(e) => {
                    log::warn!("facet from vertex {idx} aborted: {e}");
                    over.aborted.push(idx);
                }
            }
        }

        if kernel.options.recenter {
            let c = centroid(&under.scaled_vertices)?;
            if let Some(u) = prog.feasible(&c).u_star {
                anchor = c;
                anchor_u = u;
            }
        }

        let (err, fallback) = approximation_error(sampler.mode(), &under.scaled_vertices, &outer, sampler.history())?;
        if fallback {
            sampler.warn_volume_fallback("vertex set does not span the state space yet");
        }
        sampler.record_error(err);
        err_trace.push(err);
        anchor_trace.push(anchor.clone());
    }
    if accepted < n_samples {
        log::warn!("only {accepted} of {n_samples} vertices generated after {attempts} rays");
    }
    under.anchor = kernel.transform.to_original(&anchor);
    Ok(GuidedRun {
        under,
        over,
        err_trace,
        anchor_trace,
    })
}

/// Extra vertex on the ray from the anchor through `x₀*`, the support-vector estimate of the
/// newest facet, with the bisection confined to `x₀* ± ε_o·r` (clipped to `K`).
///
/// `x₀*` comes from the un-eroded program, so the inner end of that window can be infeasible;
/// the step is then skipped.
fn support_guided_vertex(
    kernel: &Kernel,
    prog: &FeasibilityProgram<'_>,
    x_star: &DVector<f64>,
    anchor: &DVector<f64>,
    anchor_u: &DVector<f64>,
    eps_o: f64,
) -> Option<Vertex> {
    let start = Instant::now();
    let ray = Ray::new(anchor.clone(), x_star - anchor).ok()?;
    let dir = ray.direction().clone();
    let boundary = kernel.transform.scaled.k.find_intersection_on_boundary(&ray).ok()?;
    let reach = (&boundary - anchor).norm();
    let s_star = (x_star - anchor).norm();
    let inner = ray.at((s_star - eps_o).max(0.0));
    let outer = ray.at((s_star + eps_o).min(reach));
    let lo_u = if (&inner - anchor).norm() <= 1e-15 {
        anchor_u.clone()
    } else {
        prog.feasible(&inner).u_star?
    };
    let (point, u) = bisect(
        &inner,
        &outer,
        kernel.problem.epsilon,
        kernel.options.max_bisection_depth,
        Some(lo_u),
        |x| prog.feasible(x).u_star,
    )
    .ok()?;
    Some(Vertex {
        point,
        direction: dir,
        u,
        elapsed: start.elapsed(),
    })
}
