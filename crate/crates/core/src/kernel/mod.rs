//! Kernel approximation drivers: ray-sampling inner approximation, support-hyperplane outer
//! approximation, and the guided loop that interleaves them.
//!
//! All geometry runs in the scaled coordinates of [`ScalingTransform`]; the bisection
//! accuracies are interpreted there. Results carry both scaled and original coordinates.

mod guided;
mod scaling;

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::discretization::{DiscretizationBundle, DEFAULT_BOUND_CAP};
use crate::error::{Error, Result};
use crate::feasibility::{bisect, Facet, FeasibilityCertificate, FeasibilityProgram};
use crate::geometry::{Halfspace, Polytope, Ray};
use crate::problem::SampledDataProblem;
use crate::sampling::{SamplerMode, SamplerState};

pub use guided::{approximation_error, GuidedRun};
pub use scaling::{field_bound, scale_and_bound, ScalingTransform};

/// Tuning knobs that are not part of the problem statement.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelOptions {
    /// Equalize vector-field ranges before running (off: identity transform).
    pub scaling: bool,
    /// Cap on the discretization error coefficients.
    pub bound_cap: f64,
    /// Stop each vertex bisection after this many midpoints.
    pub max_bisection_depth: Option<usize>,
    /// Fraction of sampled vertices that also get an outer facet.
    pub facet_ratio: f64,
    /// Move the anchor to the vertex centroid after every accepted vertex (guided loop).
    pub recenter: bool,
    /// Worker threads for uniform sampling; 1 forces sequential processing.
    pub workers: usize,
    /// Rays tried per requested vertex before giving up.
    pub max_attempts_per_vertex: usize,
    /// Seed for anchor search by rejection sampling.
    pub anchor_seed: u64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            scaling: true,
            bound_cap: DEFAULT_BOUND_CAP,
            max_bisection_depth: None,
            facet_ratio: 0.5,
            recenter: true,
            workers: 0,
            max_attempts_per_vertex: 10,
            anchor_seed: 0,
        }
    }
}

/// Certified inner approximation `conv{v₀, …}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnderApproximation {
    /// Vertices in original coordinates; index 0 is the initial anchor.
    pub vertices: Vec<DVector<f64>>,
    pub scaled_vertices: Vec<DVector<f64>>,
    /// Sampling direction (unit, scaled frame) of each vertex; `None` for the anchor.
    pub directions: Vec<Option<DVector<f64>>>,
    /// Stacked input sequence certifying each vertex.
    pub certificates: Vec<DVector<f64>>,
    /// Marks vertices added by the support-vector guided step.
    pub extra: Vec<bool>,
    /// Final anchor (original coordinates).
    pub anchor: DVector<f64>,
    /// Rays that produced no vertex.
    pub skipped: usize,
    /// Wall time spent on each vertex (zero for the anchor).
    pub timings: Vec<Duration>,
}

impl UnderApproximation {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Number of vertices generated from sampled directions.
    pub fn sampled(&self) -> usize {
        self.directions
            .iter()
            .zip(&self.extra)
            .filter(|(d, e)| d.is_some() && !**e)
            .count()
    }

    pub fn polytope(&self) -> Result<Polytope> {
        Polytope::from_vertices(self.vertices.clone())
    }

    pub fn scaled_polytope(&self) -> Result<Polytope> {
        Polytope::from_vertices(self.scaled_vertices.clone())
    }

    fn push(&mut self, v: Vertex, transform: &ScalingTransform, extra: bool) {
        self.vertices.push(transform.to_original(&v.point));
        self.scaled_vertices.push(v.point);
        self.directions.push(Some(v.direction));
        self.certificates.push(v.u);
        self.extra.push(extra);
        self.timings.push(v.elapsed);
    }
}

/// Outer approximation `K ∩ {facets}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverApproximation {
    /// Facets in the scaled frame with their certificates.
    pub scaled_facets: Vec<Facet>,
    /// The same facets in original coordinates (unit normals).
    pub facets: Vec<Halfspace>,
    /// Support-vector estimates `x₀*` in original coordinates.
    pub support_vectors: Vec<DVector<f64>>,
    /// Under-approximation vertex index each facet was grown from.
    pub source_vertices: Vec<usize>,
    /// Vertex indices whose facet was aborted on a solver failure.
    pub aborted: Vec<usize>,
    pub timings: Vec<Duration>,
    k: Polytope,
    k_scaled: Polytope,
}

impl OverApproximation {
    fn empty(k: Polytope, k_scaled: Polytope) -> Self {
        Self {
            scaled_facets: Vec::new(),
            facets: Vec::new(),
            support_vectors: Vec::new(),
            source_vertices: Vec::new(),
            aborted: Vec::new(),
            timings: Vec::new(),
            k,
            k_scaled,
        }
    }

    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    /// `K ∩ {facets}` in original coordinates; just `K` when no facet was produced.
    pub fn polytope(&self) -> Result<Polytope> {
        let mut h = self.k.require_hrep()?.to_vec();
        h.extend(self.facets.iter().cloned());
        Polytope::from_halfspaces(self.k.dim(), h)
    }

    pub fn scaled_polytope(&self) -> Result<Polytope> {
        let mut h = self.k_scaled.require_hrep()?.to_vec();
        for f in &self.scaled_facets {
            h.push(Halfspace::new(f.normal.clone(), f.offset)?);
        }
        Polytope::from_halfspaces(self.k_scaled.dim(), h)
    }

    fn push(&mut self, facet: Facet, source: usize, elapsed: Duration, transform: &ScalingTransform) -> Result<()> {
        self.facets.push(transform.halfspace_to_original(&facet.normal, facet.offset)?);
        self.support_vectors.push(transform.to_original(&facet.x0_star));
        self.source_vertices.push(source);
        self.timings.push(elapsed);
        self.scaled_facets.push(facet);
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Vertex {
    point: DVector<f64>,
    direction: DVector<f64>,
    u: DVector<f64>,
    elapsed: Duration,
}

/// Discretized, scaled problem ready for repeated queries.
#[derive(Debug, Clone)]
pub struct Kernel {
    problem: SampledDataProblem,
    transform: ScalingTransform,
    bundle: DiscretizationBundle,
    options: KernelOptions,
}

/// `M·δ`-eroded `K` in scaled coordinates, with the discretization bundle.
pub fn build_bundle(transform: &ScalingTransform, bound_cap: f64) -> Result<DiscretizationBundle> {
    DiscretizationBundle::new(&transform.scaled, transform.m_bound, bound_cap)
}

impl Kernel {
    pub fn new(problem: SampledDataProblem, options: KernelOptions) -> Result<Self> {
        problem.validate()?;
        if !(options.facet_ratio > 0.0 && options.facet_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "facet_ratio must lie in (0, 1], got {}",
                options.facet_ratio
            )));
        }
        let transform = if options.scaling {
            scale_and_bound(&problem)?
        } else {
            ScalingTransform::identity(&problem)?
        };
        let bundle = build_bundle(&transform, options.bound_cap)?;
        Ok(Self {
            problem,
            transform,
            bundle,
            options,
        })
    }

    pub fn problem(&self) -> &SampledDataProblem {
        &self.problem
    }

    pub fn transform(&self) -> &ScalingTransform {
        &self.transform
    }

    pub fn bundle(&self) -> &DiscretizationBundle {
        &self.bundle
    }

    pub fn options(&self) -> &KernelOptions {
        &self.options
    }

    pub fn program(&self) -> Result<FeasibilityProgram<'_>> {
        FeasibilityProgram::new(&self.bundle, &self.transform.scaled)
    }

    /// Point feasibility of `x0` given in original coordinates.
    pub fn feasible(&self, x0: &DVector<f64>) -> Result<FeasibilityCertificate> {
        if x0.len() != self.problem.n() {
            return Err(Error::DimensionMismatch("query point".into()));
        }
        Ok(self.program()?.feasible(&self.transform.to_scaled(x0)))
    }

    /// Anchor in scaled coordinates with its certificate.
    ///
    /// A given `v0` (original coordinates) must be feasible. Otherwise the origin is tried, then
    /// the center of the bounding box of `K`, the Chebyshev center of the eroded constraint set
    /// and finally random points of `K`.
    fn find_anchor(&self, prog: &FeasibilityProgram<'_>, v0: Option<&DVector<f64>>) -> Result<(DVector<f64>, DVector<f64>)> {
        let try_point = |x: &DVector<f64>| prog.feasible(x).u_star.map(|u| (x.clone(), u));
        if let Some(v) = v0 {
            if v.len() != self.problem.n() {
                return Err(Error::DimensionMismatch("anchor".into()));
            }
            return try_point(&self.transform.to_scaled(v)).ok_or(Error::InfeasibleAnchor);
        }
        let n = self.problem.n();
        if let Some(found) = try_point(&DVector::zeros(n)) {
            return Ok(found);
        }
        let k = &self.transform.scaled.k;
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            hi[i] = k.support_function(&e)?.0;
            lo[i] = -k.support_function(&-e)?.0;
        }
        let mid = (&lo + &hi) * 0.5;
        if k.contains(&mid, 0.0) {
            if let Some(found) = try_point(&mid) {
                log::info!("origin infeasible; anchoring at the center of the bounding box of K");
                return Ok(found);
            }
        }
        if let Ok((c, _)) = self.bundle.k_down.chebyshev_center() {
            if let Some(found) = try_point(&c) {
                log::info!("origin infeasible; anchoring at the Chebyshev center of the eroded set");
                return Ok(found);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.options.anchor_seed);
        for _ in 0..1000 {
            let x = DVector::from_fn(n, |i, _| rng.random_range(lo[i]..=hi[i]));
            if k.contains(&x, 0.0) {
                if let Some(found) = try_point(&x) {
                    log::info!("anchoring at a randomly sampled point of K");
                    return Ok(found);
                }
            }
        }
        Err(Error::InfeasibleAnchor)
    }

    /// Bisects from the anchor toward `∂K` along `direction` (scaled frame).
    fn vertex_along(
        &self,
        prog: &FeasibilityProgram<'_>,
        v0: &DVector<f64>,
        u0: &DVector<f64>,
        direction: &DVector<f64>,
    ) -> Option<Vertex> {
        let start = Instant::now();
        let ray = match Ray::new(v0.clone(), direction.clone()) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("skipping ray: {e}");
                return None;
            }
        };
        let boundary = match self.transform.scaled.k.find_intersection_on_boundary(&ray) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("skipping ray: {e}");
                return None;
            }
        };
        let oracle = |x: &DVector<f64>| prog.feasible(x).u_star;
        match bisect(
            v0,
            &boundary,
            self.problem.epsilon,
            self.options.max_bisection_depth,
            Some(u0.clone()),
            oracle,
        ) {
            Ok((point, u)) => Some(Vertex {
                point,
                direction: ray.direction().clone(),
                u,
                elapsed: start.elapsed(),
            }),
            Err(e) => {
                log::warn!("skipping ray: {e}");
                None
            }
        }
    }

    fn new_under(&self, v0: &DVector<f64>, u0: DVector<f64>) -> UnderApproximation {
        UnderApproximation {
            vertices: vec![self.transform.to_original(v0)],
            scaled_vertices: vec![v0.clone()],
            directions: vec![None],
            certificates: vec![u0],
            extra: vec![false],
            anchor: self.transform.to_original(v0),
            skipped: 0,
            timings: vec![Duration::ZERO],
        }
    }

    /// Inner approximation from `n_samples` accepted rays through the anchor.
    ///
    /// Uniform sampling runs the rays in parallel when `workers != 1`; the vertex set does not
    /// depend on the worker count.
    pub fn polytopic_approx(
        &self,
        v0: Option<&DVector<f64>>,
        n_samples: usize,
        sampler: &mut SamplerState,
    ) -> Result<UnderApproximation> {
        if sampler.dim() != self.problem.n() {
            return Err(Error::DimensionMismatch("sampler dimension".into()));
        }
        let prog = self.program()?;
        let (v0s, u0) = self.find_anchor(&prog, v0)?;
        let mut under = self.new_under(&v0s, u0.clone());
        let max_attempts = n_samples.saturating_mul(self.options.max_attempts_per_vertex).max(n_samples + 10);
        let mut attempts = 0;
        let parallel = sampler.mode() == SamplerMode::Uniform && self.options.workers != 1;

        while under.sampled() < n_samples && attempts < max_attempts {
            let wanted = n_samples - under.sampled();
            if parallel {
                let batch = wanted.min(max_attempts - attempts);
                let mut dirs = Vec::with_capacity(batch);
                for _ in 0..batch {
                    dirs.push(sampler.next_direction(&under.scaled_vertices, None, &v0s)?);
                }
                attempts += batch;
                let run = || -> Vec<Option<Vertex>> {
                    dirs.par_iter()
                        .map(|d| self.vertex_along(&prog, &v0s, &u0, d))
                        .collect()
                };
                let results = if self.options.workers > 1 {
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(self.options.workers)
                        .build()
                        .map_err(|e| Error::Config(format!("thread pool: {e}")))?
                        .install(run)
                } else {
                    run()
                };
                for v in results {
                    match v {
                        Some(v) => under.push(v, &self.transform, false),
                        None => under.skipped += 1,
                    }
                }
            } else {
                attempts += 1;
                let d = sampler.next_direction(&under.scaled_vertices, None, &v0s)?;
                match self.vertex_along(&prog, &v0s, &u0, &d) {
                    Some(v) => under.push(v, &self.transform, false),
                    None => under.skipped += 1,
                }
            }
        }
        if under.sampled() < n_samples {
            log::warn!(
                "only {} of {} vertices generated after {} rays",
                under.sampled(),
                n_samples,
                attempts
            );
        }
        Ok(under)
    }

    /// Vertex indices (among sampled vertices, counted from 1) that receive a facet.
    pub fn facet_sources(&self, under: &UnderApproximation) -> Vec<usize> {
        let sampled: Vec<usize> = (0..under.len())
            .filter(|&i| under.directions[i].is_some() && !under.extra[i])
            .collect();
        facet_schedule(sampled.len(), self.options.facet_ratio)
            .into_iter()
            .map(|j| sampled[j - 1])
            .collect()
    }

    /// Outer approximation from support hyperplanes along the directions of a subset of the
    /// under-approximation vertices (see [`KernelOptions::facet_ratio`]).
    pub fn over_approx(&self, under: &UnderApproximation, eps_o: f64) -> Result<OverApproximation> {
        if under.is_empty() {
            return Err(Error::Empty("under-approximation"));
        }
        if !(eps_o > 0.0) {
            return Err(Error::InvalidProblem("eps_o must be positive".into()));
        }
        let prog = self.program()?;
        let sources = self.facet_sources(under);
        let run = || -> Vec<(usize, Result<Facet>, Duration)> {
            sources
                .par_iter()
                .map(|&i| {
                    let start = Instant::now();
                    let r = self.facet_for(&prog, under, i, eps_o);
                    (i, r, start.elapsed())
                })
                .collect()
        };
        let results = if self.options.workers == 1 {
            sources
                .iter()
                .map(|&i| {
                    let start = Instant::now();
                    let r = self.facet_for(&prog, under, i, eps_o);
                    (i, r, start.elapsed())
                })
                .collect()
        } else {
            run()
        };
        let mut over = OverApproximation::empty(self.problem.k.clone(), self.transform.scaled.k.clone());
        for (i, r, elapsed) in results {
            match r {
                Ok(f) => over.push(f, i, elapsed, &self.transform)?,
                Err(e) => {
                    log::warn!("facet from vertex {i} aborted: {e}");
                    over.aborted.push(i);
                }
            }
        }
        if over.is_empty() {
            log::warn!("outer approximation has no facets; it is just K");
        }
        Ok(over)
    }

    fn facet_for(
        &self,
        prog: &FeasibilityProgram<'_>,
        under: &UnderApproximation,
        i: usize,
        eps_o: f64,
    ) -> Result<Facet> {
        let dir = under.directions[i].as_ref().ok_or(Error::Degenerate("vertex has no direction".into()))?;
        let (rho, _) = self.transform.scaled.k.support_function(dir)?;
        prog.overapprox_facet(dir, &under.scaled_vertices[i], &under.certificates[i], rho, eps_o)
    }

    /// Guided loop: inner vertex, outer facet, support-vector guided extra vertex and
    /// re-centering per iteration, with the sampler steered by the running error.
    pub fn combined_guided(
        &self,
        v0: Option<&DVector<f64>>,
        n_samples: usize,
        sampler: &mut SamplerState,
    ) -> Result<GuidedRun> {
        guided::run(self, v0, n_samples, sampler)
    }
}

/// 1-based positions `⌈j/ratio⌉` (`j = 1, 2, …`) that fit in `count` sampled vertices.
pub fn facet_schedule(count: usize, ratio: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut j = 1usize;
    loop {
        let idx = (j as f64 / ratio - 1e-9).ceil() as usize;
        if idx > count {
            break;
        }
        if out.last() != Some(&idx) {
            out.push(idx);
        }
        j += 1;
    }
    out
}

/// Warm-start directions: `±eᵢ` for every axis (if `axes`), then `per_fan` evenly spaced unit
/// vectors in each coordinate plane of `fans`, offset by half a step so none repeats an axis.
pub fn warm_start_directions(n: usize, axes: bool, fans: &[(usize, usize)], per_fan: usize) -> Result<Vec<DVector<f64>>> {
    let mut out = Vec::new();
    if axes {
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut e = DVector::zeros(n);
                e[i] = s;
                out.push(e);
            }
        }
    }
    for &(i, j) in fans {
        if i >= n || j >= n || i == j {
            return Err(Error::Config(format!("fan plane ({i}, {j}) invalid for n = {n}")));
        }
        for k in 0..per_fan {
            let theta = (k as f64 + 0.5) * 2.0 * std::f64::consts::PI / per_fan as f64;
            let mut d = DVector::zeros(n);
            d[i] = theta.cos();
            d[j] = theta.sin();
            out.push(d);
        }
    }
    Ok(out)
}
