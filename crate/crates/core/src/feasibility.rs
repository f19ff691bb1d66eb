//! LP-backed feasibility oracles and the two bisection searches built on them.
//!
//! [`FeasibilityProgram::feasible`] certifies that some admissible input sequence keeps the
//! nominal model inside the eroded sets at every sampling step, which implies the initial
//! state lies in the sampled-data viability kernel. [`FeasibilityProgram::support_feasible`]
//! frees the initial state, pins it to a hyperplane and drops the erosion; it drives the
//! outer approximation.
//!
//! Every certificate reported as feasible has been re-checked by multiplying out the
//! prediction matrices, independently of the LP rows that produced it.

use nalgebra::{DMatrix, DVector};

use crate::discretization::DiscretizationBundle;
use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::lp::{Cmp, LinearProgram, LpOutcome, LpStatus};
use crate::problem::SampledDataProblem;

/// Slack allowed when re-validating a solver certificate.
pub const VALIDATION_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityCertificate {
    pub feasible: bool,
    /// Stacked inputs `[u₀; …; u_{N−1}]`.
    pub u_star: Option<DVector<f64>>,
    /// Initial state chosen by the free-initial-state program.
    pub x0_star: Option<DVector<f64>>,
    pub lp_status: LpStatus,
}

impl FeasibilityCertificate {
    fn infeasible(status: LpStatus) -> Self {
        Self {
            feasible: false,
            u_star: None,
            x0_star: None,
            lp_status: status,
        }
    }
}

#[derive(Debug, Clone)]
enum InputSet {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Poly { normals: DMatrix<f64>, offsets: Vec<f64> },
}

impl InputSet {
    fn from_polytope(u: &Polytope) -> Result<Self> {
        if let Some((lo, hi)) = u.as_box() {
            return Ok(InputSet::Box { lo, hi });
        }
        let facets = u.require_hrep()?;
        let normals = DMatrix::from_fn(facets.len(), u.dim(), |i, j| facets[i].normal[j]);
        Ok(InputSet::Poly {
            normals,
            offsets: facets.iter().map(|f| f.offset).collect(),
        })
    }

    fn contains(&self, u: &[f64], tol: f64) -> bool {
        match self {
            InputSet::Box { lo, hi } => u
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            InputSet::Poly { normals, offsets } => normals
                .row_iter()
                .zip(offsets)
                .all(|(row, b)| row.iter().zip(u).map(|(a, v)| a * v).sum::<f64>() <= b + tol),
        }
    }
}

/// Feasibility programs for one discretized problem, with the constraint rows that do not depend
/// on the query precomputed.
#[derive(Debug, Clone)]
pub struct FeasibilityProgram<'a> {
    bundle: &'a DiscretizationBundle,
    input: InputSet,
    /// Facet normals of `K`, one per row.
    normals: DMatrix<f64>,
    /// Offsets of `K`.
    offsets: Vec<f64>,
    /// `‖aᵢ‖₁` per facet.
    l1: Vec<f64>,
    /// `F·A_ζδ^k` for `k = 0..=N`.
    fp: Vec<DMatrix<f64>>,
    /// `F·H_k` restricted to the first `k·m` inputs.
    fh: Vec<DMatrix<f64>>,
    /// Offsets of `K ⊖ B∞(Mδ + βₖ)`.
    eroded_offsets: Vec<Vec<f64>>,
}

impl<'a> FeasibilityProgram<'a> {
    /// `problem` must be the problem the bundle was built from.
    pub fn new(bundle: &'a DiscretizationBundle, problem: &SampledDataProblem) -> Result<Self> {
        let facets = problem.k.require_hrep()?;
        let n = problem.n();
        if bundle.n() != n || bundle.m() != problem.m() {
            return Err(Error::DimensionMismatch("bundle does not match the problem".into()));
        }
        let normals = DMatrix::from_fn(facets.len(), n, |i, j| facets[i].normal[j]);
        let offsets: Vec<f64> = facets.iter().map(|f| f.offset).collect();
        let l1 = facets.iter().map(|f| f.normal.lp_norm(1)).collect();
        let mut fp = Vec::with_capacity(bundle.steps + 1);
        let mut fh = Vec::with_capacity(bundle.steps + 1);
        for k in 0..=bundle.steps {
            fp.push(&normals * bundle.g_block(k));
            fh.push(&normals * bundle.h_row(k));
        }
        let eroded_offsets = bundle
            .eroded_sets
            .iter()
            .map(|s| s.require_hrep().map(|h| h.iter().map(|f| f.offset).collect()))
            .collect::<Result<Vec<Vec<f64>>>>()?;
        if eroded_offsets.iter().any(|o| o.len() != offsets.len()) {
            return Err(Error::DimensionMismatch("eroded sets do not share the facets of K".into()));
        }
        Ok(Self {
            bundle,
            input: InputSet::from_polytope(&problem.u)?,
            normals,
            offsets,
            l1,
            fp,
            fh,
            eroded_offsets,
        })
    }

    pub fn bundle(&self) -> &DiscretizationBundle {
        self.bundle
    }

    fn steps(&self) -> usize {
        self.bundle.steps
    }

    fn n_inputs(&self) -> usize {
        self.bundle.steps * self.bundle.m()
    }

    fn apply_input_set(&self, lp: &mut LinearProgram, offset: usize) {
        let m = self.bundle.m();
        for j in 0..self.steps() {
            match &self.input {
                InputSet::Box { lo, hi } => {
                    for i in 0..m {
                        lp.set_bounds(offset + j * m + i, lo[i], hi[i]);
                    }
                }
                InputSet::Poly { normals, offsets } => {
                    for (row, b) in normals.row_iter().zip(offsets) {
                        let coeffs: Vec<f64> = row.iter().copied().collect();
                        lp.add_row_at(offset + j * m, &coeffs, Cmp::Le, *b);
                    }
                }
            }
        }
    }

    /// Right-hand sides `b − (Mδ + γ̃ₖ)‖a‖₁` of step `k` for a given `‖x₀‖∞`.
    fn eroded_rhs(&self, k: usize, x0_norm: f64) -> impl Iterator<Item = f64> + '_ {
        let extra = if k == 0 { 0.0 } else { self.bundle.gamma.alpha[k - 1] * x0_norm };
        self.eroded_offsets[k]
            .iter()
            .zip(&self.l1)
            .map(move |(b, l1)| b - extra * l1)
    }

    /// Point feasibility: does some input sequence keep the nominal trajectory from `x0` inside
    /// the eroded sets? An LP failure is reported as infeasible.
    pub fn feasible(&self, x0: &DVector<f64>) -> FeasibilityCertificate {
        let x0_norm = x0.amax();
        let a0x = &self.normals * x0;
        if a0x.iter().zip(self.eroded_rhs(0, x0_norm)).any(|(ax, b)| *ax > b) {
            return FeasibilityCertificate::infeasible(LpStatus::Trivial);
        }

        let nu = self.n_inputs();
        let mut lp = LinearProgram::new(nu);
        self.apply_input_set(&mut lp, 0);
        let boxed = match &self.input {
            InputSet::Box { lo, hi } => Some((lo, hi)),
            InputSet::Poly { .. } => None,
        };
        let m = self.bundle.m();
        for k in 1..=self.steps() {
            let drift = &self.fp[k] * x0;
            let fh = &self.fh[k];
            for (i, b) in self.eroded_rhs(k, x0_norm).enumerate() {
                let rhs = b - drift[i];
                let row = fh.row(i);
                if let Some((lo, hi)) = boxed {
                    let (mut max, mut min) = (0.0, 0.0);
                    for (c, coeff) in row.iter().enumerate() {
                        let (l, h) = (lo[c % m], hi[c % m]);
                        if *coeff >= 0.0 {
                            max += coeff * h;
                            min += coeff * l;
                        } else {
                            max += coeff * l;
                            min += coeff * h;
                        }
                    }
                    if max <= rhs {
                        continue;
                    }
                    if min > rhs {
                        return FeasibilityCertificate::infeasible(LpStatus::Trivial);
                    }
                }
                let coeffs: Vec<f64> = row.iter().copied().collect();
                lp.add_row(&coeffs, Cmp::Le, rhs);
            }
        }

        match lp.solve() {
            LpOutcome::Solved { x, .. } => {
                let u = DVector::from_vec(x);
                if self.validate_point(x0, &u, VALIDATION_TOL) {
                    FeasibilityCertificate {
                        feasible: true,
                        u_star: Some(u),
                        x0_star: None,
                        lp_status: LpStatus::Optimal,
                    }
                } else {
                    log::debug!("point certificate failed re-validation at {x0:?}");
                    FeasibilityCertificate::infeasible(LpStatus::ValidationFailed)
                }
            }
            LpOutcome::Infeasible => FeasibilityCertificate::infeasible(LpStatus::Infeasible),
            LpOutcome::Unbounded => FeasibilityCertificate::infeasible(LpStatus::Unbounded),
            LpOutcome::Failed(msg) => {
                log::debug!("point feasibility LP failed ({msg}); treating as infeasible");
                FeasibilityCertificate::infeasible(LpStatus::NumericalFailure)
            }
        }
    }

    /// Re-checks a point certificate by forward prediction.
    pub fn validate_point(&self, x0: &DVector<f64>, u: &DVector<f64>, tol: f64) -> bool {
        if u.len() != self.n_inputs() || !self.inputs_admissible(u, tol) {
            return false;
        }
        let x0_norm = x0.amax();
        let states = self.bundle.predict(x0, u);
        states.iter().enumerate().all(|(k, xk)| {
            let ax = &self.normals * xk;
            ax.iter().zip(self.eroded_rhs(k, x0_norm)).all(|(v, b)| *v <= b + tol)
        })
    }

    fn inputs_admissible(&self, u: &DVector<f64>, tol: f64) -> bool {
        let m = self.bundle.m();
        u.as_slice().chunks(m).all(|uj| self.input.contains(uj, tol))
    }

    /// Free-initial-state program: is there `x₀` with `r_dᵀx₀ = offset` and inputs keeping the
    /// nominal trajectory in the un-eroded `K` at every sampling step?
    ///
    /// Unlike [`feasible`](Self::feasible), an LP failure here is reported with
    /// [`LpStatus::NumericalFailure`] and must not be read as infeasibility by callers that
    /// build outer approximations.
    pub fn support_feasible(&self, direction: &DVector<f64>, offset: f64) -> FeasibilityCertificate {
        let n = self.bundle.n();
        let nu = self.n_inputs();
        let mut lp = LinearProgram::new(nu + n);
        self.apply_input_set(&mut lp, 0);
        for k in 0..=self.steps() {
            for (i, b) in self.offsets.iter().enumerate() {
                let mut terms: Vec<(usize, f64)> = self.fh[k].row(i).iter().copied().enumerate().collect();
                terms.extend(self.fp[k].row(i).iter().enumerate().map(|(j, c)| (nu + j, *c)));
                lp.add_sparse_row(terms, Cmp::Le, *b);
            }
        }
        lp.add_row_at(nu, direction.as_slice(), Cmp::Eq, offset);

        match lp.solve() {
            LpOutcome::Solved { x, .. } => {
                let u = DVector::from_column_slice(&x[..nu]);
                let x0 = DVector::from_column_slice(&x[nu..]);
                if self.validate_support(direction, offset, &x0, &u, VALIDATION_TOL) {
                    FeasibilityCertificate {
                        feasible: true,
                        u_star: Some(u),
                        x0_star: Some(x0),
                        lp_status: LpStatus::Optimal,
                    }
                } else {
                    FeasibilityCertificate::infeasible(LpStatus::ValidationFailed)
                }
            }
            LpOutcome::Infeasible => FeasibilityCertificate::infeasible(LpStatus::Infeasible),
            LpOutcome::Unbounded => FeasibilityCertificate::infeasible(LpStatus::Unbounded),
            LpOutcome::Failed(msg) => {
                log::warn!("support LP failed: {msg}");
                FeasibilityCertificate::infeasible(LpStatus::NumericalFailure)
            }
        }
    }

    /// Re-checks a free-initial-state certificate by forward prediction.
    pub fn validate_support(
        &self,
        direction: &DVector<f64>,
        offset: f64,
        x0: &DVector<f64>,
        u: &DVector<f64>,
        tol: f64,
    ) -> bool {
        if (direction.dot(x0) - offset).abs() > tol || !self.inputs_admissible(u, tol) {
            return false;
        }
        self.bundle.predict(x0, u).iter().all(|xk| {
            let ax = &self.normals * xk;
            ax.iter().zip(&self.offsets).all(|(v, b)| *v <= b + tol)
        })
    }

    /// Outer-approximation facet along `direction` (unit), starting from the known-feasible
    /// vertex `v_i` with its point certificate `u_i`.
    ///
    /// Bisects the hyperplane offset between `direction·v_i` and `ρ_K(direction)` until the gap
    /// is below `eps_o`. The returned offset is the last infeasible one; every point of the
    /// kernel (at the sampling instants) satisfies `directionᵀx <= offset`. Any LP failure aborts
    /// the facet.
    pub fn overapprox_facet(
        &self,
        direction: &DVector<f64>,
        v_i: &DVector<f64>,
        u_i: &DVector<f64>,
        k_support: f64,
        eps_o: f64,
    ) -> Result<Facet> {
        let mut lo = direction.dot(v_i);
        let mut best = (v_i.clone(), u_i.clone());
        if lo > k_support + VALIDATION_TOL {
            return Err(Error::Degenerate("vertex lies beyond the support of K".into()));
        }

        let abort = |c: &FeasibilityCertificate| -> Result<()> {
            match c.lp_status {
                LpStatus::NumericalFailure | LpStatus::ValidationFailed | LpStatus::Unbounded => Err(
                    Error::LpNumericalFailure(format!("support program returned {:?}", c.lp_status)),
                ),
                _ => Ok(()),
            }
        };

        let top = self.support_feasible(direction, k_support);
        abort(&top)?;
        if top.feasible {
            return Ok(Facet {
                normal: direction.clone(),
                offset: k_support,
                feasible_offset: k_support,
                x0_star: top.x0_star.expect("feasible certificate"),
                u_star: top.u_star.expect("feasible certificate"),
            });
        }
        let mut hi = k_support;
        while hi - lo >= eps_o {
            let mid = 0.5 * (lo + hi);
            let c = self.support_feasible(direction, mid);
            abort(&c)?;
            if c.feasible {
                lo = mid;
                best = (c.x0_star.expect("feasible certificate"), c.u_star.expect("feasible certificate"));
            } else {
                hi = mid;
            }
        }
        Ok(Facet {
            normal: direction.clone(),
            offset: hi,
            feasible_offset: lo,
            x0_star: best.0,
            u_star: best.1,
        })
    }
}

/// One facet of the outer approximation with its stored certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub normal: DVector<f64>,
    /// Last infeasible offset; the facet is `normalᵀx <= offset`.
    pub offset: f64,
    /// Last feasible offset (equals `offset` when the kernel touches `∂K`).
    pub feasible_offset: f64,
    /// Support-vector estimate at `feasible_offset`.
    pub x0_star: DVector<f64>,
    pub u_star: DVector<f64>,
}

/// Convenience wrapper: builds the program and runs a single point query.
pub fn feasible(
    x0: &DVector<f64>,
    bundle: &DiscretizationBundle,
    problem: &SampledDataProblem,
) -> Result<FeasibilityCertificate> {
    Ok(FeasibilityProgram::new(bundle, problem)?.feasible(x0))
}

/// Bisection between a feasible anchor `a` and an endpoint `b`.
///
/// Returns the last feasible point `c` together with its certificate; on return the running
/// infeasible endpoint is within `eps` (2-norm) of `c`, or `max_depth` midpoints have been
/// tested. `anchor` may carry a known certificate for `a`, which skips the initial check.
pub fn bisect<C>(
    a: &DVector<f64>,
    b: &DVector<f64>,
    eps: f64,
    max_depth: Option<usize>,
    anchor: Option<C>,
    mut oracle: impl FnMut(&DVector<f64>) -> Option<C>,
) -> Result<(DVector<f64>, C)> {
    let cert = match anchor {
        Some(c) => c,
        None => oracle(a).ok_or(Error::InfeasibleAnchor)?,
    };
    let (mut lo, mut hi, mut best) = (a.clone(), b.clone(), cert);
    let mut depth = 0;
    while (&hi - &lo).norm() >= eps {
        if max_depth.is_some_and(|d| depth >= d) {
            break;
        }
        depth += 1;
        let mid = (&lo + &hi) * 0.5;
        match oracle(&mid) {
            Some(c) => {
                lo = mid;
                best = c;
            }
            None => hi = mid,
        }
    }
    Ok((lo, best))
}

/// [`bisect`] with a plain membership oracle.
pub fn bisection_feasibility(
    a: &DVector<f64>,
    b: &DVector<f64>,
    eps: f64,
    mut oracle: impl FnMut(&DVector<f64>) -> bool,
) -> Result<DVector<f64>> {
    bisect(a, b, eps, None, None, |x| oracle(x).then_some(())).map(|(p, _)| p)
}
