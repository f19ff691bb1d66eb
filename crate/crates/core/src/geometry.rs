//! Convex polytopes in halfspace (H) and vertex (V) representation.
//!
//! Under-approximations are kept as vertex lists and over-approximations as
//! facet lists; nothing here converts between the two representations.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::lp::{Cmp, LinearProgram, LpOutcome};

/// Tolerance for point-in-halfspace checks.
pub const CONTAINMENT_TOL: f64 = 1e-9;

/// Inradius at or below this counts as an empty (not full-dimensional) set.
const EMPTY_RADIUS: f64 = 1e-12;

/// `{x | normalᵀx <= offset}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: DVector<f64>, offset: f64) -> Result<Self> {
        if normal.iter().all(|v| *v == 0.0) {
            return Err(Error::Degenerate("halfspace normal is zero".into()));
        }
        Ok(Self { normal, offset })
    }

    /// `offset - normalᵀx`; nonnegative inside.
    pub fn slack(&self, x: &DVector<f64>) -> f64 {
        self.offset - self.normal.dot(x)
    }
}

/// `{origin + s·direction | s >= 0}` with a unit direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    origin: DVector<f64>,
    direction: DVector<f64>,
}

impl Ray {
    /// Normalizes `direction`; fails on a zero vector.
    pub fn new(origin: DVector<f64>, direction: DVector<f64>) -> Result<Self> {
        if origin.len() != direction.len() {
            return Err(Error::DimensionMismatch(format!(
                "ray origin has {} entries, direction {}",
                origin.len(),
                direction.len()
            )));
        }
        let norm = direction.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Degenerate("ray direction has zero length".into()));
        }
        Ok(Self {
            origin,
            direction: direction / norm,
        })
    }

    pub fn origin(&self) -> &DVector<f64> {
        &self.origin
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }

    pub fn at(&self, s: f64) -> DVector<f64> {
        &self.origin + &self.direction * s
    }
}

/// A convex polytope carrying an H-rep, a V-rep, or both.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    dim: usize,
    hrep: Option<Vec<Halfspace>>,
    vrep: Option<Vec<DVector<f64>>>,
}

impl Polytope {
    pub fn from_halfspaces(dim: usize, facets: Vec<Halfspace>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("polytope dimension"));
        }
        if let Some(bad) = facets.iter().find(|h| h.normal.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "facet normal has {} entries, expected {dim}",
                bad.normal.len()
            )));
        }
        if facets.iter().any(|h| h.normal.iter().all(|v| *v == 0.0)) {
            return Err(Error::Degenerate("halfspace normal is zero".into()));
        }
        Ok(Self {
            dim,
            hrep: Some(facets),
            vrep: None,
        })
    }

    pub fn from_vertices(vertices: Vec<DVector<f64>>) -> Result<Self> {
        let dim = vertices.first().ok_or(Error::Empty("vertex list"))?.len();
        if dim == 0 {
            return Err(Error::Empty("polytope dimension"));
        }
        if vertices.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch("vertices of mixed dimension".into()));
        }
        Ok(Self {
            dim,
            hrep: None,
            vrep: Some(vertices),
        })
    }

    /// Attaches a V-rep to an H-rep polytope. The caller vouches that both describe the same set.
    pub fn with_vertices(mut self, vertices: Vec<DVector<f64>>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Empty("vertex list"));
        }
        if vertices.iter().any(|v| v.len() != self.dim) {
            return Err(Error::DimensionMismatch("vertex dimension".into()));
        }
        self.vrep = Some(vertices);
        Ok(self)
    }

    /// Axis-aligned box `lo <= x <= hi` in H-rep.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch("box bounds".into()));
        }
        if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidProblem("box lower bound exceeds upper bound".into()));
        }
        let n = lo.len();
        let mut facets = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            facets.push(Halfspace {
                normal: e.clone(),
                offset: hi[i],
            });
            facets.push(Halfspace {
                normal: -e,
                offset: -lo[i],
            });
        }
        Self::from_halfspaces(n, facets)
    }

    /// `{x | ‖x‖∞ <= r}`.
    pub fn inf_ball(n: usize, r: f64) -> Result<Self> {
        Self::boxed(&vec![-r; n], &vec![r; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hrep(&self) -> Option<&[Halfspace]> {
        self.hrep.as_deref()
    }

    pub fn vrep(&self) -> Option<&[DVector<f64>]> {
        self.vrep.as_deref()
    }

    pub fn require_hrep(&self) -> Result<&[Halfspace]> {
        self.hrep()
            .ok_or_else(|| Error::InvalidProblem("operation needs an H-representation".into()))
    }

    pub fn require_vrep(&self) -> Result<&[DVector<f64>]> {
        self.vrep()
            .ok_or_else(|| Error::InvalidProblem("operation needs a V-representation".into()))
    }

    /// Membership test against the H-rep (or, for V-rep-only polytopes, an LP on the hull).
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        if let Some(h) = self.hrep() {
            return h.iter().all(|f| f.slack(x) >= -tol);
        }
        let Some(v) = self.vrep() else { return false };
        // x = Σ λ_j v_j, Σ λ_j = 1, λ >= 0
        let k = v.len();
        let mut lp = LinearProgram::new(k);
        for j in 0..k {
            lp.set_bounds(j, 0.0, f64::INFINITY);
        }
        for i in 0..self.dim {
            let row: Vec<f64> = v.iter().map(|p| p[i]).collect();
            lp.add_row(&row, Cmp::Le, x[i] + tol);
            lp.add_row(&row, Cmp::Ge, x[i] - tol);
        }
        lp.add_row(&vec![1.0; k], Cmp::Eq, 1.0);
        matches!(lp.solve(), LpOutcome::Solved { .. })
    }

    /// Returns `(lo, hi)` if the H-rep consists only of signed coordinate facets bounding every axis.
    pub fn as_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let facets = self.hrep()?;
        let n = self.dim;
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        for f in facets {
            let mut nz = f.normal.iter().enumerate().filter(|(_, v)| **v != 0.0);
            let (i, &c) = nz.next()?;
            if nz.next().is_some() {
                return None;
            }
            if c > 0.0 {
                hi[i] = hi[i].min(f.offset / c);
            } else {
                lo[i] = lo[i].max(f.offset / c);
            }
        }
        if lo.iter().chain(hi.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        Some((lo, hi))
    }

    /// The same set in coordinates `x' = x ./ factors` (component-wise).
    pub fn rescaled(&self, factors: &DVector<f64>) -> Self {
        let hrep = self.hrep.as_ref().map(|h| {
            h.iter()
                .map(|f| Halfspace {
                    normal: f.normal.component_mul(factors),
                    offset: f.offset,
                })
                .collect()
        });
        let vrep = self
            .vrep
            .as_ref()
            .map(|v| v.iter().map(|p| p.component_div(factors)).collect());
        Self {
            dim: self.dim,
            hrep,
            vrep,
        }
    }

    /// Exact Pontryagin difference `C ⊖ B∞(0, r)`: each offset shrinks by `r‖a‖₁`.
    ///
    /// Fails with [`Error::EmptyErosion`] when the result has no interior.
    pub fn erode_by_inf_ball(&self, r: f64) -> Result<Polytope> {
        if !(r >= 0.0) {
            return Err(Error::InvalidProblem(format!("erosion radius {r} is negative")));
        }
        let eroded = self.eroded_unchecked(r)?;
        if r > 0.0 {
            let (_, radius) = eroded.chebyshev_center().map_err(|e| match e {
                Error::Empty(_) => Error::EmptyErosion { step: None },
                other => other,
            })?;
            if radius <= EMPTY_RADIUS {
                return Err(Error::EmptyErosion { step: None });
            }
        }
        Ok(eroded)
    }

    /// Erosion without the emptiness check.
    pub fn eroded_unchecked(&self, r: f64) -> Result<Polytope> {
        let facets = self
            .require_hrep()?
            .iter()
            .map(|f| Halfspace {
                normal: f.normal.clone(),
                offset: f.offset - r * f.normal.lp_norm(1),
            })
            .collect();
        Polytope::from_halfspaces(self.dim, facets)
    }

    /// Point where `ray` leaves the polytope.
    pub fn find_intersection_on_boundary(&self, ray: &Ray) -> Result<DVector<f64>> {
        let facets = self.require_hrep()?;
        let (origin, dir) = (ray.origin(), ray.direction());
        if origin.len() != self.dim {
            return Err(Error::DimensionMismatch("ray dimension".into()));
        }
        let mut best = f64::INFINITY;
        for f in facets {
            let slack = f.slack(origin);
            if slack < -CONTAINMENT_TOL {
                return Err(Error::OriginOutside);
            }
            let rate = f.normal.dot(dir);
            if rate > 0.0 {
                best = best.min(slack.max(0.0) / rate);
            }
        }
        if !best.is_finite() {
            return Err(Error::Unbounded);
        }
        Ok(ray.at(best))
    }

    /// `max ℓᵀx` over the polytope and a maximizer. Exact on the V-rep, an LP on the H-rep.
    pub fn support_function(&self, l: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        if l.len() != self.dim {
            return Err(Error::DimensionMismatch("support direction".into()));
        }
        if let Some(v) = self.vrep() {
            let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
            for (j, p) in v.iter().enumerate() {
                let val = l.dot(p);
                if val > best {
                    best = val;
                    arg = j;
                }
            }
            return Ok((best, v[arg].clone()));
        }
        let facets = self.require_hrep()?;
        let mut lp = LinearProgram::new(self.dim);
        lp.maximize(l.as_slice());
        for f in facets {
            lp.add_row(f.normal.as_slice(), Cmp::Le, f.offset);
        }
        match lp.solve() {
            LpOutcome::Solved { x, .. } => {
                let x = DVector::from_vec(x);
                Ok((l.dot(&x), x))
            }
            LpOutcome::Unbounded => Err(Error::Unbounded),
            LpOutcome::Infeasible => Err(Error::Empty("polytope")),
            LpOutcome::Failed(msg) => Err(Error::LpNumericalFailure(msg)),
        }
    }

    /// Center and radius of the largest inscribed 2-norm ball.
    pub fn chebyshev_center(&self) -> Result<(DVector<f64>, f64)> {
        let facets = self.require_hrep()?;
        let n = self.dim;
        let mut lp = LinearProgram::new(n + 1);
        let mut obj = vec![0.0; n + 1];
        obj[n] = 1.0;
        lp.maximize(&obj);
        lp.set_bounds(n, 0.0, f64::INFINITY);
        for f in facets {
            let mut row: Vec<f64> = f.normal.iter().copied().collect();
            row.push(f.normal.norm());
            lp.add_row(&row, Cmp::Le, f.offset);
        }
        match lp.solve() {
            LpOutcome::Solved { x, .. } => {
                let r = x[n];
                Ok((DVector::from_column_slice(&x[..n]), r))
            }
            LpOutcome::Unbounded => Err(Error::Unbounded),
            LpOutcome::Infeasible => Err(Error::Empty("polytope")),
            LpOutcome::Failed(msg) => Err(Error::LpNumericalFailure(msg)),
        }
    }
}

/// Arithmetic mean of a vertex list.
pub fn centroid(vertices: &[DVector<f64>]) -> Result<DVector<f64>> {
    let first = vertices.first().ok_or(Error::Empty("vertex list"))?;
    let mut sum = DVector::zeros(first.len());
    for v in vertices {
        if v.len() != first.len() {
            return Err(Error::DimensionMismatch("vertices of mixed dimension".into()));
        }
        sum += v;
    }
    Ok(sum / vertices.len() as f64)
}

/// `max_{ℓ∈L} |ρ_W(ℓ) − ρ_V(ℓ)|`, a lower bound on the Hausdorff distance of `V ⊆ W`.
pub fn hausdorff_estimate(
    inner: &Polytope,
    outer: &Polytope,
    directions: &[DVector<f64>],
) -> Result<f64> {
    if directions.is_empty() {
        return Err(Error::Empty("direction list"));
    }
    inner.require_vrep()?;
    let mut best: f64 = 0.0;
    for l in directions {
        let (rv, _) = inner.support_function(l)?;
        let (rw, _) = outer.support_function(l)?;
        if rw < rv - 1e-7 {
            log::warn!("hausdorff_estimate: inner set leaves the outer set along {l:?}");
        }
        best = best.max((rw - rv).abs());
    }
    Ok(best)
}

/// Result of [`min_vertex_to_facet`].
#[derive(Debug, Clone, PartialEq)]
pub struct VertexFacetGap {
    /// Vertex whose nearest facet hyperplane is farthest away.
    pub vertex: usize,
    /// Index of that vertex's nearest facet.
    pub facet: usize,
    /// Orthogonal projection of the vertex onto that facet's hyperplane.
    pub foot: DVector<f64>,
    /// Signed distance; negative when the vertex violates the facet.
    pub distance: f64,
    /// Vertices found outside the polytope.
    pub outside: Vec<usize>,
}

/// For each vertex, the distance to its nearest facet hyperplane of `outer`; returns the vertex
/// that maximizes it. Ties go to the lowest index.
pub fn min_vertex_to_facet(vertices: &[DVector<f64>], outer: &Polytope) -> Result<VertexFacetGap> {
    let facets = outer.require_hrep()?;
    if vertices.is_empty() {
        return Err(Error::Empty("vertex list"));
    }
    if facets.is_empty() {
        return Err(Error::Empty("facet list"));
    }
    let mut best: Option<(usize, usize, f64)> = None;
    let mut outside = Vec::new();
    for (j, v) in vertices.iter().enumerate() {
        let (fi, d) = facets
            .iter()
            .enumerate()
            .map(|(i, f)| (i, f.slack(v) / f.normal.norm()))
            .fold((0, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
        if d < -CONTAINMENT_TOL {
            outside.push(j);
        }
        if best.map_or(true, |(_, _, bd)| d > bd) {
            best = Some((j, fi, d));
        }
    }
    let (vertex, facet, distance) = best.expect("nonempty");
    let f = &facets[facet];
    let unit = &f.normal / f.normal.norm();
    let foot = &vertices[vertex] + unit * distance;
    Ok(VertexFacetGap {
        vertex,
        facet,
        foot,
        distance,
        outside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn square(r: f64) -> Polytope {
        Polytope::inf_ball(2, r).unwrap()
    }

    fn square_corners(r: f64) -> Vec<DVector<f64>> {
        vec![dvector![r, r], dvector![-r, r], dvector![-r, -r], dvector![r, -r]]
    }

    #[test]
    fn erosion_of_square() {
        let e = square(0.5).erode_by_inf_ball(0.1).unwrap();
        assert_eq!(e.as_box().unwrap(), (vec![-0.4, -0.4], vec![0.4, 0.4]));
        assert_eq!(square(0.5).erode_by_inf_ball(0.0).unwrap(), square(0.5));
        assert_eq!(
            square(0.5).erode_by_inf_ball(0.6),
            Err(Error::EmptyErosion { step: None })
        );
    }

    #[test]
    fn erosion_uses_one_norm_of_normals() {
        let diamond = Polytope::from_halfspaces(
            2,
            vec![
                Halfspace::new(dvector![1.0, 1.0], 1.0).unwrap(),
                Halfspace::new(dvector![-1.0, 1.0], 1.0).unwrap(),
                Halfspace::new(dvector![1.0, -1.0], 1.0).unwrap(),
                Halfspace::new(dvector![-1.0, -1.0], 1.0).unwrap(),
            ],
        )
        .unwrap();
        let e = diamond.erode_by_inf_ball(0.25).unwrap();
        for f in e.hrep().unwrap() {
            assert_abs_diff_eq!(f.offset, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn ray_boundary_intersection() {
        let k = square(0.5);
        let hit = |o: DVector<f64>, d: DVector<f64>| {
            k.find_intersection_on_boundary(&Ray::new(o, d).unwrap()).unwrap()
        };
        assert_abs_diff_eq!(hit(dvector![0.0, 0.0], dvector![1.0, 0.0]), dvector![0.5, 0.0], epsilon = 1e-15);
        assert_abs_diff_eq!(hit(dvector![0.0, 0.0], dvector![1.0, 1.0]), dvector![0.5, 0.5], epsilon = 1e-15);
        assert_abs_diff_eq!(hit(dvector![0.25, 0.0], dvector![1.0, 0.0]), dvector![0.5, 0.0], epsilon = 1e-15);

        let outside = Ray::new(dvector![0.7, 0.0], dvector![1.0, 0.0]).unwrap();
        assert_eq!(k.find_intersection_on_boundary(&outside), Err(Error::OriginOutside));
        let half = Polytope::from_halfspaces(2, vec![Halfspace::new(dvector![1.0, 0.0], 1.0).unwrap()]).unwrap();
        let away = Ray::new(dvector![0.0, 0.0], dvector![-1.0, 0.0]).unwrap();
        assert_eq!(half.find_intersection_on_boundary(&away), Err(Error::Unbounded));
    }

    #[test]
    fn support_function_both_reps() {
        let (v, _) = square(0.5).support_function(&dvector![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);

        let tri = Polytope::from_vertices(vec![dvector![0.0, 0.0], dvector![1.0, 0.0], dvector![0.0, 1.0]]).unwrap();
        let (v, arg) = tri.support_function(&dvector![1.0, 0.0]).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(arg, dvector![1.0, 0.0]);
        let (v, _) = tri.support_function(&dvector![0.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);

        let half = Polytope::from_halfspaces(2, vec![Halfspace::new(dvector![1.0, 0.0], 1.0).unwrap()]).unwrap();
        assert_eq!(half.support_function(&dvector![0.0, 1.0]), Err(Error::Unbounded));
    }

    #[test]
    fn centers() {
        let c = centroid(&[dvector![0.0, 0.0], dvector![1.0, 0.0], dvector![0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(c, dvector![1.0 / 3.0, 1.0 / 3.0], epsilon = 1e-15);
        assert_eq!(centroid(&[dvector![2.0, 3.0]]).unwrap(), dvector![2.0, 3.0]);
        assert_eq!(centroid(&[]), Err(Error::Empty("vertex list")));

        let (c, r) = square(0.5).chebyshev_center().unwrap();
        assert_abs_diff_eq!(r, 0.5, epsilon = 1e-9);
        assert!(c.norm() < 1e-9);
    }

    #[test]
    fn hausdorff_on_nested_squares() {
        let inner = Polytope::from_vertices(square_corners(0.4)).unwrap();
        let axes = vec![dvector![1.0, 0.0], dvector![-1.0, 0.0], dvector![0.0, 1.0], dvector![0.0, -1.0]];
        assert_abs_diff_eq!(hausdorff_estimate(&inner, &square(0.5), &axes).unwrap(), 0.1, epsilon = 1e-9);

        let same = Polytope::from_vertices(square_corners(0.5)).unwrap();
        assert_abs_diff_eq!(hausdorff_estimate(&same, &square(0.5), &axes).unwrap(), 0.0, epsilon = 1e-9);

        // True Hausdorff distance between the two squares is 0.1·√2 (corner to corner).
        let diag: Vec<_> = (0..64)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                dvector![t.cos(), t.sin()]
            })
            .collect();
        let est = hausdorff_estimate(&inner, &square(0.5), &diag).unwrap();
        assert!(est <= 0.1 * 2f64.sqrt() + 1e-9);
        assert!(est >= 0.1 - 1e-9);
    }

    #[test]
    fn hausdorff_nondecreasing_in_direction_set() {
        // Inner: 32-gon hull of a disc of radius 0.45; outer: square 0.5.
        let disc: Vec<_> = (0..32)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / 32.0;
                dvector![0.45 * t.cos(), 0.45 * t.sin()]
            })
            .collect();
        let inner = Polytope::from_vertices(disc).unwrap();
        let dirs = |m: usize| -> Vec<DVector<f64>> {
            (0..m)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                    dvector![t.cos(), t.sin()]
                })
                .collect()
        };
        let mut prev = 0.0;
        for m in [4, 8, 16, 32, 64] {
            let est = hausdorff_estimate(&inner, &square(0.5), &dirs(m)).unwrap();
            assert!(est >= prev - 1e-12, "m={m}: {est} < {prev}");
            prev = est;
        }
    }

    #[test]
    fn vertex_to_facet_gaps() {
        let gap = min_vertex_to_facet(&square_corners(0.4), &square(0.5)).unwrap();
        assert_eq!(gap.vertex, 0);
        assert_abs_diff_eq!(gap.distance, 0.1, epsilon = 1e-12);
        assert!(gap.outside.is_empty());

        let gap = min_vertex_to_facet(&[dvector![0.5, 0.0]], &square(0.5)).unwrap();
        assert_abs_diff_eq!(gap.distance, 0.0, epsilon = 1e-15);

        let gap = min_vertex_to_facet(&[dvector![0.4, 0.0]], &square(0.5)).unwrap();
        assert_abs_diff_eq!(gap.foot, dvector![0.5, 0.0], epsilon = 1e-12);
        assert_abs_diff_eq!(gap.distance, 0.1, epsilon = 1e-12);

        let gap = min_vertex_to_facet(&[dvector![0.6, 0.0]], &square(0.5)).unwrap();
        assert!(gap.distance < 0.0);
        assert_eq!(gap.outside, vec![0]);
    }

    #[test]
    fn box_detection_and_rescaling() {
        let b = Polytope::boxed(&[-1.0, 0.0], &[2.0, 3.0]).unwrap();
        assert_eq!(b.as_box().unwrap(), (vec![-1.0, 0.0], vec![2.0, 3.0]));
        let scaled = b.rescaled(&dvector![2.0, 1.0]);
        assert_eq!(scaled.as_box().unwrap(), (vec![-0.5, 0.0], vec![1.0, 3.0]));
        assert!(b.contains(&dvector![1.9, 0.1], 0.0));
        assert!(!b.contains(&dvector![2.1, 0.1], 0.0));
    }

    #[test]
    fn vrep_containment() {
        let tri = Polytope::from_vertices(vec![dvector![0.0, 0.0], dvector![1.0, 0.0], dvector![0.0, 1.0]]).unwrap();
        assert!(tri.contains(&dvector![0.2, 0.2], 1e-9));
        assert!(!tri.contains(&dvector![0.8, 0.8], 1e-9));
    }
}
