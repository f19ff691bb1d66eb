//! Exact convex-hull volumes in two and three dimensions.
//!
//! Used for evaluation and projection output only; the kernel algorithms never
//! need a hull.

use std::collections::HashSet;

use nalgebra::{DVector, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Polytope;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullVolume {
    pub volume: f64,
    /// Set when the points do not span the ambient space.
    pub degenerate: bool,
}

/// Volume (area in 2D) of the convex hull of `points`, for dimension 2 or 3.
pub fn hull_volume_lowdim(points: &[DVector<f64>]) -> Result<HullVolume> {
    let dim = points.first().ok_or(Error::Empty("point list"))?.len();
    match dim {
        2 => {
            let pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
            let hull = convex_hull_2d(&pts);
            let area = polygon_area(&hull);
            Ok(HullVolume {
                volume: area,
                degenerate: hull.len() < 3 || area <= 1e-14,
            })
        }
        3 => {
            let pts: Vec<Vector3<f64>> = points.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect();
            Ok(hull_volume_3d(&pts))
        }
        _ => Err(Error::InvalidProblem(format!(
            "hull volume is only computed for n in {{2, 3}}, got {dim}"
        ))),
    }
}

/// Counter-clockwise hull (Andrew's monotone chain); collinear points dropped.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Shoelace area of a simple polygon given in order.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s.abs()
}

/// Vertices of a bounded 2D H-polytope by pairwise line intersection.
///
/// Quadratic in the facet count; intended for small evaluation problems.
pub fn polygon_from_hrep_2d(poly: &Polytope) -> Result<Vec<[f64; 2]>> {
    if poly.dim() != 2 {
        return Err(Error::DimensionMismatch("polygon_from_hrep_2d needs n = 2".into()));
    }
    let facets = poly.require_hrep()?;
    let mut candidates = Vec::new();
    for i in 0..facets.len() {
        for j in (i + 1)..facets.len() {
            let (a, b) = (&facets[i], &facets[j]);
            let det = a.normal[0] * b.normal[1] - a.normal[1] * b.normal[0];
            if det.abs() < 1e-14 {
                continue;
            }
            let x = (a.offset * b.normal[1] - b.offset * a.normal[1]) / det;
            let y = (a.normal[0] * b.offset - b.normal[0] * a.offset) / det;
            let p = DVector::from_vec(vec![x, y]);
            let scale = 1.0 + x.abs().max(y.abs());
            if facets.iter().all(|f| f.slack(&p) >= -1e-10 * scale) {
                candidates.push([x, y]);
            }
        }
    }
    Ok(convex_hull_2d(&candidates))
}

fn hull_volume_3d(points: &[Vector3<f64>]) -> HullVolume {
    let degenerate = HullVolume {
        volume: 0.0,
        degenerate: true,
    };
    if points.len() < 4 {
        return degenerate;
    }
    let scale = points.iter().map(|p| p.amax()).fold(0.0, f64::max).max(1e-300);
    let eps = 1e-12 * scale;

    // Initial tetrahedron: farthest-point heuristics.
    let i0 = 0;
    let Some(i1) = argmax(points, |p| (p - points[i0]).norm()).filter(|&i| (points[i] - points[i0]).norm() > eps) else {
        return degenerate;
    };
    let line = points[i1] - points[i0];
    let Some(i2) = argmax(points, |p| line.cross(&(p - points[i0])).norm())
        .filter(|&i| line.cross(&(points[i] - points[i0])).norm() > eps * line.norm())
    else {
        return degenerate;
    };
    let normal = line.cross(&(points[i2] - points[i0]));
    let Some(i3) = argmax(points, |p| normal.dot(&(p - points[i0])).abs())
        .filter(|&i| normal.dot(&(points[i] - points[i0])).abs() > eps * normal.norm())
    else {
        return degenerate;
    };

    let interior = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let add_face = |faces: &mut Vec<[usize; 3]>, a: usize, b: usize, c: usize| {
        let n = (points[b] - points[a]).cross(&(points[c] - points[a]));
        if n.dot(&(interior - points[a])) > 0.0 {
            faces.push([a, c, b]);
        } else {
            faces.push([a, b, c]);
        }
    };
    add_face(&mut faces, i0, i1, i2);
    add_face(&mut faces, i0, i1, i3);
    add_face(&mut faces, i0, i2, i3);
    add_face(&mut faces, i1, i2, i3);

    let seed = [i0, i1, i2, i3];
    for (p_idx, p) in points.iter().enumerate() {
        if seed.contains(&p_idx) {
            continue;
        }
        let visible: Vec<bool> = faces
            .iter()
            .map(|f| {
                let n = (points[f[1]] - points[f[0]]).cross(&(points[f[2]] - points[f[0]]));
                n.dot(&(p - points[f[0]])) > eps * n.norm()
            })
            .collect();
        if !visible.iter().any(|v| *v) {
            continue;
        }
        let mut visible_edges = HashSet::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, v)| **v) {
            for k in 0..3 {
                visible_edges.insert((f[k], f[(k + 1) % 3]));
            }
        }
        let mut next = Vec::with_capacity(faces.len() + 4);
        let mut horizon = Vec::new();
        for (f, vis) in faces.iter().zip(&visible) {
            if *vis {
                for k in 0..3 {
                    let (a, b) = (f[k], f[(k + 1) % 3]);
                    if !visible_edges.contains(&(b, a)) {
                        horizon.push((a, b));
                    }
                }
            } else {
                next.push(*f);
            }
        }
        for (a, b) in horizon {
            next.push([a, b, p_idx]);
        }
        faces = next;
    }

    let volume: f64 = faces
        .iter()
        .map(|f| {
            let (a, b, c) = (points[f[0]] - interior, points[f[1]] - interior, points[f[2]] - interior);
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum();
    HullVolume {
        volume: volume.abs(),
        degenerate: false,
    }
}

fn argmax(points: &[Vector3<f64>], f: impl Fn(&Vector3<f64>) -> f64) -> Option<usize> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, f(p)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}
