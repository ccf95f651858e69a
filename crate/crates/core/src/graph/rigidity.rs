//! Reconstruction of a squared-cycle embedding from its edge lengths.
//!
//! Vertices `0`, `1` and `n - 1` form a triangle in the edge set and fix the
//! frame: `0` at the origin, `1` on the positive x axis, `n - 1` above it.
//! Every other vertex `i` is adjacent to `i - 2` and `i - 1`, so it lies on
//! one of the two intersections of the circles around them. All branches
//! are explored and only those consistent with every edge length survive.

use crate::error::{MatchError, Result};
use crate::geometry::{Point, PointPattern};

use super::{build_squared_cycle, complement_edges, MatchGraph};

/// Intersections of the circle of radius `r0` about `c0` with the circle of
/// radius `r1` about `c1`. A tangency within `slack` yields the same point twice.
fn circle_intersections(c0: Point, r0: f64, c1: Point, r1: f64, slack: f64) -> Option<[Point; 2]> {
    let (dx, dy) = (c1.x - c0.x, c1.y - c0.y);
    let d = dx.hypot(dy);
    if d == 0.0 {
        return None;
    }
    let a = (r0 * r0 - r1 * r1 + d * d) / (2.0 * d);
    let mut h2 = r0 * r0 - a * a;
    if h2 < 0.0 {
        if h2 < -slack {
            return None;
        }
        h2 = 0.0;
    }
    let h = h2.sqrt();
    let (ux, uy) = (dx / d, dy / d);
    let base = Point::new(c0.x + a * ux, c0.y + a * uy);
    Some([
        Point::new(base.x - h * uy, base.y + h * ux),
        Point::new(base.x + h * uy, base.y - h * ux),
    ])
}

/// All planar realizations (in the anchored frame) of the squared cycle on
/// `0..n` whose edge lengths match `length(i, j)` within `tol`.
pub fn realize_squared_cycle(
    n: usize,
    length: impl Fn(usize, usize) -> f64,
    tol: f64,
) -> Result<Vec<Vec<Point>>> {
    let g = build_squared_cycle(n)?;
    let last = n - 1;
    let slack = tol.max(1e-12);

    let mut pos = vec![None::<Point>; n];
    pos[0] = Some(Point::new(0.0, 0.0));
    pos[1] = Some(Point::new(length(0, 1), 0.0));
    let anchor = circle_intersections(
        pos[0].unwrap(),
        length(0, last),
        pos[1].unwrap(),
        length(1, last),
        slack,
    )
    .ok_or_else(|| MatchError::InvalidInput("anchor triangle is not realizable".into()))?;
    // first candidate lies to the left of 0 -> 1, i.e. above the x axis
    pos[last] = Some(anchor[0]);

    let mut out = Vec::new();
    extend(&g, &length, tol, slack, 2, &mut pos, &mut out);
    Ok(out)
}

fn consistent(g: &MatchGraph, length: &impl Fn(usize, usize) -> f64, tol: f64, v: usize, pos: &[Option<Point>]) -> bool {
    let p = pos[v].expect("placed");
    g.edges()
        .iter()
        .filter_map(|&(a, b)| match (a == v, b == v) {
            (true, _) => Some(b),
            (_, true) => Some(a),
            _ => None,
        })
        .filter_map(|u| pos[u].map(|q| (u, q)))
        .all(|(u, q)| (p.dist(&q) - length(v, u)).abs() <= tol)
}

fn extend(
    g: &MatchGraph,
    length: &impl Fn(usize, usize) -> f64,
    tol: f64,
    slack: f64,
    i: usize,
    pos: &mut Vec<Option<Point>>,
    out: &mut Vec<Vec<Point>>,
) {
    let n = g.n();
    if i == n - 1 {
        out.push(pos.iter().map(|p| p.expect("all placed")).collect());
        return;
    }
    let (a, b) = (pos[i - 2].unwrap(), pos[i - 1].unwrap());
    let Some(candidates) = circle_intersections(a, length(i, i - 2), b, length(i, i - 1), slack) else {
        return;
    };
    let tangent = candidates[0].dist(&candidates[1]) <= tol;
    for (k, c) in candidates.into_iter().enumerate() {
        if k == 1 && tangent {
            break;
        }
        pos[i] = Some(c);
        if consistent(g, length, tol, i, pos) {
            extend(g, length, tol, slack, i + 1, pos, out);
        }
    }
    pos[i] = None;
}

/// Outcome of reconstructing an embedding from its squared-cycle edge lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidityCheck {
    /// Realizations consistent with every edge length.
    pub realizations: usize,
    /// Largest complement-edge length error over all realizations.
    pub max_complement_error: f64,
}

/// Rebuilds `points` from the lengths of its squared-cycle edges alone and
/// compares every complement-edge length against the original.
pub fn check_complement_determined(points: &PointPattern, tol: f64) -> Result<RigidityCheck> {
    let n = points.len();
    let g = build_squared_cycle(n)?;
    let realizations = realize_squared_cycle(n, |i, j| points.dist(i, j), tol)?;
    let missing = complement_edges(&g);
    let mut worst = 0.0f64;
    for r in &realizations {
        for &(i, j) in &missing {
            worst = worst.max((r[i].dist(&r[j]) - points.dist(i, j)).abs());
        }
    }
    Ok(RigidityCheck {
        realizations: realizations.len(),
        max_complement_error: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_instance, objective_residual, Assignment};

    #[test]
    fn circle_intersection_basics() {
        let [p, q] = circle_intersections(Point::new(0.0, 0.0), 5.0, Point::new(8.0, 0.0), 5.0, 0.0).unwrap();
        assert!((p.x - 4.0).abs() < 1e-12 && (p.y - 3.0).abs() < 1e-12);
        assert!((q.x - 4.0).abs() < 1e-12 && (q.y + 3.0).abs() < 1e-12);
        assert!(circle_intersections(Point::new(0.0, 0.0), 1.0, Point::new(5.0, 0.0), 1.0, 0.0).is_none());
    }

    #[test]
    fn reconstruction_is_unique_and_congruent() {
        for seed in 0..20 {
            let inst = generate_instance(9, 9, 0.0, seed).unwrap();
            let t = &inst.template;
            let reals = realize_squared_cycle(9, |i, j| t.dist(i, j), 1e-9).unwrap();
            assert_eq!(reals.len(), 1, "seed {seed}");
            let rebuilt = PointPattern::new(reals[0].clone()).unwrap();
            let r = objective_residual(t, &rebuilt, &Assignment::identity(9)).unwrap();
            assert!(r < 1e-18, "seed {seed}: residual {r}");
        }
    }

    #[test]
    fn complement_lengths_are_recovered() {
        let inst = generate_instance(12, 12, 0.0, 5).unwrap();
        let check = check_complement_determined(&inst.template, 1e-9).unwrap();
        assert!(check.realizations >= 1);
        assert!(check.max_complement_error < 1e-6);
    }
}
