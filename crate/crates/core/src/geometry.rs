//! Point patterns, distance matrices, the matching objective and synthetic
//! instance generation.

use std::f64::consts::TAU;
use std::ops::Index;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{MatchError, Result};

/// Twice the triangle area below which three template points count as collinear.
pub const COLLINEAR_AREA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

/// An ordered, non-empty set of finite 2-D points. Index `i` always names the
/// same point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

impl PointPattern {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(MatchError::InvalidInput("point pattern is empty".into()));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(MatchError::InvalidInput(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        Ok(Self {
            points,
            label: None,
        })
    }

    pub fn from_xy(xy: &[(f64, f64)]) -> Result<Self> {
        Self::new(xy.iter().copied().map(Point::from).collect())
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps the first `k` points.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        let k = k.min(self.len());
        let mut out = Self::new(self.points[..k].to_vec())?;
        out.label = self.label.clone();
        Ok(out)
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.points[i].dist(&self.points[j])
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(self.dist(i, j));
            }
        }
        best
    }

    /// True if no three points are collinear within `area_tol` (twice the
    /// triangle area).
    pub fn in_general_position(&self, area_tol: f64) -> bool {
        let p = &self.points;
        let n = p.len();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let cross = (p[j].x - p[i].x) * (p[k].y - p[i].y)
                        - (p[j].y - p[i].y) * (p[k].x - p[i].x);
                    if cross.abs() <= area_tol {
                        return false;
                    }
                }
            }
        }
        true
    }
}

impl Index<usize> for PointPattern {
    type Output = Point;

    fn index(&self, i: usize) -> &Point {
        &self.points[i]
    }
}

/// Dense symmetric matrix of pairwise Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }
}

pub fn distance_matrix(p: &PointPattern) -> DistanceMatrix {
    let dim = p.len();
    let mut entries = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i + 1..dim {
            let d = p.dist(i, j);
            entries[i * dim + j] = d;
            entries[j * dim + i] = d;
        }
    }
    DistanceMatrix { dim, entries }
}

/// A map from template indices to scene indices. Collisions are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(MatchError::InvalidAssignment(format!(
                "assignment has {} entries for a template of {n} points",
                self.0.len()
            )));
        }
        if let Some((i, &s)) = self.0.iter().enumerate().find(|(_, &s)| s >= m) {
            return Err(MatchError::InvalidAssignment(format!(
                "template point {i} maps to scene index {s}, scene has {m} points"
            )));
        }
        Ok(())
    }

    /// Number of scene indices hit by more than one template point.
    pub fn collisions(&self) -> usize {
        let mut seen = std::collections::BTreeMap::<usize, usize>::new();
        for &s in &self.0 {
            *seen.entry(s).or_default() += 1;
        }
        seen.values().filter(|&&c| c > 1).count()
    }

    /// Fraction of entries that agree with `truth`.
    pub fn accuracy(&self, truth: &Assignment) -> f64 {
        if self.0.is_empty() {
            return 1.0;
        }
        let hits = self
            .0
            .iter()
            .zip(&truth.0)
            .filter(|(a, b)| a == b)
            .count();
        hits as f64 / self.0.len() as f64
    }
}

impl Index<usize> for Assignment {
    type Output = usize;

    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

/// Squared Frobenius norm of `D(template) - D(assigned scene points)`, both
/// triangles counted.
pub fn objective_residual(
    template: &PointPattern,
    scene: &PointPattern,
    a: &Assignment,
) -> Result<f64> {
    a.validate(template.len(), scene.len())?;
    let n = template.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let diff = template.dist(i, j) - scene.dist(a[i], a[j]);
            total += 2.0 * diff * diff;
        }
    }
    Ok(total)
}

/// A rotation by `angle`, an optional reflection across the x axis applied
/// first, then a translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub angle: f64,
    pub translation: (f64, f64),
    pub reflect: bool,
}

impl RigidTransform {
    pub fn apply(&self, p: Point) -> Point {
        let y = if self.reflect { -p.y } else { p.y };
        let (s, c) = self.angle.sin_cos();
        Point::new(
            c * p.x - s * y + self.translation.0,
            s * p.x + c * y + self.translation.1,
        )
    }
}

pub fn apply_rigid_transform(
    p: &PointPattern,
    angle: f64,
    translation: (f64, f64),
    reflect: bool,
) -> PointPattern {
    let t = RigidTransform {
        angle,
        translation,
        reflect,
    };
    PointPattern {
        points: p.points.iter().map(|&q| t.apply(q)).collect(),
        label: p.label.clone(),
    }
}

/// A synthetic matching problem with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub template: PointPattern,
    pub scene: PointPattern,
    pub truth: Assignment,
    pub transform: RigidTransform,
}

/// Draws `n` template points in the unit square (general position), hides a
/// jittered rigid copy of them among `m - n` uniform clutter points, and
/// shuffles the scene.
pub fn generate_instance(n: usize, m: usize, eps: f64, seed: u64) -> Result<Instance> {
    if n < 3 || n > m {
        return Err(MatchError::InvalidParameters(format!(
            "need 3 <= n <= m, got n = {n}, m = {m}"
        )));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(MatchError::InvalidParameters(format!(
            "noise level must be finite and non-negative, got {eps}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let template = loop {
        let pts: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.random(), rng.random()))
            .collect();
        let candidate = PointPattern::new(pts)?;
        if candidate.in_general_position(COLLINEAR_AREA_TOL) {
            break candidate;
        }
    };

    let transform = RigidTransform {
        angle: rng.random_range(0.0..TAU),
        translation: (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
        reflect: rng.random_bool(0.5),
    };

    let noise = if eps > 0.0 {
        Some(Normal::new(0.0, eps).expect("eps is finite and positive"))
    } else {
        None
    };
    let mut hidden: Vec<Point> = template
        .points
        .iter()
        .map(|&p| {
            let jittered = match &noise {
                Some(d) => Point::new(p.x + d.sample(&mut rng), p.y + d.sample(&mut rng)),
                None => p,
            };
            transform.apply(jittered)
        })
        .collect();
    hidden.extend((n..m).map(|_| Point::new(rng.random(), rng.random())));

    // slot k of the scene holds hidden[order[k]]
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let mut truth = vec![0; n];
    for (slot, &src) in order.iter().enumerate() {
        if src < n {
            truth[src] = slot;
        }
    }
    let scene = PointPattern::new(order.iter().map(|&k| hidden[k]).collect())?;

    Ok(Instance {
        template,
        scene,
        truth: Assignment(truth),
        transform,
    })
}
