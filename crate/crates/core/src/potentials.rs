//! Edge potentials, dynamic-range clamping and clique table assembly.

use serde::{Deserialize, Serialize};

use crate::error::{MatchError, Result};
use crate::geometry::{distance_matrix, DistanceMatrix, PointPattern};
use crate::graph::{CliqueChain, Edge, EdgeOwnership};

pub const DEFAULT_SIGMA_SYNTHETIC: f64 = 0.4;
pub const DEFAULT_SIGMA_PIXELS: f64 = 150.0;
pub const DEFAULT_DYNAMIC_RANGE: f64 = 1000.0;
/// Delta-mode tolerance, relative to the template diameter.
pub const DELTA_TOL_RELATIVE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialMode {
    /// `exp(-(dt - ds)^2 / (2 sigma^2))`
    Gaussian,
    /// Indicator of `|dt - ds| <= delta_tol`.
    Delta,
}

/// Where the dynamic-range floor is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClampMode {
    /// Clamp each edge potential, then multiply.
    #[default]
    PerEdge,
    /// Multiply raw edge potentials, then clamp the product.
    PerClique,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub sigma: f64,
    pub mode: PotentialMode,
    pub delta_tol: f64,
    pub dynamic_range_d: f64,
    #[serde(default)]
    pub clamp_mode: ClampMode,
}

impl Default for PotentialParams {
    fn default() -> Self {
        Self::gaussian(DEFAULT_SIGMA_SYNTHETIC)
    }
}

impl PotentialParams {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            sigma,
            mode: PotentialMode::Gaussian,
            delta_tol: 0.0,
            dynamic_range_d: DEFAULT_DYNAMIC_RANGE,
            clamp_mode: ClampMode::PerEdge,
        }
    }

    /// Delta potentials with the tolerance scaled to `template`.
    pub fn delta_for(template: &PointPattern) -> Self {
        Self {
            mode: PotentialMode::Delta,
            delta_tol: DELTA_TOL_RELATIVE * template.diameter(),
            ..Self::default()
        }
    }

    pub fn with_dynamic_range(mut self, d: f64) -> Self {
        self.dynamic_range_d = d;
        self
    }

    pub fn with_clamp_mode(mut self, mode: ClampMode) -> Self {
        self.clamp_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(MatchError::InvalidParameters(format!(
                "sigma must be finite and positive, got {}",
                self.sigma
            )));
        }
        if !(self.dynamic_range_d >= 1.0 + 1e-9) || self.dynamic_range_d.is_nan() {
            return Err(MatchError::InvalidParameters(format!(
                "dynamic range must exceed 1, got {}",
                self.dynamic_range_d
            )));
        }
        if !(self.delta_tol >= 0.0) {
            return Err(MatchError::InvalidParameters(format!(
                "delta tolerance must be non-negative, got {}",
                self.delta_tol
            )));
        }
        Ok(())
    }
}

pub fn edge_potential(dt: f64, ds: f64, params: &PotentialParams) -> f64 {
    let diff = dt - ds;
    match params.mode {
        PotentialMode::Gaussian => (-(diff * diff) / (2.0 * params.sigma * params.sigma)).exp(),
        PotentialMode::Delta => {
            if diff.abs() <= params.delta_tol {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Affine map of `[0, 1]` onto `[1/d, 1]`.
pub fn clamp(v: f64, d: f64) -> f64 {
    1.0 / d + (1.0 - 1.0 / d) * v
}

/// `m x m` table of one template edge's potential against every scene pair.
pub(crate) fn edge_table(
    template_dist: f64,
    scene: &DistanceMatrix,
    params: &PotentialParams,
    clamped: bool,
) -> Vec<f64> {
    scene
        .as_slice()
        .iter()
        .map(|&ds| {
            let v = edge_potential(template_dist, ds, params);
            if clamped {
                clamp(v, params.dynamic_range_d)
            } else {
                v
            }
        })
        .collect()
}

/// Dense potential over the joint scene assignment of a few template
/// vertices, row-major in vertex order (last vertex fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueTable<const K: usize> {
    pub clique: [usize; K],
    pub m: usize,
    pub values: Vec<f64>,
}

impl<const K: usize> CliqueTable<K> {
    pub fn index(&self, states: [usize; K]) -> usize {
        states.iter().fold(0, |acc, &s| acc * self.m + s)
    }

    pub fn get(&self, states: [usize; K]) -> f64 {
        self.values[self.index(states)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn dynamic_range(&self) -> f64 {
        self.max() / self.min()
    }
}

pub type TripleTable = CliqueTable<3>;

/// Fills the table for one clique: every cell is the product of the owned
/// edges' potentials under that joint assignment.
pub(crate) fn build_table<const K: usize>(
    clique: [usize; K],
    owned: &[Edge],
    template: &DistanceMatrix,
    scene: &DistanceMatrix,
    params: &PotentialParams,
) -> Result<CliqueTable<K>> {
    let m = scene.dim();
    let per_edge_clamp = params.clamp_mode == ClampMode::PerEdge;
    let mut factors: Vec<(usize, usize, Vec<f64>)> = Vec::with_capacity(owned.len());
    for &(a, b) in owned {
        let pos = |v: usize| {
            clique.iter().position(|&c| c == v).ok_or_else(|| {
                MatchError::InvalidInput(format!("edge ({a}, {b}) is not inside clique {clique:?}"))
            })
        };
        let (pa, pb) = (pos(a)?, pos(b)?);
        factors.push((pa, pb, edge_table(template.get(a, b), scene, params, per_edge_clamp)));
    }

    let cells = m.checked_pow(K as u32).ok_or(MatchError::Resource {
        what: "clique table cells",
        required: u128::MAX,
        limit: usize::MAX as u128,
    })?;
    let mut values = vec![1.0; cells];
    let mut states = [0usize; K];
    for value in values.iter_mut() {
        let mut v = 1.0;
        for (pa, pb, t) in &factors {
            v *= t[states[*pa] * m + states[*pb]];
        }
        *value = if per_edge_clamp {
            v
        } else {
            clamp(v, params.dynamic_range_d)
        };
        // odometer, last position fastest
        for s in states.iter_mut().rev() {
            *s += 1;
            if *s < m {
                break;
            }
            *s = 0;
        }
    }
    Ok(CliqueTable { clique, m, values })
}

/// One `m^3` table per clique of `chain`.
pub fn build_clique_tables(
    template: &PointPattern,
    scene: &PointPattern,
    chain: &CliqueChain,
    ownership: &EdgeOwnership,
    params: &PotentialParams,
) -> Result<Vec<TripleTable>> {
    params.validate()?;
    if template.len() != chain.n() {
        return Err(MatchError::InvalidInput(format!(
            "template has {} points but the clique chain spans {}",
            template.len(),
            chain.n()
        )));
    }
    if ownership.num_cliques() != chain.len() {
        return Err(MatchError::InvalidInput(format!(
            "ownership covers {} cliques, chain has {}",
            ownership.num_cliques(),
            chain.len()
        )));
    }
    let (dt, ds) = (distance_matrix(template), distance_matrix(scene));
    chain
        .cliques()
        .iter()
        .enumerate()
        .map(|(i, &c)| build_table(c, ownership.owned_by(i), &dt, &ds, params))
        .collect()
}
