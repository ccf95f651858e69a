//! Synthetic accuracy/runtime benchmark over a grid of scene sizes and noise
//! levels, with CSV output.

pub mod sequence;

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{default_cutoff, BpConfig, ConvergenceConfig};
use crate::error::{MatchError, Result};
use crate::geometry::generate_instance;
use crate::matcher::{run_match, Engine, MatchConfig};
use crate::potentials::{PotentialParams, DEFAULT_DYNAMIC_RANGE, DEFAULT_SIGMA_SYNTHETIC};
use crate::result::SCHEMA_VERSION;

/// Noise levels `0, 1/256, ..., 4/256`.
pub fn default_eps_grid() -> Vec<f64> {
    (0..=4).map(|k| k as f64 / 256.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    pub n: usize,
    pub m_values: Vec<usize>,
    pub eps_values: Vec<f64>,
    pub trials: usize,
    pub engines: Vec<Engine>,
    pub sigma: f64,
    pub dynamic_range_d: f64,
    /// Per-scene-size MSE cutoff; sizes not listed use the default rule.
    pub cutoffs: BTreeMap<usize, f64>,
    pub min_iterations: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Record wall-clock times. Off gives byte-reproducible output.
    pub timing: bool,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        let conv = ConvergenceConfig::default();
        Self {
            n: 10,
            m_values: vec![10, 20, 30, 40],
            eps_values: default_eps_grid(),
            trials: 50,
            engines: vec![Engine::Bp, Engine::Jt],
            sigma: DEFAULT_SIGMA_SYNTHETIC,
            dynamic_range_d: DEFAULT_DYNAMIC_RANGE,
            cutoffs: BTreeMap::new(),
            min_iterations: conv.min_iterations,
            max_iterations: conv.max_iterations,
            seed: 0,
            timing: true,
        }
    }
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(MatchError::InvalidParameters("trials must be at least 1".into()));
        }
        if let Some(&m) = self.m_values.iter().find(|&&m| m < self.n) {
            return Err(MatchError::InvalidParameters(format!(
                "scene size {m} is smaller than the template size {}",
                self.n
            )));
        }
        if self.engines.is_empty() || self.m_values.is_empty() || self.eps_values.is_empty() {
            return Err(MatchError::InvalidParameters(
                "engines, m_values and eps_values must be non-empty".into(),
            ));
        }
        if self.min_iterations > self.max_iterations {
            return Err(MatchError::InvalidParameters(
                "min_iterations exceeds max_iterations".into(),
            ));
        }
        PotentialParams::gaussian(self.sigma)
            .with_dynamic_range(self.dynamic_range_d)
            .validate()
    }

    pub fn cutoff(&self, m: usize) -> f64 {
        self.cutoffs.get(&m).copied().unwrap_or_else(|| default_cutoff(m))
    }

    pub fn match_config(&self, engine: Engine, m: usize) -> MatchConfig {
        MatchConfig {
            engine,
            potentials: PotentialParams::gaussian(self.sigma).with_dynamic_range(self.dynamic_range_d),
            bp: BpConfig {
                convergence: ConvergenceConfig {
                    mse_cutoff: self.cutoff(m),
                    min_iterations: self.min_iterations,
                    max_iterations: self.max_iterations,
                },
                ..BpConfig::default()
            },
            three_tree_seed: self.seed,
            ..MatchConfig::default()
        }
    }

    /// Instance seed of one grid cell and trial; every engine sees the same instance.
    pub fn instance_seed(&self, m: usize, eps_index: usize, trial: usize) -> u64 {
        self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ ((m as u64) << 40)
            ^ ((eps_index as u64) << 24)
            ^ trial as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub schema_version: u32,
    pub engine: Engine,
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    pub trial: usize,
    pub accuracy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub converged: bool,
    pub reflected: bool,
    /// `ok`, or the error that stopped this engine on this trial.
    pub status: String,
}

impl BenchmarkRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Runs the whole grid. Trials run in parallel; the returned rows are sorted
/// by engine, scene size, noise level and trial.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<Vec<BenchmarkRow>> {
    spec.validate()?;
    let mut tasks = Vec::new();
    for &m in &spec.m_values {
        for (k, &eps) in spec.eps_values.iter().enumerate() {
            for trial in 0..spec.trials {
                tasks.push((m, k, eps, trial));
            }
        }
    }
    let mut rows: Vec<(usize, BenchmarkRow)> = tasks
        .into_par_iter()
        .map(|(m, k, eps, trial)| run_cell(spec, m, k, eps, trial))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|(ka, a), (kb, b)| (a.engine, a.m, ka, a.trial).cmp(&(b.engine, b.m, kb, b.trial)));
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

fn run_cell(spec: &BenchmarkSpec, m: usize, k: usize, eps: f64, trial: usize) -> Result<Vec<(usize, BenchmarkRow)>> {
    let inst = generate_instance(spec.n, m, eps, spec.instance_seed(m, k, trial))?;
    let rows = spec
        .engines
        .iter()
        .map(|&engine| {
            let cfg = spec.match_config(engine, m);
            let mut row = BenchmarkRow {
                schema_version: SCHEMA_VERSION,
                engine,
                n: spec.n,
                m,
                eps,
                trial,
                accuracy: 0.0,
                residual: f64::NAN,
                iterations: 0,
                wall_time_s: 0.0,
                converged: false,
                reflected: inst.transform.reflect,
                status: "ok".into(),
            };
            match run_match(&inst.template, &inst.scene, &cfg, None) {
                Ok(out) => {
                    row.accuracy = out.result.assignment.accuracy(&inst.truth);
                    row.residual = out.result.residual;
                    row.iterations = out.result.iterations;
                    row.converged = out.result.converged;
                    if spec.timing {
                        row.wall_time_s = out.result.wall_time_s;
                    }
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            (k, row)
        })
        .collect();
    Ok(rows)
}

/// Mean and standard error of the mean (zero for a single sample).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub schema_version: u32,
    pub engine: Engine,
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    pub trials: usize,
    pub errors: usize,
    pub mean_accuracy: f64,
    pub se_accuracy: f64,
    pub mean_residual: f64,
    pub mean_iterations: f64,
    pub converged_fraction: f64,
    pub mean_wall_time_s: f64,
}

/// Mean and standard error per (engine, m, eps) cell, over successful rows.
pub fn summarize(rows: &[BenchmarkRow]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(Engine, usize, u64), Vec<&BenchmarkRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.engine, r.m, r.eps.to_bits())).or_default().push(r);
    }
    let mut out: Vec<SummaryRow> = cells
        .into_values()
        .map(|group| {
            let ok: Vec<&BenchmarkRow> = group.iter().copied().filter(|r| r.is_ok()).collect();
            let col = |f: fn(&BenchmarkRow) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (mean_accuracy, se_accuracy) = mean_and_se(&col(|r| r.accuracy));
            let first = group[0];
            SummaryRow {
                schema_version: SCHEMA_VERSION,
                engine: first.engine,
                n: first.n,
                m: first.m,
                eps: first.eps,
                trials: group.len(),
                errors: group.len() - ok.len(),
                mean_accuracy,
                se_accuracy,
                mean_residual: mean_and_se(&col(|r| r.residual)).0,
                mean_iterations: mean_and_se(&col(|r| r.iterations as f64)).0,
                converged_fraction: mean_and_se(&col(|r| if r.converged { 1.0 } else { 0.0 })).0,
                mean_wall_time_s: mean_and_se(&col(|r| r.wall_time_s)).0,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.engine, a.m)
            .cmp(&(b.engine, b.m))
            .then(a.eps.total_cmp(&b.eps))
    });
    out
}

pub fn write_csv<T: Serialize>(rows: &[T], w: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for r in rows {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}
