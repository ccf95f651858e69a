//! Engine selection for a single template/scene pair.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bp::{self, BpConfig, TraceFn};
use crate::error::{MatchError, Result};
use crate::geometry::{Assignment, PointPattern};
use crate::graph::{build_three_tree, MIN_SQUARED_CYCLE};
use crate::jt::{build_junction_tree, jt_map, JtConfig};
use crate::oracle::{brute_force_objective, OracleOptions};
use crate::potentials::PotentialParams;
use crate::result::MatchResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Bp,
    Jt,
    Oracle,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Bp => "bp",
            Engine::Jt => "jt",
            Engine::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = MatchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bp" => Ok(Engine::Bp),
            "jt" => Ok(Engine::Jt),
            "oracle" => Ok(Engine::Oracle),
            other => Err(MatchError::InvalidParameters(format!("unknown engine `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub engine: Engine,
    pub potentials: PotentialParams,
    pub bp: BpConfig,
    pub jt: JtConfig,
    /// Seed of the random 3-tree used by the junction-tree engine.
    pub three_tree_seed: u64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            engine: Engine::Bp,
            potentials: PotentialParams::default(),
            bp: BpConfig::default(),
            jt: JtConfig::default(),
            three_tree_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    /// The engine that actually ran.
    pub engine: Engine,
    pub result: MatchResult,
    /// Why a different engine than requested ran, if it did.
    pub fallback: Option<String>,
}

/// Exhaustive minimizer of the residual, wrapped as a match result.
pub fn run_oracle(template: &PointPattern, scene: &PointPattern) -> Result<MatchResult> {
    let start = Instant::now();
    let (assignment, residual): (Assignment, f64) =
        brute_force_objective(template, scene, OracleOptions::default())?;
    Ok(MatchResult {
        tie_sets: assignment.as_slice().iter().map(|&s| vec![s]).collect(),
        collisions: assignment.collisions(),
        assignment,
        residual,
        iterations: 1,
        converged: true,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs the configured engine. Templates too small for a squared cycle are
/// sent to the oracle when belief propagation was requested.
pub fn run_match(
    template: &PointPattern,
    scene: &PointPattern,
    cfg: &MatchConfig,
    trace: Option<&mut TraceFn<'_>>,
) -> Result<MatchOutcome> {
    let n = template.len();
    match cfg.engine {
        Engine::Bp if n < MIN_SQUARED_CYCLE => {
            let note = format!(
                "template has {n} points; belief propagation needs at least {MIN_SQUARED_CYCLE}, using the oracle"
            );
            log::warn!("{note}");
            Ok(MatchOutcome {
                engine: Engine::Oracle,
                result: run_oracle(template, scene)?,
                fallback: Some(note),
            })
        }
        Engine::Bp => Ok(MatchOutcome {
            engine: Engine::Bp,
            result: bp::run_bp(template, scene, &cfg.potentials, &cfg.bp, trace)?,
            fallback: None,
        }),
        Engine::Jt => {
            let jt = build_junction_tree(&build_three_tree(n, cfg.three_tree_seed)?)?;
            Ok(MatchOutcome {
                engine: Engine::Jt,
                result: jt_map(template, scene, &jt, &cfg.potentials, &cfg.jt)?,
                fallback: None,
            })
        }
        Engine::Oracle => Ok(MatchOutcome {
            engine: Engine::Oracle,
            result: run_oracle(template, scene)?,
            fallback: None,
        }),
    }
}
