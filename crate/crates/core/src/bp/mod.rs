//! Max-product belief propagation around the cyclic clique chain of a
//! squared-cycle graph.
//!
//! Clique `i` holds the triple `(a, b, c) = (o[i], o[i+1], o[i+2])`. The
//! forward message `i -> i+1` lives on `(b, c)` and the backward message
//! `i -> i-1` on `(a, b)`; both are `m x m`, row-major, and rescaled so the
//! largest entry is one.

pub mod meganode;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{objective_residual, Assignment, PointPattern};
use crate::graph::{build_squared_cycle, clique_chain, CliqueChain};
use crate::potentials::{build_clique_tables, PotentialParams, TripleTable};
use crate::result::{argmax, tie_set, MatchResult};

/// Scene size at which the default cutoff drops by a factor of ten.
pub const LARGE_SCENE: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub mse_cutoff: f64,
    pub min_iterations: usize,
    pub max_iterations: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            mse_cutoff: 1e-8,
            min_iterations: 5,
            max_iterations: 100,
        }
    }
}

impl ConvergenceConfig {
    /// Defaults with the cutoff chosen for a scene of `m` points.
    pub fn for_scene_size(m: usize) -> Self {
        Self {
            mse_cutoff: default_cutoff(m),
            ..Self::default()
        }
    }

    /// Width of the decoding tie band.
    pub fn tie_band(&self) -> f64 {
        self.mse_cutoff.sqrt()
    }
}

pub fn default_cutoff(m: usize) -> f64 {
    if m >= LARGE_SCENE {
        1e-9
    } else {
        1e-8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Every message of iteration `t` is computed from iteration `t - 1`.
    #[default]
    Synchronous,
    /// Forward messages sweep `0..n` and backward messages sweep `n..0`,
    /// each using the freshest neighbour message.
    Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    pub m: usize,
    /// `fwd[i]`: message from clique `i` to clique `i + 1`, indexed `[b][c]`.
    pub fwd: Vec<Vec<f64>>,
    /// `bwd[i]`: message from clique `i` to clique `i - 1`, indexed `[a][b]`.
    pub bwd: Vec<Vec<f64>>,
    pub iteration: usize,
    pub prev_beliefs: Option<Vec<Vec<f64>>>,
}

impl MessageState {
    /// All-ones messages.
    pub fn new(cliques: usize, m: usize) -> Self {
        Self {
            m,
            fwd: vec![vec![1.0; m * m]; cliques],
            bwd: vec![vec![1.0; m * m]; cliques],
            iteration: 0,
            prev_beliefs: None,
        }
    }
}

fn normalize_max(v: &mut [f64]) {
    let top = v.iter().copied().fold(0.0, f64::max);
    if top > 0.0 {
        v.iter_mut().for_each(|x| *x /= top);
    }
}

/// `max_k x[k] * y[k]` for non-negative inputs, over independent lanes so
/// the loop vectorizes.
#[inline]
fn max_of_products(x: &[f64], y: &[f64]) -> f64 {
    const LANES: usize = 4;
    let mut acc = [0.0f64; LANES];
    let (xc, yc) = (x.chunks_exact(LANES), y.chunks_exact(LANES));
    let tail = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).fold(0.0, f64::max);
    for (xs, ys) in xc.zip(yc) {
        for l in 0..LANES {
            let v = xs[l] * ys[l];
            acc[l] = if v > acc[l] { v } else { acc[l] };
        }
    }
    acc.into_iter().fold(tail, f64::max)
}

/// `out[b][c] = max_a table[a][b][c] * incoming[a][b]`
pub fn forward_message(table: &[f64], incoming: &[f64], m: usize, out: &mut [f64]) {
    out.fill(0.0);
    for a in 0..m {
        for b in 0..m {
            let w = incoming[a * m + b];
            let row = &table[(a * m + b) * m..(a * m + b + 1) * m];
            let dst = &mut out[b * m..(b + 1) * m];
            for (o, &t) in dst.iter_mut().zip(row) {
                let v = t * w;
                *o = if v > *o { v } else { *o };
            }
        }
    }
    normalize_max(out);
}

/// `out[a][b] = max_c table[a][b][c] * incoming[b][c]`
pub fn backward_message(table: &[f64], incoming: &[f64], m: usize, out: &mut [f64]) {
    for a in 0..m {
        for b in 0..m {
            let row = &table[(a * m + b) * m..(a * m + b + 1) * m];
            let inc = &incoming[b * m..(b + 1) * m];
            out[a * m + b] = max_of_products(row, inc);
        }
    }
    normalize_max(out);
}

/// One sweep over all `2n` directed messages.
pub fn bp_iterate(chain: &CliqueChain, tables: &[TripleTable], state: &mut MessageState, schedule: Schedule) {
    let n = chain.len();
    let m = state.m;
    match schedule {
        Schedule::Synchronous => {
            let mut fwd = vec![vec![0.0; m * m]; n];
            let mut bwd = vec![vec![0.0; m * m]; n];
            for i in 0..n {
                forward_message(&tables[i].values, &state.fwd[chain.prev(i)], m, &mut fwd[i]);
                backward_message(&tables[i].values, &state.bwd[chain.next(i)], m, &mut bwd[i]);
            }
            state.fwd = fwd;
            state.bwd = bwd;
        }
        Schedule::Sequential => {
            let mut buf = vec![0.0; m * m];
            for i in 0..n {
                forward_message(&tables[i].values, &state.fwd[chain.prev(i)], m, &mut buf);
                std::mem::swap(&mut state.fwd[i], &mut buf);
            }
            for i in (0..n).rev() {
                backward_message(&tables[i].values, &state.bwd[chain.next(i)], m, &mut buf);
                std::mem::swap(&mut state.bwd[i], &mut buf);
            }
        }
    }
    state.iteration += 1;
}

/// Belief of clique `i`: its table times both incoming messages, summing to one.
pub fn clique_belief(chain: &CliqueChain, tables: &[TripleTable], state: &MessageState, i: usize) -> Vec<f64> {
    let m = state.m;
    let table = &tables[i].values;
    let from_prev = &state.fwd[chain.prev(i)];
    let from_next = &state.bwd[chain.next(i)];
    let mut out = vec![0.0; m * m * m];
    for a in 0..m {
        for b in 0..m {
            let w = from_prev[a * m + b];
            let base = (a * m + b) * m;
            for c in 0..m {
                out[base + c] = table[base + c] * w * from_next[b * m + c];
            }
        }
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|x| *x /= total);
    }
    out
}

pub fn beliefs(chain: &CliqueChain, tables: &[TripleTable], state: &MessageState) -> Vec<Vec<f64>> {
    (0..chain.len()).map(|i| clique_belief(chain, tables, state, i)).collect()
}

/// Mean squared entrywise change of each clique belief.
pub fn belief_mse(prev: &[Vec<f64>], cur: &[Vec<f64>]) -> Vec<f64> {
    prev.iter()
        .zip(cur)
        .map(|(p, c)| {
            let sq: f64 = p.iter().zip(c).map(|(x, y)| (x - y) * (x - y)).sum();
            sq / p.len() as f64
        })
        .collect()
}

/// True once every clique's belief MSE is strictly below the cutoff and the
/// minimum iteration count has been reached.
pub fn check_convergence(prev: &[Vec<f64>], cur: &[Vec<f64>], iteration: usize, cfg: &ConvergenceConfig) -> bool {
    iteration >= cfg.min_iterations && belief_mse(prev, cur).iter().all(|&e| e < cfg.mse_cutoff)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub assignment: Assignment,
    pub tie_sets: Vec<Vec<usize>>,
}

/// Max-marginal of position `pos` (0, 1 or 2) of an `m^3` belief.
pub(crate) fn triple_max_marginal(belief: &[f64], m: usize, pos: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; m];
    for (idx, &v) in belief.iter().enumerate() {
        let s = match pos {
            0 => idx / (m * m),
            1 => (idx / m) % m,
            _ => idx % m,
        };
        out[s] = out[s].max(v);
    }
    out
}

/// Decodes each vertex from the clique it leads.
pub fn decode(chain: &CliqueChain, beliefs: &[Vec<f64>], m: usize, tie_band: f64) -> Decoded {
    let n = chain.n();
    let mut assignment = vec![0; n];
    let mut tie_sets = vec![Vec::new(); n];
    for v in 0..n {
        let home = chain.home_clique(v);
        let mm = triple_max_marginal(&beliefs[home], m, 0);
        let best = argmax(&mm);
        assignment[v] = best;
        tie_sets[v] = tie_set(&mm, best, tie_band);

        if log::log_enabled!(log::Level::Debug) {
            for (k, c) in chain.cliques().iter().enumerate() {
                if let Some(pos) = c.iter().position(|&u| u == v) {
                    let other = argmax(&triple_max_marginal(&beliefs[k], m, pos));
                    if other != best {
                        log::debug!("vertex {v}: clique {home} decodes {best}, clique {k} decodes {other}");
                    }
                }
            }
        }
    }
    Decoded {
        assignment: Assignment(assignment),
        tie_sets,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BpConfig {
    pub convergence: ConvergenceConfig,
    pub schedule: Schedule,
}

#[derive(Debug, Clone)]
pub struct BpRun {
    pub state: MessageState,
    pub beliefs: Vec<Vec<f64>>,
    pub decoded: Decoded,
    pub converged: bool,
}

/// Per-iteration hook receiving the iteration number and each clique's
/// belief MSE.
pub type TraceFn<'a> = dyn FnMut(usize, &[f64]) + 'a;

/// Iterates until convergence or the iteration cap, then decodes.
pub fn run_on_tables(
    chain: &CliqueChain,
    tables: &[TripleTable],
    cfg: &BpConfig,
    mut trace: Option<&mut TraceFn<'_>>,
) -> BpRun {
    let m = tables.first().map_or(0, |t| t.m);
    let conv = &cfg.convergence;
    let mut state = MessageState::new(chain.len(), m);
    let mut converged = false;
    let mut current = beliefs(chain, tables, &state);
    while state.iteration < conv.max_iterations {
        bp_iterate(chain, tables, &mut state, cfg.schedule);
        let next = beliefs(chain, tables, &state);
        let prev = std::mem::replace(&mut current, next);
        if let Some(t) = trace.as_mut() {
            t(state.iteration, &belief_mse(&prev, &current));
        }
        let done = check_convergence(&prev, &current, state.iteration, conv);
        state.prev_beliefs = Some(prev);
        if done {
            converged = true;
            break;
        }
    }
    let decoded = decode(chain, &current, m, conv.tie_band());
    BpRun {
        state,
        beliefs: current,
        decoded,
        converged,
    }
}

/// Matches `template` into `scene` on the squared cycle in template index order.
pub fn run_bp(
    template: &PointPattern,
    scene: &PointPattern,
    params: &PotentialParams,
    cfg: &BpConfig,
    trace: Option<&mut TraceFn<'_>>,
) -> Result<MatchResult> {
    let start = Instant::now();
    let graph = build_squared_cycle(template.len())?;
    let chain = clique_chain(&graph)?;
    let tables = build_clique_tables(template, scene, &chain, &chain.ownership(), params)?;
    let run = run_on_tables(&chain, &tables, cfg, trace);
    let residual = objective_residual(template, scene, &run.decoded.assignment)?;
    Ok(MatchResult {
        collisions: run.decoded.assignment.collisions(),
        assignment: run.decoded.assignment,
        tie_sets: run.decoded.tie_sets,
        residual,
        iterations: run.state.iteration,
        converged: run.converged,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests;
