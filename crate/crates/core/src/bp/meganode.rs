//! Pairwise reformulation of the clique chain: every clique becomes one
//! variable over `m^3` joint states, consecutive cliques are tied by a
//! pairwise potential that carries the first clique's table on compatible
//! state pairs and a small penalty `rho` elsewhere.
//!
//! Only meant for small instances, where it validates that the clique-chain
//! messages are the pairwise-model messages with one redundant axis.

use crate::error::{MatchError, Result};
use crate::geometry::Assignment;
use crate::graph::CliqueChain;
use crate::potentials::TripleTable;
use crate::result::argmax;

/// Default cap on `m^3` for the mega-node model.
pub const DEFAULT_STATE_CAP: usize = 4096;

#[derive(Debug, Clone)]
pub struct MegaNodeModel {
    m: usize,
    /// Table of node `i`, also the potential of the pair `(i, i + 1)`.
    tables: Vec<Vec<f64>>,
    rho: f64,
}

/// Decomposes a mega state into its `(a, b, c)` scene indices.
fn split(s: usize, m: usize) -> (usize, usize, usize) {
    (s / (m * m), (s / m) % m, s % m)
}

/// Penalty for incompatible neighbouring states, small enough that no
/// incompatible pair is ever chosen in a maximization: half of
/// `prod_C (min Psi_C / max Psi_C) * min_C min Psi_C`.
pub fn safe_rho(tables: &[TripleTable]) -> f64 {
    let ratio: f64 = tables.iter().map(|t| t.min() / t.max()).product();
    let floor = tables.iter().map(|t| t.min()).fold(f64::INFINITY, f64::min);
    0.5 * ratio * floor
}

pub fn build_meganode_model(chain: &CliqueChain, tables: &[TripleTable], state_cap: usize) -> Result<MegaNodeModel> {
    let m = tables.first().map_or(0, |t| t.m);
    let states = m.checked_pow(3).unwrap_or(usize::MAX);
    if states > state_cap {
        return Err(MatchError::Resource {
            what: "mega-node states",
            required: states as u128,
            limit: state_cap as u128,
        });
    }
    if tables.len() != chain.len() || tables.iter().any(|t| t.min() <= 0.0) {
        return Err(MatchError::InvalidInput(
            "mega-node model needs one strictly positive table per clique".into(),
        ));
    }
    Ok(MegaNodeModel {
        m,
        tables: tables.iter().map(|t| t.values.clone()).collect(),
        rho: safe_rho(tables),
    })
}

impl MegaNodeModel {
    pub fn nodes(&self) -> usize {
        self.tables.len()
    }

    pub fn states(&self) -> usize {
        self.m * self.m * self.m
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// State `t` of node `i + 1` agrees with state `s` of node `i` on the
    /// two shared variables.
    pub fn compatible(&self, s: usize, t: usize) -> bool {
        let (_, b, c) = split(s, self.m);
        let (a2, b2, _) = split(t, self.m);
        (b, c) == (a2, b2)
    }

    /// Pairwise potential between node `i` in state `s` and node `i + 1` in state `t`.
    pub fn pair_potential(&self, i: usize, s: usize, t: usize) -> f64 {
        if self.compatible(s, t) {
            self.tables[i][s]
        } else {
            self.rho
        }
    }

    /// Product of all pair potentials for one state per node.
    pub fn score(&self, states: &[usize]) -> f64 {
        let n = self.nodes();
        (0..n).map(|i| self.pair_potential(i, states[i], states[(i + 1) % n])).product()
    }

    /// Exhaustive MAP over `(m^3)^n` joint states. The result is translated
    /// back to one scene index per template vertex when it is consistent.
    pub fn brute_force_map(&self, chain: &CliqueChain) -> Result<(Option<Assignment>, f64)> {
        let (n, k) = (self.nodes(), self.states());
        let total = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if total > crate::oracle::ENUMERATION_LIMIT {
            return Err(MatchError::Resource {
                what: "mega-node enumeration",
                required: total,
                limit: crate::oracle::ENUMERATION_LIMIT,
            });
        }
        let mut x = vec![0usize; n];
        let mut best = (x.clone(), f64::NEG_INFINITY);
        'outer: loop {
            let s = self.score(&x);
            if s > best.1 {
                best = (x.clone(), s);
            }
            for pos in (0..n).rev() {
                x[pos] += 1;
                if x[pos] < k {
                    continue 'outer;
                }
                x[pos] = 0;
            }
            break;
        }
        Ok((self.to_assignment(chain, &best.0), best.1))
    }

    fn to_assignment(&self, chain: &CliqueChain, states: &[usize]) -> Option<Assignment> {
        let mut out = vec![None; chain.n()];
        for (i, &s) in states.iter().enumerate() {
            let (a, b, c) = split(s, self.m);
            for (v, val) in chain.clique(i).into_iter().zip([a, b, c]) {
                match out[v] {
                    None => out[v] = Some(val),
                    Some(prev) if prev != val => return None,
                    _ => {}
                }
            }
        }
        out.into_iter().collect::<Option<Vec<_>>>().map(Assignment)
    }
}

/// Messages of the pairwise model, each over the receiver's `m^3` states and
/// rescaled to a maximum of one.
#[derive(Debug, Clone, PartialEq)]
pub struct MegaMessages {
    /// `fwd[i]`: message from node `i` to node `i + 1`.
    pub fwd: Vec<Vec<f64>>,
    /// `bwd[i]`: message from node `i` to node `i - 1`.
    pub bwd: Vec<Vec<f64>>,
    pub iteration: usize,
}

fn normalize_max(v: &mut [f64]) {
    let top = v.iter().copied().fold(0.0, f64::max);
    if top > 0.0 {
        v.iter_mut().for_each(|x| *x /= top);
    }
}

impl MegaNodeModel {
    pub fn initial_messages(&self) -> MegaMessages {
        let (n, k) = (self.nodes(), self.states());
        MegaMessages {
            fwd: vec![vec![1.0; k]; n],
            bwd: vec![vec![1.0; k]; n],
            iteration: 0,
        }
    }

    /// One synchronous max-product sweep, by direct maximization over every
    /// sender state.
    pub fn iterate(&self, msgs: &MegaMessages) -> MegaMessages {
        let (n, k) = (self.nodes(), self.states());
        let mut out = MegaMessages {
            fwd: vec![vec![0.0; k]; n],
            bwd: vec![vec![0.0; k]; n],
            iteration: msgs.iteration + 1,
        };
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            // node i -> node i+1 across pair (i, i+1)
            for t in 0..k {
                out.fwd[i][t] = (0..k)
                    .map(|s| self.pair_potential(i, s, t) * msgs.fwd[prev][s])
                    .fold(0.0, f64::max);
            }
            // node i -> node i-1 across pair (i-1, i)
            for s in 0..k {
                out.bwd[i][s] = (0..k)
                    .map(|t| self.pair_potential(prev, s, t) * msgs.bwd[next][t])
                    .fold(0.0, f64::max);
            }
            normalize_max(&mut out.fwd[i]);
            normalize_max(&mut out.bwd[i]);
        }
        out
    }

    /// Node belief: product of both incoming messages, summing to one.
    pub fn belief(&self, msgs: &MegaMessages, i: usize) -> Vec<f64> {
        let n = self.nodes();
        let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
        let mut b: Vec<f64> = msgs.fwd[prev].iter().zip(&msgs.bwd[next]).map(|(x, y)| x * y).collect();
        let total: f64 = b.iter().sum();
        b.iter_mut().for_each(|x| *x /= total);
        b
    }

    /// Decodes each node's best joint state, then reads vertex values from
    /// each vertex's home clique.
    pub fn decode(&self, chain: &CliqueChain, msgs: &MegaMessages) -> Assignment {
        let mut out = vec![0; chain.n()];
        for v in 0..chain.n() {
            let home = chain.home_clique(v);
            let b = self.belief(msgs, home);
            let mut mm = vec![0.0f64; self.m];
            for (s, &p) in b.iter().enumerate() {
                let a = split(s, self.m).0;
                mm[a] = mm[a].max(p);
            }
            out[v] = argmax(&mm);
        }
        Assignment(out)
    }
}
