//! Exact MAP on a 3-tree model: a junction tree of 4-cliques, one upward
//! and one downward max-product pass, then traceback decoding.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{MatchError, Result};
use crate::geometry::{distance_matrix, objective_residual, Assignment, PointPattern};
use crate::graph::{edge, Edge, GraphKind, MatchGraph};
use crate::potentials::{build_table, CliqueTable, PotentialParams};
use crate::result::{argmax, tie_set, MatchResult};

pub type QuadTable = CliqueTable<4>;

/// One node per vertex `v >= 3`, holding `v`'s attachment triangle followed
/// by `v`. Node `k` belongs to vertex `k + 3`; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JunctionTree {
    n: usize,
    cliques: Vec<[usize; 4]>,
    parent: Vec<Option<usize>>,
    owned: Vec<Vec<Edge>>,
}

pub fn build_junction_tree(g: &MatchGraph) -> Result<JunctionTree> {
    if g.kind() != GraphKind::ThreeTree {
        return Err(MatchError::InvalidGraph(
            "junction trees are built from 3-trees only".into(),
        ));
    }
    let n = g.n();
    if n < 4 {
        return Err(MatchError::DegenerateSize { n, min: 4 });
    }
    let mut cliques = Vec::with_capacity(n - 3);
    let mut parent = Vec::with_capacity(n - 3);
    let mut owned = Vec::with_capacity(n - 3);
    for (k, t) in g.attachments().iter().enumerate() {
        let v = k + 3;
        cliques.push([t[0], t[1], t[2], v]);
        let newest = t.iter().copied().max().expect("three vertices");
        parent.push(if k == 0 {
            None
        } else if newest >= 3 {
            Some(newest - 3)
        } else {
            // the base triangle lives in the root
            Some(0)
        });
        let mut own: Vec<Edge> = t.iter().map(|&u| edge(u, v)).collect();
        if k == 0 {
            own.extend([edge(t[0], t[1]), edge(t[0], t[2]), edge(t[1], t[2])]);
        }
        owned.push(own);
    }
    Ok(JunctionTree {
        n,
        cliques,
        parent,
        owned,
    })
}

impl JunctionTree {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cliques(&self) -> &[[usize; 4]] {
        &self.cliques
    }

    pub fn parent(&self, k: usize) -> Option<usize> {
        self.parent[k]
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn tree_edges(&self) -> Vec<(usize, usize)> {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(k, p)| p.map(|p| (p, k)))
            .collect()
    }

    /// Vertices shared by node `k` and its parent.
    pub fn separator(&self, k: usize) -> Option<[usize; 3]> {
        self.parent[k].map(|_| {
            let c = self.cliques[k];
            [c[0], c[1], c[2]]
        })
    }

    pub fn owned_edges(&self, k: usize) -> &[Edge] {
        &self.owned[k]
    }

    fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cliques.len()];
        for (k, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                out[*p].push(k);
            }
        }
        out
    }

    /// Bytes held by tables, partial products and beliefs for `m` scene points.
    pub fn memory_estimate(&self, m: usize) -> u128 {
        3 * self.cliques.len() as u128 * (m as u128).pow(4) * std::mem::size_of::<f64>() as u128
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JtConfig {
    /// Relative tie band for the reported tie sets.
    pub tie_band: f64,
    pub memory_cap_bytes: u128,
}

impl Default for JtConfig {
    fn default() -> Self {
        Self {
            tie_band: 1e-4,
            memory_cap_bytes: 4 << 30,
        }
    }
}

/// Row-major offset of the separator (first three positions) of a 4-clique
/// cell, projected onto the positions `pos` of a message over three vertices.
fn project(cell: [usize; 4], pos: [usize; 3], m: usize) -> usize {
    (cell[pos[0]] * m + cell[pos[1]]) * m + cell[pos[2]]
}

fn for_each_cell(m: usize, mut f: impl FnMut(usize, [usize; 4])) {
    let mut cell = [0usize; 4];
    for idx in 0..m.pow(4) {
        f(idx, cell);
        for s in cell.iter_mut().rev() {
            *s += 1;
            if *s < m {
                break;
            }
            *s = 0;
        }
    }
}

fn positions_in(outer: [usize; 4], inner: [usize; 3]) -> [usize; 3] {
    inner.map(|v| outer.iter().position(|&u| u == v).expect("separator inside clique"))
}

/// Output of the two passes.
#[derive(Debug, Clone)]
pub struct JtRun {
    pub assignment: Assignment,
    /// Normalized max-marginal belief of every node.
    pub beliefs: Vec<Vec<f64>>,
    pub tie_sets: Vec<Vec<usize>>,
}

pub fn run_on_tables(jt: &JunctionTree, tables: &[QuadTable], tie_band: f64) -> JtRun {
    let m = tables[0].m;
    let nodes = jt.cliques.len();
    let children = jt.children();

    let absorb = |pot: &mut [f64], k: usize, msg: &[f64], sep: [usize; 3]| {
        let pos = positions_in(jt.cliques[k], sep);
        for_each_cell(m, |idx, cell| pot[idx] *= msg[project(cell, pos, m)]);
    };
    let max_onto_separator = |pot: &[f64], pos: [usize; 3]| -> Vec<f64> {
        let mut out = vec![0.0f64; m * m * m];
        if pos == [0, 1, 2] {
            for (o, row) in out.iter_mut().zip(pot.chunks_exact(m)) {
                *o = row.iter().copied().fold(0.0, f64::max);
            }
        } else {
            for_each_cell(m, |idx, cell| {
                let j = project(cell, pos, m);
                out[j] = out[j].max(pot[idx]);
            });
        }
        let top = out.iter().copied().fold(0.0, f64::max);
        if top > 0.0 {
            out.iter_mut().for_each(|x| *x /= top);
        }
        out
    };
    let child_sep = |c: usize| jt.separator(c).expect("child has a parent");

    // upward: children carry higher node indices than their parents
    let mut ups = vec![Vec::new(); nodes];
    let mut partial = vec![Vec::new(); nodes];
    for k in (0..nodes).rev() {
        let mut pot = tables[k].values.clone();
        for &c in &children[k] {
            absorb(&mut pot, k, &ups[c], child_sep(c));
        }
        if jt.parent[k].is_some() {
            ups[k] = max_onto_separator(&pot, [0, 1, 2]);
        }
        partial[k] = pot;
    }

    // downward, excluding the receiving child's own message
    let mut downs: Vec<Option<Vec<f64>>> = vec![None; nodes];
    let mut scratch = vec![0.0f64; m.pow(4)];
    for k in 0..nodes {
        for &c in &children[k] {
            scratch.copy_from_slice(&tables[k].values);
            for &other in children[k].iter().filter(|&&o| o != c) {
                absorb(&mut scratch, k, &ups[other], child_sep(other));
            }
            if let Some(d) = &downs[k] {
                absorb(&mut scratch, k, d, child_sep(k));
            }
            downs[c] = Some(max_onto_separator(&scratch, positions_in(jt.cliques[k], child_sep(c))));
        }
    }

    // traceback through the upward partials
    let mut x = vec![usize::MAX; jt.n];
    let root = argmax(&partial[0]);
    let root_cell = [root / (m * m * m), (root / (m * m)) % m, (root / m) % m, root % m];
    for (v, s) in jt.cliques[0].into_iter().zip(root_cell) {
        x[v] = s;
    }
    for k in 1..nodes {
        let [a, b, c, v] = jt.cliques[k];
        let base = ((x[a] * m + x[b]) * m + x[c]) * m;
        x[v] = argmax(&partial[k][base..base + m]);
    }

    // partials become beliefs in place
    let mut beliefs = partial;
    for (k, b) in beliefs.iter_mut().enumerate() {
        if let Some(d) = &downs[k] {
            for (row, &w) in b.chunks_exact_mut(m).zip(d.iter()) {
                row.iter_mut().for_each(|x| *x *= w);
            }
        }
        let total: f64 = b.iter().sum();
        if total > 0.0 {
            b.iter_mut().for_each(|x| *x /= total);
        }
    }

    let mut tie_sets = vec![Vec::new(); jt.n];
    for (k, clique) in jt.cliques.iter().enumerate() {
        let own: &[usize] = if k == 0 { &[0, 1, 2, 3] } else { &[3] };
        for &p in own {
            let v = clique[p];
            let mut mm = vec![0.0f64; m];
            for_each_cell(m, |idx, cell| mm[cell[p]] = mm[cell[p]].max(beliefs[k][idx]));
            tie_sets[v] = tie_set(&mm, x[v], tie_band);
        }
    }

    JtRun {
        assignment: Assignment(x),
        beliefs,
        tie_sets,
    }
}

pub fn build_quad_tables(
    template: &PointPattern,
    scene: &PointPattern,
    jt: &JunctionTree,
    params: &PotentialParams,
) -> Result<Vec<QuadTable>> {
    params.validate()?;
    if template.len() != jt.n {
        return Err(MatchError::InvalidInput(format!(
            "template has {} points but the junction tree spans {}",
            template.len(),
            jt.n
        )));
    }
    let (dt, ds) = (distance_matrix(template), distance_matrix(scene));
    jt.cliques
        .iter()
        .zip(&jt.owned)
        .map(|(&c, own)| build_table(c, own, &dt, &ds, params))
        .collect()
}

pub fn jt_map(
    template: &PointPattern,
    scene: &PointPattern,
    jt: &JunctionTree,
    params: &PotentialParams,
    cfg: &JtConfig,
) -> Result<MatchResult> {
    let start = Instant::now();
    let required = jt.memory_estimate(scene.len());
    if required > cfg.memory_cap_bytes {
        return Err(MatchError::Resource {
            what: "junction-tree memory (bytes)",
            required,
            limit: cfg.memory_cap_bytes,
        });
    }
    let tables = build_quad_tables(template, scene, jt, params)?;
    let run = run_on_tables(jt, &tables, cfg.tie_band);
    let residual = objective_residual(template, scene, &run.assignment)?;
    Ok(MatchResult {
        collisions: run.assignment.collisions(),
        assignment: run.assignment,
        tie_sets: run.tie_sets,
        residual,
        iterations: 1,
        converged: true,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_instance;
    use crate::graph::{build_squared_cycle, build_three_tree};
    use crate::oracle::{brute_force_map_tables, OracleOptions};
    use std::collections::BTreeSet;

    #[test]
    fn tree_shapes() {
        let jt = build_junction_tree(&build_three_tree(4, 0).unwrap()).unwrap();
        assert_eq!(jt.cliques().len(), 1);
        let set: BTreeSet<usize> = jt.cliques()[0].into_iter().collect();
        assert_eq!(set, (0..4).collect());

        let jt = build_junction_tree(&build_three_tree(6, 0).unwrap()).unwrap();
        assert_eq!(jt.cliques().len(), 3);
        assert_eq!(jt.tree_edges().len(), 2);
        for k in 1..3 {
            assert_eq!(jt.separator(k).unwrap().len(), 3);
        }
    }

    #[test]
    fn rejects_wrong_kind_and_size() {
        assert!(matches!(
            build_junction_tree(&build_squared_cycle(6).unwrap()),
            Err(MatchError::InvalidGraph(_))
        ));
        assert!(build_junction_tree(&build_three_tree(3, 0).unwrap()).is_err());
    }

    #[test]
    fn tree_invariants() {
        for seed in 0..50 {
            let g = build_three_tree(12, seed).unwrap();
            let jt = build_junction_tree(&g).unwrap();
            // separator inside parent, ownership partitions the edges
            for k in 1..jt.cliques().len() {
                let p = jt.parent(k).unwrap();
                assert!(p < k);
                assert!(jt.separator(k).unwrap().iter().all(|v| jt.cliques()[p].contains(v)));
            }
            let mut owned = BTreeSet::new();
            for k in 0..jt.cliques().len() {
                for &e in jt.owned_edges(k) {
                    assert!(owned.insert(e));
                }
            }
            assert_eq!(&owned, g.edges());

            // running intersection: nodes containing v form a connected subtree
            for v in 0..12 {
                let holders: Vec<usize> = (0..jt.cliques().len()).filter(|&k| jt.cliques()[k].contains(&v)).collect();
                let tops = holders
                    .iter()
                    .filter(|&&k| jt.parent(k).is_none_or(|p| !jt.cliques()[p].contains(&v)))
                    .count();
                assert_eq!(tops, 1, "vertex {v} seed {seed}");
            }
        }
    }

    #[test]
    fn memory_cap_is_enforced() {
        let inst = generate_instance(6, 10, 0.0, 0).unwrap();
        let jt = build_junction_tree(&build_three_tree(6, 0).unwrap()).unwrap();
        let cfg = JtConfig {
            memory_cap_bytes: 1000,
            ..JtConfig::default()
        };
        match jt_map(&inst.template, &inst.scene, &jt, &PotentialParams::default(), &cfg) {
            Err(MatchError::Resource { required, .. }) => assert_eq!(required, 3 * 3 * 10_000 * 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn exact_instance_delta_mode() {
        for seed in 0..10 {
            let inst = generate_instance(8, 12, 0.0, seed).unwrap();
            let jt = build_junction_tree(&build_three_tree(8, seed).unwrap()).unwrap();
            let params = PotentialParams::delta_for(&inst.template);
            let r = jt_map(&inst.template, &inst.scene, &jt, &params, &JtConfig::default()).unwrap();
            assert_eq!(r.assignment, inst.truth);
            assert!(r.residual < 1e-20);
            for (v, t) in r.tie_sets.iter().enumerate() {
                assert!(t.contains(&r.assignment[v]));
            }
        }
    }

    #[test]
    fn matches_oracle_and_separators_agree() {
        for seed in 0..10 {
            let inst = generate_instance(5, 5, 0.05, seed).unwrap();
            let jt = build_junction_tree(&build_three_tree(5, seed).unwrap()).unwrap();
            let params = PotentialParams::default();
            let tables = build_quad_tables(&inst.template, &inst.scene, &jt, &params).unwrap();
            let run = run_on_tables(&jt, &tables, 1e-4);
            let (best, _) = brute_force_map_tables(5, &tables, OracleOptions::default()).unwrap();
            assert_eq!(run.assignment, best, "seed {seed}");

            // decoded cells are max-marginal maximizers in every node
            for (k, c) in jt.cliques().iter().enumerate() {
                let b = &run.beliefs[k];
                let cell = c.map(|v| run.assignment[v]);
                let idx = cell.iter().fold(0, |acc, &s| acc * 5 + s);
                let top = b.iter().copied().fold(0.0, f64::max);
                assert!((b[idx] - top).abs() <= 1e-12 * top);
            }
        }
    }
}
