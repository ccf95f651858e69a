//! Match-graph topologies: the squared cycle (a Hamiltonian cycle plus all
//! distance-two chords) and random 3-trees, with structural checks.

mod chain;
pub mod rigidity;

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MatchError, Result};

pub use chain::{clique_chain, CliqueChain, EdgeOwnership};

/// Unordered vertex pair, stored with the smaller index first.
pub type Edge = (usize, usize);

pub fn edge(i: usize, j: usize) -> Edge {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    SquaredCycle,
    ThreeTree,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchGraph {
    n: usize,
    edges: BTreeSet<Edge>,
    kind: GraphKind,
    /// Cycle traversal order (squared cycle only).
    order: Vec<usize>,
    /// Attachment triangle of each vertex `v >= 3`, at index `v - 3` (3-tree only).
    attachments: Vec<[usize; 3]>,
}

/// Debug/golden serialization: `{"n":…, "kind":…, "edges":[[i,j],…]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub kind: GraphKind,
    pub edges: Vec<[usize; 2]>,
}

pub const MIN_SQUARED_CYCLE: usize = 5;

/// Squared cycle over vertices `0..n` in index order.
pub fn build_squared_cycle(n: usize) -> Result<MatchGraph> {
    build_squared_cycle_with_order((0..n).collect())
}

/// Squared cycle whose underlying Hamiltonian cycle visits `order`.
pub fn build_squared_cycle_with_order(order: Vec<usize>) -> Result<MatchGraph> {
    let n = order.len();
    if n < MIN_SQUARED_CYCLE {
        return Err(MatchError::DegenerateSize {
            n,
            min: MIN_SQUARED_CYCLE,
        });
    }
    let mut seen = vec![false; n];
    for &v in &order {
        if v >= n || std::mem::replace(&mut seen[v], true) {
            return Err(MatchError::InvalidParameters(
                "cycle order must be a permutation of 0..n".into(),
            ));
        }
    }
    let mut edges = BTreeSet::new();
    for i in 0..n {
        edges.insert(edge(order[i], order[(i + 1) % n]));
        edges.insert(edge(order[i], order[(i + 2) % n]));
    }
    Ok(MatchGraph {
        n,
        edges,
        kind: GraphKind::SquaredCycle,
        order,
        attachments: Vec::new(),
    })
}

/// Squared cycle over a seeded random traversal order.
pub fn build_squared_cycle_shuffled(n: usize, seed: u64) -> Result<MatchGraph> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    build_squared_cycle_with_order(order)
}

/// Random 3-tree: a triangle on `{0, 1, 2}`, then each vertex `v >= 3` joined
/// to a uniformly chosen existing triangle.
pub fn build_three_tree(n: usize, seed: u64) -> Result<MatchGraph> {
    if n < 3 {
        return Err(MatchError::DegenerateSize { n, min: 3 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triangles: Vec<[usize; 3]> = vec![[0, 1, 2]];
    let mut edges: BTreeSet<Edge> = [(0, 1), (0, 2), (1, 2)].into_iter().collect();
    let mut attachments = Vec::with_capacity(n - 3);
    for v in 3..n {
        let t = *triangles.choose(&mut rng).expect("at least one triangle");
        for &u in &t {
            edges.insert(edge(u, v));
        }
        triangles.extend([[t[0], t[1], v], [t[0], t[2], v], [t[1], t[2], v]]);
        attachments.push(t);
    }
    Ok(MatchGraph {
        n,
        edges,
        kind: GraphKind::ThreeTree,
        order: Vec::new(),
        attachments,
    })
}

impl MatchGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.contains(&edge(i, j))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub fn cycle_order(&self) -> &[usize] {
        &self.order
    }

    pub fn attachments(&self) -> &[[usize; 3]] {
        &self.attachments
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            n: self.n,
            kind: self.kind,
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }
}

/// All unordered pairs that are not edges.
pub fn complement_edges(g: &MatchGraph) -> BTreeSet<Edge> {
    let mut out = BTreeSet::new();
    for i in 0..g.n {
        for j in i + 1..g.n {
            if !g.edges.contains(&(i, j)) {
                out.insert((i, j));
            }
        }
    }
    out
}

/// Maximum-cardinality search order, earliest-eliminated vertex first.
fn mcs_elimination_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut weight = vec![0usize; n];
    let mut numbered = vec![false; n];
    let mut visit = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !numbered[v])
            .max_by_key(|&v| (weight[v], std::cmp::Reverse(v)))
            .expect("unnumbered vertex");
        numbered[v] = true;
        visit.push(v);
        for &u in &adj[v] {
            if !numbered[u] {
                weight[u] += 1;
            }
        }
    }
    visit.reverse();
    visit
}

/// Checks that `order` is a perfect elimination ordering: each vertex's later
/// neighbours form a clique.
pub fn is_perfect_elimination_ordering(g: &MatchGraph, order: &[usize]) -> bool {
    let n = g.n;
    if order.len() != n {
        return false;
    }
    let mut pos = vec![usize::MAX; n];
    for (k, &v) in order.iter().enumerate() {
        if v >= n || pos[v] != usize::MAX {
            return false;
        }
        pos[v] = k;
    }
    let adj = g.adjacency();
    for &v in order {
        let later: Vec<usize> = adj[v].iter().copied().filter(|&u| pos[u] > pos[v]).collect();
        for (a, &x) in later.iter().enumerate() {
            for &y in &later[a + 1..] {
                if !g.has_edge(x, y) {
                    return false;
                }
            }
        }
    }
    true
}

pub fn is_chordal(g: &MatchGraph) -> bool {
    let order = mcs_elimination_order(&g.adjacency());
    is_perfect_elimination_ordering(g, &order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(list: &[(usize, usize)]) -> BTreeSet<Edge> {
        list.iter().map(|&(a, b)| edge(a, b)).collect()
    }

    #[test]
    fn squared_cycle_six() {
        let g = build_squared_cycle(6).unwrap();
        let expected = pairs(&[
            (0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0),
            (0, 2), (1, 3), (2, 4), (3, 5), (4, 0), (5, 1),
        ]);
        assert_eq!(g.edges(), &expected);
        assert_eq!(g.edges().len(), 12);
        assert_eq!(complement_edges(&g), pairs(&[(0, 3), (1, 4), (2, 5)]));
    }

    #[test]
    fn squared_cycle_five_is_complete() {
        let g = build_squared_cycle(5).unwrap();
        assert_eq!(g.edges().len(), 10);
        assert!(complement_edges(&g).is_empty());
        assert!(is_chordal(&g));
    }

    #[test]
    fn squared_cycle_degrees() {
        let g = build_squared_cycle(8).unwrap();
        assert!((0..8).all(|v| g.degree(v) == 4));
    }

    #[test]
    fn squared_cycle_refuses_small_n() {
        for n in 0..5 {
            assert!(matches!(
                build_squared_cycle(n),
                Err(MatchError::DegenerateSize { min: 5, .. })
            ));
        }
    }

    #[test]
    fn shuffled_order_is_still_a_squared_cycle() {
        let g = build_squared_cycle_shuffled(9, 3).unwrap();
        assert_eq!(g.edges().len(), 18);
        assert!((0..9).all(|v| g.degree(v) == 4));
        assert!(build_squared_cycle_with_order(vec![0, 1, 2, 3, 3]).is_err());
    }

    #[test]
    fn three_tree_counts_and_chordality() {
        let t3 = build_three_tree(3, 0).unwrap();
        assert_eq!(t3.edges().len(), 3);
        assert!(complement_edges(&t3).is_empty());
        assert_eq!(build_three_tree(6, 0).unwrap().edges().len(), 12);
        assert!(is_chordal(&build_three_tree(7, 11).unwrap()));
        assert!(build_three_tree(2, 0).is_err());
    }

    #[test]
    fn squared_cycle_six_has_no_peo() {
        assert!(!is_chordal(&build_squared_cycle(6).unwrap()));
    }

    #[test]
    fn json_shape() {
        let g = build_squared_cycle(5).unwrap();
        let v = serde_json::to_value(g.to_json()).unwrap();
        assert_eq!(v["n"], 5);
        assert_eq!(v["kind"], "squared_cycle");
        assert_eq!(v["edges"].as_array().unwrap().len(), 10);
        assert_eq!(v["edges"][0], serde_json::json!([0, 1]));
        let back: GraphJson = serde_json::from_value(v).unwrap();
        assert_eq!(back, g.to_json());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn squared_cycle_structure(n in 5usize..40) {
            let g = build_squared_cycle(n).unwrap();
            prop_assert_eq!(g.edges().len(), 2 * n);
            prop_assert!((0..n).all(|v| g.degree(v) == 4));
            prop_assert!(g.edges().iter().all(|&(a, b)| a < b && b < n));
            prop_assert_eq!(complement_edges(&g).len(), n * (n - 1) / 2 - 2 * n);
            prop_assert_eq!(is_chordal(&g), n == 5);
        }

        #[test]
        fn three_tree_structure(n in 3usize..40, seed in any::<u64>()) {
            let g = build_three_tree(n, seed).unwrap();
            prop_assert_eq!(g.edges().len(), 3 * n - 6);
            prop_assert!(is_chordal(&g));
            // every attachment is a triangle of earlier vertices
            for (k, t) in g.attachments().iter().enumerate() {
                let v = k + 3;
                prop_assert!(t.iter().all(|&u| u < v));
                prop_assert!(g.has_edge(t[0], t[1]) && g.has_edge(t[0], t[2]) && g.has_edge(t[1], t[2]));
            }
        }
    }
}
