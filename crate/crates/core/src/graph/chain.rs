use std::collections::{BTreeMap, BTreeSet};

use crate::error::{MatchError, Result};

use super::{edge, Edge, GraphKind, MatchGraph};

/// The cyclic sequence of overlapping triples `(o[i], o[i+1], o[i+2])` of a
/// squared cycle with traversal order `o`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueChain {
    n: usize,
    cliques: Vec<[usize; 3]>,
}

/// Assignment of each graph edge to the single clique whose potential
/// carries it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeOwnership {
    per_clique: Vec<Vec<Edge>>,
}

pub fn clique_chain(g: &MatchGraph) -> Result<CliqueChain> {
    if g.kind() != GraphKind::SquaredCycle {
        return Err(MatchError::InvalidGraph(
            "clique chains exist only for squared cycles".into(),
        ));
    }
    let o = g.cycle_order();
    let n = o.len();
    let cliques = (0..n)
        .map(|i| [o[i], o[(i + 1) % n], o[(i + 2) % n]])
        .collect();
    Ok(CliqueChain { n, cliques })
}

impl CliqueChain {
    /// Number of template vertices (equal to the number of cliques).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn cliques(&self) -> &[[usize; 3]] {
        &self.cliques
    }

    pub fn clique(&self, i: usize) -> [usize; 3] {
        self.cliques[i]
    }

    pub fn next(&self, i: usize) -> usize {
        (i + 1) % self.len()
    }

    pub fn prev(&self, i: usize) -> usize {
        (i + self.len() - 1) % self.len()
    }

    /// Vertices shared by clique `i` and clique `i + 1`.
    pub fn separator(&self, i: usize) -> [usize; 2] {
        let c = self.cliques[i];
        [c[1], c[2]]
    }

    /// The clique in which `v` is the first member.
    pub fn home_clique(&self, v: usize) -> usize {
        self.cliques
            .iter()
            .position(|c| c[0] == v)
            .expect("every vertex leads exactly one clique")
    }

    /// Clique `i` owns its two edges leaving the first member.
    pub fn ownership(&self) -> EdgeOwnership {
        EdgeOwnership {
            per_clique: self
                .cliques
                .iter()
                .map(|c| vec![edge(c[0], c[1]), edge(c[0], c[2])])
                .collect(),
        }
    }
}

impl EdgeOwnership {
    pub fn from_lists(per_clique: Vec<Vec<Edge>>) -> Self {
        Self {
            per_clique: per_clique
                .into_iter()
                .map(|l| l.into_iter().map(|(a, b)| edge(a, b)).collect())
                .collect(),
        }
    }

    pub fn owned_by(&self, clique: usize) -> &[Edge] {
        &self.per_clique[clique]
    }

    pub fn num_cliques(&self) -> usize {
        self.per_clique.len()
    }

    pub fn owner_map(&self) -> BTreeMap<Edge, usize> {
        let mut out = BTreeMap::new();
        for (c, list) in self.per_clique.iter().enumerate() {
            for &e in list {
                out.insert(e, c);
            }
        }
        out
    }

    pub fn owner_of(&self, e: Edge) -> Option<usize> {
        let e = edge(e.0, e.1);
        self.per_clique.iter().position(|l| l.contains(&e))
    }

    /// True if every edge in `edges` is owned exactly once and nothing else is owned.
    pub fn is_partition_of(&self, edges: &BTreeSet<Edge>) -> bool {
        let mut seen = BTreeSet::new();
        for &e in self.per_clique.iter().flatten() {
            if !edges.contains(&e) || !seen.insert(e) {
                return false;
            }
        }
        seen.len() == edges.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_squared_cycle, build_squared_cycle_shuffled, build_three_tree};
    use proptest::prelude::*;

    #[test]
    fn five_vertex_chain() {
        let c = clique_chain(&build_squared_cycle(5).unwrap()).unwrap();
        assert_eq!(
            c.cliques(),
            &[[0, 1, 2], [1, 2, 3], [2, 3, 4], [3, 4, 0], [4, 0, 1]]
        );
        assert_eq!(c.separator(4), [0, 1]);
        assert_eq!(c.home_clique(3), 3);
    }

    #[test]
    fn six_vertex_chain_covers_edges() {
        let g = build_squared_cycle(6).unwrap();
        let c = clique_chain(&g).unwrap();
        assert_eq!(c.len(), 6);
        for &(a, b) in g.edges() {
            assert!(c.cliques().iter().any(|q| q.contains(&a) && q.contains(&b)));
        }
    }

    #[test]
    fn rejects_three_tree() {
        assert!(matches!(
            clique_chain(&build_three_tree(6, 0).unwrap()),
            Err(MatchError::InvalidGraph(_))
        ));
    }

    fn shares(a: &[usize; 3], b: &[usize; 3]) -> BTreeSet<usize> {
        a.iter().filter(|v| b.contains(v)).copied().collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn chain_invariants(n in 5usize..30, seed in any::<u64>()) {
            let g = build_squared_cycle_shuffled(n, seed).unwrap();
            let c = clique_chain(&g).unwrap();
            for i in 0..n {
                let (a, b) = (c.clique(i), c.clique(c.next(i)));
                prop_assert_eq!(shares(&a, &b).len(), 2);
                let sep: BTreeSet<usize> = c.separator(i).into_iter().collect();
                prop_assert_eq!(shares(&a, &b), sep);
            }
            let covered: BTreeSet<usize> = c.cliques().iter().flatten().copied().collect();
            prop_assert_eq!(covered.len(), n);
            prop_assert!(c.ownership().is_partition_of(g.edges()));
            for i in 0..n {
                prop_assert_eq!(c.ownership().owned_by(i).len(), 2);
            }

            // running intersection along one of the two arcs of the cycle
            for i in 0..n {
                for j in 0..n {
                    let common = shares(&c.clique(i), &c.clique(j));
                    let arc_ok = |step: usize| {
                        let mut k = i;
                        loop {
                            if !common.iter().all(|v| c.clique(k).contains(v)) {
                                return false;
                            }
                            if k == j {
                                return true;
                            }
                            k = (k + step) % n;
                        }
                    };
                    prop_assert!(arc_ok(1) || arc_ok(n - 1), "cliques {} and {}", i, j);
                }
            }
        }
    }
}
