//! Exhaustive enumeration over every map from template to scene indices.
//! Deliberately naive: this is the ground truth the message-passing engines
//! are checked against.

use rayon::prelude::*;

use crate::error::{MatchError, Result};
use crate::geometry::{objective_residual, Assignment, PointPattern};
use crate::graph::Edge;
use crate::potentials::CliqueTable;

/// Largest number of maps the oracle will enumerate.
pub const ENUMERATION_LIMIT: u128 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OracleOptions {
    /// Skip maps that send two template points to the same scene point.
    pub injective: bool,
}

fn check_guard(n: usize, m: usize) -> Result<()> {
    let total = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > ENUMERATION_LIMIT {
        return Err(MatchError::Resource {
            what: "brute-force enumeration",
            required: total,
            limit: ENUMERATION_LIMIT,
        });
    }
    if m == 0 || n == 0 {
        return Err(MatchError::InvalidInput("oracle needs n >= 1 and m >= 1".into()));
    }
    Ok(())
}

fn has_repeat(x: &[usize]) -> bool {
    x.iter().enumerate().any(|(i, a)| x[i + 1..].contains(a))
}

/// Best score among maps whose first entry is `lead`, in lexicographic order.
fn best_with_lead(
    n: usize,
    m: usize,
    lead: usize,
    opts: OracleOptions,
    score: &(impl Fn(&[usize]) -> f64 + Sync),
) -> Option<(Vec<usize>, f64)> {
    let mut x = vec![0usize; n];
    x[0] = lead;
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        if !(opts.injective && has_repeat(&x)) {
            let s = score(&x);
            if best.as_ref().is_none_or(|(_, b)| s > *b) {
                best = Some((x.clone(), s));
            }
        }
        // odometer over positions 1..n, last fastest
        let mut k = n;
        loop {
            if k == 1 {
                return best;
            }
            k -= 1;
            x[k] += 1;
            if x[k] < m {
                break;
            }
            x[k] = 0;
        }
    }
}

/// Exact maximizer of `score` over all `m^n` maps; the lexicographically
/// smallest map wins ties.
pub fn brute_force_map(
    n: usize,
    m: usize,
    opts: OracleOptions,
    score: impl Fn(&[usize]) -> f64 + Sync,
) -> Result<(Assignment, f64)> {
    check_guard(n, m)?;
    let per_lead: Vec<Option<(Vec<usize>, f64)>> = (0..m)
        .into_par_iter()
        .map(|lead| best_with_lead(n, m, lead, opts, &score))
        .collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for (x, s) in per_lead.into_iter().flatten() {
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((x, s));
        }
    }
    best.map(|(x, s)| (Assignment(x), s))
        .ok_or_else(|| MatchError::InvalidInput("no admissible map (injective with m < n)".into()))
}

/// MAP of the product of clique tables.
pub fn brute_force_map_tables<const K: usize>(
    n: usize,
    tables: &[CliqueTable<K>],
    opts: OracleOptions,
) -> Result<(Assignment, f64)> {
    let m = tables.first().map_or(0, |t| t.m);
    brute_force_map(n, m, opts, |x| {
        tables.iter().map(|t| t.get(t.clique.map(|v| x[v]))).product()
    })
}

/// MAP of a product of pairwise potentials `potential(edge, x_i, x_j)`.
pub fn brute_force_map_edges(
    n: usize,
    m: usize,
    edges: &[Edge],
    opts: OracleOptions,
    potential: impl Fn(Edge, usize, usize) -> f64 + Sync,
) -> Result<(Assignment, f64)> {
    brute_force_map(n, m, opts, |x| {
        edges.iter().map(|&(i, j)| potential((i, j), x[i], x[j])).product()
    })
}

/// Exact minimizer of the distance-matrix residual and its value.
pub fn brute_force_objective(
    template: &PointPattern,
    scene: &PointPattern,
    opts: OracleOptions,
) -> Result<(Assignment, f64)> {
    let (n, m) = (template.len(), scene.len());
    let (a, neg) = brute_force_map(n, m, opts, |x| {
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let d = template.dist(i, j) - scene.dist(x[i], x[j]);
                total += 2.0 * d * d;
            }
        }
        -total
    })?;
    debug_assert!((objective_residual(template, scene, &a)? + neg).abs() <= 1e-9 * neg.abs().max(1.0));
    Ok((a, -neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_rigid_transform, generate_instance};
    use crate::graph::{build_squared_cycle, clique_chain};
    use crate::potentials::{build_clique_tables, PotentialParams};
    use proptest::prelude::*;

    #[test]
    fn single_variable_is_argmax() {
        let v = [0.2, 0.9, 0.4, 0.9];
        let (a, s) = brute_force_map(1, 4, OracleOptions::default(), |x| v[x[0]]).unwrap();
        assert_eq!(a.as_slice(), &[1]);
        assert_eq!(s, 0.9);
    }

    #[test]
    fn uniform_scores_pick_all_zeros() {
        let (a, _) = brute_force_map(4, 3, OracleOptions::default(), |_| 1.0).unwrap();
        assert_eq!(a.as_slice(), &[0, 0, 0, 0]);
    }

    #[test]
    fn injective_mode() {
        let (a, _) = brute_force_map(3, 3, OracleOptions { injective: true }, |_| 1.0).unwrap();
        assert_eq!(a.as_slice(), &[0, 1, 2]);
        assert!(brute_force_map(3, 2, OracleOptions { injective: true }, |_| 1.0).is_err());
    }

    #[test]
    fn guard_rejects_large_enumerations() {
        assert!(matches!(
            brute_force_map(12, 10, OracleOptions::default(), |_| 0.0),
            Err(MatchError::Resource { .. })
        ));
    }

    #[test]
    fn delta_instance_recovers_truth_with_unit_score() {
        let inst = generate_instance(5, 4.max(5), 0.0, 21).unwrap();
        let chain = clique_chain(&build_squared_cycle(5).unwrap()).unwrap();
        let params = PotentialParams::delta_for(&inst.template);
        let tables = build_clique_tables(&inst.template, &inst.scene, &chain, &chain.ownership(), &params).unwrap();
        let (a, s) = brute_force_map_tables(5, &tables, OracleOptions::default()).unwrap();
        assert_eq!(a, inst.truth);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn delta_instance_with_four_scene_points() {
        // n = 5 template, m = 4 scene: the best map must collapse two points
        let inst = generate_instance(4, 4, 0.0, 2).unwrap();
        let t5 = PointPattern::from_xy(&[(0.1, 0.1), (0.8, 0.2), (0.6, 0.9), (0.2, 0.7), (0.45, 0.4)]).unwrap();
        let chain = clique_chain(&build_squared_cycle(5).unwrap()).unwrap();
        let params = PotentialParams::delta_for(&t5);
        let tables = build_clique_tables(&t5, &inst.scene, &chain, &chain.ownership(), &params).unwrap();
        let (_, s) = brute_force_map_tables(5, &tables, OracleOptions::default()).unwrap();
        assert!(s < 1.0);
    }

    #[test]
    fn objective_picks_unit_pair() {
        let template = PointPattern::from_xy(&[(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let scene = PointPattern::from_xy(&[(0.0, 0.0), (0.0, 1.0), (2.0, 1.0)]).unwrap();
        // scene distances: 0-1 = 1, 1-2 = 2, 0-2 = sqrt 5
        let (a, r) = brute_force_objective(&template, &scene, OracleOptions::default()).unwrap();
        assert_eq!(a.as_slice(), &[0, 1]);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn objective_recovers_rigid_copy() {
        let inst = generate_instance(5, 5, 0.0, 8).unwrap();
        let (a, r) = brute_force_objective(&inst.template, &inst.scene, OracleOptions::default()).unwrap();
        assert_eq!(a, inst.truth);
        assert!(r < 1e-24);
        let moved = apply_rigid_transform(&inst.template, 1.0, (3.0, -1.0), true);
        let (a, _) = brute_force_objective(&inst.template, &moved, OracleOptions { injective: true }).unwrap();
        assert_eq!(a, Assignment::identity(5));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn permutation_covariance(seed in any::<u64>(), rot in 0usize..5) {
            let inst = generate_instance(4, 5, 0.03, seed).unwrap();
            let (a, r) = brute_force_objective(&inst.template, &inst.scene, OracleOptions::default()).unwrap();
            // relabel scene point k as (k + rot) % 5
            let mut pts = inst.scene.points().to_vec();
            pts.rotate_right(rot);
            let relabeled = PointPattern::new(pts).unwrap();
            let (b, r2) = brute_force_objective(&inst.template, &relabeled, OracleOptions::default()).unwrap();
            prop_assert!((r - r2).abs() <= 1e-12);
            let mapped: Vec<usize> = a.as_slice().iter().map(|&k| (k + rot) % 5).collect();
            prop_assert_eq!(b.as_slice(), mapped.as_slice());
        }
    }
}
