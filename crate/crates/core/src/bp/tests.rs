use super::*;
use crate::geometry::generate_instance;
use crate::graph::build_squared_cycle;
use crate::oracle::{brute_force_map_tables, OracleOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn chain(n: usize) -> CliqueChain {
    clique_chain(&build_squared_cycle(n).unwrap()).unwrap()
}

fn random_tables(c: &CliqueChain, m: usize, seed: u64) -> Vec<TripleTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    c.cliques()
        .iter()
        .map(|&q| TripleTable {
            clique: q,
            m,
            values: (0..m * m * m).map(|_| rng.random_range(0.001..1.0)).collect(),
        })
        .collect()
}

fn uniform_tables(c: &CliqueChain, m: usize) -> Vec<TripleTable> {
    c.cliques()
        .iter()
        .map(|&q| TripleTable {
            clique: q,
            m,
            values: vec![1.0; m * m * m],
        })
        .collect()
}

fn max_normalized(mut v: Vec<f64>) -> Vec<f64> {
    let top = v.iter().copied().fold(0.0, f64::max);
    v.iter_mut().for_each(|x| *x /= top);
    v
}

#[test]
fn uniform_tables_are_a_fixed_point() {
    let c = chain(6);
    let tables = uniform_tables(&c, 3);
    let mut state = MessageState::new(6, 3);
    for _ in 0..3 {
        bp_iterate(&c, &tables, &mut state, Schedule::Synchronous);
    }
    assert!(state.fwd.iter().chain(&state.bwd).flatten().all(|&x| x == 1.0));
    for b in beliefs(&c, &tables, &state) {
        assert!(b.iter().all(|&x| (x - 1.0 / 27.0).abs() < 1e-15));
    }
}

/// Each message is recomputed by an explicit max over the eliminated
/// variable, written independently of the row-sliced kernels.
#[test]
fn messages_match_explicit_maximization() {
    let (n, m) = (5, 2);
    let c = chain(n);
    let tables = random_tables(&c, m, 42);
    let mut state = MessageState::new(n, m);
    for _ in 0..4 {
        let before = state.clone();
        bp_iterate(&c, &tables, &mut state, Schedule::Synchronous);
        for i in 0..n {
            let t = |a: usize, b: usize, cc: usize| tables[i].get([a, b, cc]);
            let fin = &before.fwd[(i + n - 1) % n];
            let bin = &before.bwd[(i + 1) % n];
            let mut fwd = vec![0.0; m * m];
            let mut bwd = vec![0.0; m * m];
            for x in 0..m {
                for y in 0..m {
                    fwd[x * m + y] = (0..m).map(|a| t(a, x, y) * fin[a * m + x]).fold(f64::MIN, f64::max);
                    bwd[x * m + y] = (0..m).map(|z| t(x, y, z) * bin[y * m + z]).fold(f64::MIN, f64::max);
                }
            }
            let (fwd, bwd) = (max_normalized(fwd), max_normalized(bwd));
            for k in 0..m * m {
                assert!((fwd[k] - state.fwd[i][k]).abs() < 1e-15);
                assert!((bwd[k] - state.bwd[i][k]).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn beliefs_match_hand_products() {
    let (n, m) = (5, 2);
    let c = chain(n);
    let tables = random_tables(&c, m, 7);
    let mut state = MessageState::new(n, m);
    bp_iterate(&c, &tables, &mut state, Schedule::Synchronous);
    bp_iterate(&c, &tables, &mut state, Schedule::Synchronous);
    let bs = beliefs(&c, &tables, &state);
    for (i, b) in bs.iter().enumerate() {
        let raw: Vec<f64> = (0..8)
            .map(|idx| {
                let (a, x, y) = (idx / 4, (idx / 2) % 2, idx % 2);
                tables[i].values[idx] * state.fwd[(i + 4) % 5][a * 2 + x] * state.bwd[(i + 1) % 5][x * 2 + y]
            })
            .collect();
        let total: f64 = raw.iter().sum();
        for idx in [0, 3, 5, 7] {
            assert!((b[idx] - raw[idx] / total).abs() < 1e-15);
        }
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(b.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn convergence_rule() {
    let cfg = ConvergenceConfig::default();
    let a = vec![vec![0.25; 4]; 3];
    assert!(check_convergence(&a, &a, 5, &cfg));
    assert!(!check_convergence(&a, &a, 3, &cfg));

    // MSE exactly at the cutoff does not count as converged
    let cutoff = 0.25;
    let b = vec![vec![0.75; 4]; 3];
    assert_eq!(belief_mse(&a, &b)[0], cutoff);
    let at = ConvergenceConfig {
        mse_cutoff: cutoff,
        ..cfg
    };
    assert!(!check_convergence(&a, &b, 10, &at));
    let above = ConvergenceConfig {
        mse_cutoff: 0.2500001,
        ..cfg
    };
    assert!(check_convergence(&a, &b, 10, &above));
}

#[test]
fn default_cutoffs_follow_scene_size() {
    assert_eq!(ConvergenceConfig::for_scene_size(10).mse_cutoff, 1e-8);
    assert_eq!(ConvergenceConfig::for_scene_size(29).mse_cutoff, 1e-8);
    assert_eq!(ConvergenceConfig::for_scene_size(30).mse_cutoff, 1e-9);
    assert!((ConvergenceConfig::default().tie_band() - 1e-4).abs() < 1e-18);
}

#[test]
fn uniform_beliefs_decode_to_full_ties() {
    let c = chain(5);
    let tables = uniform_tables(&c, 4);
    let run = run_on_tables(&c, &tables, &BpConfig::default(), None);
    assert_eq!(run.decoded.assignment.as_slice(), &[0; 5]);
    assert!(run.decoded.tie_sets.iter().all(|t| t == &vec![0, 1, 2, 3]));
    assert!(run.converged);
    assert_eq!(run.state.iteration, 5);
}

#[test]
fn delta_instance_resolves_within_half_the_cycle() {
    for n in 5..=8 {
        for seed in 0..5 {
            let inst = generate_instance(n, 8, 0.0, seed).unwrap();
            let c = chain(n);
            let params = PotentialParams::delta_for(&inst.template);
            let tables = build_clique_tables(&inst.template, &inst.scene, &c, &c.ownership(), &params).unwrap();
            let mut state = MessageState::new(n, 8);
            for _ in 0..n.div_ceil(2) {
                bp_iterate(&c, &tables, &mut state, Schedule::Synchronous);
            }
            let d = decode(&c, &beliefs(&c, &tables, &state), 8, 1e-4);
            assert_eq!(d.assignment, inst.truth, "n {n} seed {seed}");
        }
    }
}

#[test]
fn gaussian_instance_matches_oracle() {
    for seed in 0..10 {
        let inst = generate_instance(5, 5, 0.05, seed).unwrap();
        let c = chain(5);
        let params = PotentialParams::default();
        let tables = build_clique_tables(&inst.template, &inst.scene, &c, &c.ownership(), &params).unwrap();
        let cfg = BpConfig {
            convergence: ConvergenceConfig {
                max_iterations: 1000,
                ..ConvergenceConfig::default()
            },
            ..BpConfig::default()
        };
        let run = run_on_tables(&c, &tables, &cfg, None);
        let (best, _) = brute_force_map_tables(5, &tables, OracleOptions::default()).unwrap();
        assert!(run.converged);
        assert_eq!(run.decoded.assignment, best, "seed {seed}");
    }
}

#[test]
fn sequential_schedule_reaches_the_same_map() {
    for seed in 0..5 {
        let inst = generate_instance(7, 9, 0.02, seed).unwrap();
        let c = chain(7);
        let tables =
            build_clique_tables(&inst.template, &inst.scene, &c, &c.ownership(), &PotentialParams::default()).unwrap();
        let sync = run_on_tables(&c, &tables, &BpConfig::default(), None);
        let seq = run_on_tables(
            &c,
            &tables,
            &BpConfig {
                schedule: Schedule::Sequential,
                ..BpConfig::default()
            },
            None,
        );
        assert_eq!(sync.decoded.assignment, seq.decoded.assignment);
    }
}

#[test]
fn scaling_tables_changes_nothing() {
    let inst = generate_instance(6, 8, 0.02, 3).unwrap();
    let c = chain(6);
    let tables =
        build_clique_tables(&inst.template, &inst.scene, &c, &c.ownership(), &PotentialParams::default()).unwrap();
    let mut scaled = tables.clone();
    for (k, t) in scaled.iter_mut().enumerate() {
        let f = 0.37 * (k + 1) as f64;
        t.values.iter_mut().for_each(|x| *x *= f);
    }
    let a = run_on_tables(&c, &tables, &BpConfig::default(), None);
    let b = run_on_tables(&c, &scaled, &BpConfig::default(), None);
    assert_eq!(a.decoded, b.decoded);
}

#[test]
fn messages_stay_positive() {
    let inst = generate_instance(8, 10, 0.0, 9).unwrap();
    let c = chain(8);
    let params = PotentialParams::delta_for(&inst.template);
    let tables = build_clique_tables(&inst.template, &inst.scene, &c, &c.ownership(), &params).unwrap();
    let mut state = MessageState::new(8, 10);
    // each message is bounded below by two tables' dynamic range: (1/d^2)^2
    let floor = 1e-12;
    for _ in 0..30 {
        bp_iterate(&c, &tables, &mut state, Schedule::Synchronous);
        assert!(state.fwd.iter().chain(&state.bwd).flatten().all(|&x| x >= floor));
    }
}

#[test]
fn run_bp_reports_consistent_result() {
    let inst = generate_instance(9, 14, 0.01, 4).unwrap();
    let mut rows = Vec::new();
    let mut trace = |it: usize, mse: &[f64]| rows.push((it, mse.len()));
    let r = run_bp(&inst.template, &inst.scene, &PotentialParams::default(), &BpConfig::default(), Some(&mut trace)).unwrap();
    assert_eq!(rows.len(), r.iterations);
    assert!(rows.iter().all(|&(_, k)| k == 9));
    assert!(r.iterations >= 5);
    for (v, t) in r.tie_sets.iter().enumerate() {
        assert!(t.contains(&r.assignment[v]));
    }
    let expected = objective_residual(&inst.template, &inst.scene, &r.assignment).unwrap();
    assert_eq!(r.residual, expected);
    assert_eq!(r.collisions, r.assignment.collisions());
}

#[test]
fn run_bp_refuses_tiny_templates() {
    let inst = generate_instance(4, 6, 0.0, 0).unwrap();
    assert!(matches!(
        run_bp(&inst.template, &inst.scene, &PotentialParams::default(), &BpConfig::default(), None),
        Err(crate::error::MatchError::DegenerateSize { .. })
    ));
}
