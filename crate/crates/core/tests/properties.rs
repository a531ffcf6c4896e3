//! Cross-module properties checked against independent oracles.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splitgnn_core::generate::GenSpec;
use splitgnn_core::graph::{EdgeClass, EdgeSplitGraph, FactorGraph, RootPolicy, SpanningForest};
use splitgnn_core::oracle::{brute_force, exact_solve};
use splitgnn_core::score::{compute_scores, compute_scores_with, cost_from_report, DelPath};
use splitgnn_core::sparse::{segment_add, segment_max, InstanceMatrices, Matrix};
use splitgnn_core::usb::{
    relaxation_forward, relaxation_grad, relaxation_loss, select_flip_batch, usb_solve, RelaxedState, UsbParams,
};
use splitgnn_core::{Assignment, WcnfFormula};

/// Raw clause list `(weight, signed literals)` for the naive evaluator.
fn raw(f: &WcnfFormula) -> Vec<(u64, Vec<i64>)> {
    f.clauses().iter().map(|c| (c.weight(), c.literals().iter().map(|l| l.to_dimacs()).collect())).collect()
}

fn naive_cost(clauses: &[(u64, Vec<i64>)], values: &[bool]) -> u64 {
    let mut total = 0;
    for (w, lits) in clauses {
        let mut sat = false;
        for &l in lits {
            let v = values[(l.unsigned_abs() - 1) as usize];
            if (l > 0) == v {
                sat = true;
            }
        }
        if !sat {
            total += w;
        }
    }
    total
}

fn random_instance(rng: &mut ChaCha8Rng) -> WcnfFormula {
    let n = rng.random_range(3..=20);
    let k = rng.random_range(2..=3);
    let m = rng.random_range(1..=100);
    GenSpec::uniform(k, n, m, true, rng.random()).generate().unwrap()
}

fn random_assignment(rng: &mut ChaCha8Rng, n: usize) -> Assignment {
    Assignment::from_signs((0..n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect())
}

#[test]
fn cost_matches_naive_evaluator() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let f = random_instance(&mut rng);
        let a = random_assignment(&mut rng, f.num_vars());
        let cost = f.cost(&a).unwrap();
        assert_eq!(cost, naive_cost(&raw(&f), &a.to_bools()));
        assert!(cost <= f.total_weight());
        assert_eq!(cost == 0, f.clauses().iter().all(|c| c.is_satisfied(&a)));
    }
}

#[test]
fn flipping_an_absent_variable_keeps_cost() {
    let f = WcnfFormula::from_weighted(4, &[(3, &[1, -2]), (5, &[2, 3])]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let a = random_assignment(&mut rng, 4);
        assert_eq!(f.cost(&a).unwrap(), f.cost(&a.flipped(3)).unwrap());
    }
}

#[test]
fn dimacs_round_trip_on_generated_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..100 {
        let mut f = random_instance(&mut rng);
        if i % 3 == 0 {
            f = f.with_hard_threshold(Some(90));
        }
        let text = f.to_dimacs();
        let parsed = WcnfFormula::parse_dimacs(text.as_bytes()).unwrap();
        assert_eq!(parsed, f);
        assert_eq!(parsed.to_dimacs(), text);
    }
}

proptest! {
    #[test]
    fn write_is_idempotent(seed in any::<u64>(), n in 2usize..15, m in 1usize..40) {
        let f = GenSpec::uniform(2, n, m, true, seed).generate().unwrap();
        let once = f.to_dimacs();
        let twice = WcnfFormula::parse_dimacs(once.as_bytes()).unwrap().to_dimacs();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn row_times_unit_counts_true_literals(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_instance(&mut rng);
        let a = random_assignment(&mut rng, f.num_vars());
        let mats = InstanceMatrices::build(&f);
        let v = mats.row_times(&a, Matrix::Unit).unwrap();
        for (j, c) in f.clauses().iter().enumerate() {
            let t = c.true_literals(&a) as i64;
            prop_assert_eq!(v[j], 2 * t - c.len() as i64);
        }
    }

    #[test]
    fn segment_kernels_match_dense_scans(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = rng.random_range(1..10usize);
        let cols = rng.random_range(1..10usize);
        let mut dense = vec![vec![None; cols]; rows];
        for row in dense.iter_mut() {
            for cell in row.iter_mut() {
                if rng.random_bool(0.4) {
                    *cell = Some(rng.random_range(-5i64..=5));
                }
            }
        }
        let (mut vals, mut rs, mut cs) = (vec![], vec![], vec![]);
        for c in 0..cols {
            for (r, row) in dense.iter().enumerate() {
                if let Some(v) = row[c] {
                    vals.push(v);
                    rs.push(r);
                    cs.push(c);
                }
            }
        }
        let got = segment_max(&vals, &rs, &cs, cols);
        for c in 0..cols {
            let mut best: Option<(usize, i64)> = None;
            for (r, row) in dense.iter().enumerate() {
                if let Some(v) = row[c] {
                    if best.is_none_or(|(_, b)| v > b) {
                        best = Some((r, v));
                    }
                }
            }
            prop_assert_eq!(got.max_pos[c], best.map(|b| b.0));
            prop_assert_eq!(got.max_val[c], best.map_or(0, |b| b.1));
        }
        let mut naive = vec![0i64; rows];
        for (r, v) in rs.iter().zip(&vals) {
            naive[*r] += v;
        }
        prop_assert_eq!(segment_add(&rs, &vals, rows), naive);
    }
}

#[test]
fn row_times_matches_dense_product() {
    let f = GenSpec::uniform(3, 12, 40, true, 5).generate().unwrap();
    let mats = InstanceMatrices::build(&f);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for which in [Matrix::Weighted, Matrix::Unit, Matrix::Positive] {
        let dense = mats.to_dense(which);
        let a = random_assignment(&mut rng, 12);
        let expected: Vec<i64> =
            (0..40).map(|j| (0..12).map(|i| i64::from(a.signs()[i]) * dense[i][j]).sum()).collect();
        assert_eq!(mats.row_times(&a, which).unwrap(), expected);
    }
    let rows: usize = (0..12).map(|i| mats.row(i).count()).sum();
    assert_eq!(rows, mats.nnz());
    assert_eq!(mats.nnz(), f.num_literals());
}

#[test]
fn scores_equal_flip_gains() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let f = random_instance(&mut rng);
        let clauses = raw(&f);
        let mats = InstanceMatrices::build(&f);
        let a = random_assignment(&mut rng, f.num_vars());
        let report = compute_scores(&a, &mats).unwrap();
        assert_eq!(report, compute_scores_with(&a, &mats, DelPath::SegmentMax).unwrap());
        let base = naive_cost(&clauses, &a.to_bools());
        assert_eq!(cost_from_report(&report, &mats), base);
        let satisfied: u64 = (0..f.num_clauses()).filter(|&j| !report.unsat[j]).map(|j| mats.weights()[j]).sum();
        assert_eq!(base + satisfied, f.total_weight());
        for v in 0..f.num_vars() {
            let flipped = naive_cost(&clauses, &a.flipped(v).to_bools());
            assert_eq!(report.score[v], base as i64 - flipped as i64);
        }
        for j in 0..f.num_clauses() {
            assert!(!(report.unsat[j] && report.one_true[j]));
        }
    }
}

#[test]
fn clause_disjoint_batches_drop_cost_by_their_score_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let f = random_instance(&mut rng);
        let mats = InstanceMatrices::build(&f);
        let a = random_assignment(&mut rng, f.num_vars());
        let report = compute_scores(&a, &mats).unwrap();
        let batch = select_flip_batch(&report, &mats, 10);
        if batch.is_empty() {
            assert!(report.score.iter().all(|&s| s <= 0));
            continue;
        }
        let mut b = a.clone();
        for &v in &batch {
            b.flip(v);
        }
        let gain: i64 = batch.iter().map(|&v| report.score[v]).sum();
        assert!(gain > 0);
        assert_eq!(f.cost(&a).unwrap() as i64 - f.cost(&b).unwrap() as i64, gain);
        // single best flip
        let top = batch[0];
        assert_eq!(f.cost(&a).unwrap() as i64 - f.cost(&a.flipped(top)).unwrap() as i64, report.score[top]);
    }
}

#[test]
fn relaxation_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = UsbParams::default();
    let h = 1e-6;
    let mut checked = 0;
    while checked < 100 {
        let f = random_instance(&mut rng);
        let mats = InstanceMatrices::build(&f);
        let x: Vec<f64> = (0..f.num_vars()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let report = compute_scores(&Assignment::from_reals(&x), &mats).unwrap();
        if report.num_unsat() == 0 {
            continue;
        }
        checked += 1;
        let loss = |x: &[f64]| relaxation_loss(&relaxation_forward(x, &report, &mats, &params), &report, &mats).unwrap();
        let g = relaxation_grad(&x, &report, &mats, &params);
        let fd: Vec<f64> = (0..x.len())
            .map(|i| {
                let (mut up, mut down) = (x.clone(), x.clone());
                up[i] += h;
                down[i] -= h;
                (loss(&up) - loss(&down)) / (2.0 * h)
            })
            .collect();
        // gradient entries span many decades, so compare against the largest one
        let scale = g.iter().chain(&fd).fold(0.0f64, |a, v| a.max(v.abs()));
        let worst = g.iter().zip(&fd).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        if scale > 0.0 {
            assert!(worst / scale < 1e-5, "analytic {g:?} fd {fd:?}");
        }
    }
}

#[test]
fn edge_split_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for i in 0..500 {
        let f = random_instance(&mut rng);
        let graph = FactorGraph::build(&f);
        let policy = if i % 2 == 0 { RootPolicy::PseudoCenter } else { RootPolicy::LowestIndex };
        let forest = SpanningForest::build(&graph, policy);
        let split = EdgeSplitGraph::split(&graph, &forest).unwrap();

        let mut undirected: Vec<(usize, usize)> = Vec::new();
        let mut all_directed = Vec::new();
        for class in EdgeClass::ALL {
            let edges = split.directed_edges(class);
            let reversed: Vec<(usize, usize)> = {
                let mut r: Vec<_> = split.directed_edges(class.reverse()).iter().map(|&(a, b)| (b, a)).collect();
                r.sort_unstable();
                r
            };
            assert_eq!(edges, reversed);
            for &(a, b) in &edges {
                let (da, db) = (forest.depth(a), forest.depth(b));
                match class {
                    EdgeClass::Parent => assert!(forest.is_tree_edge(a, b) && da + 1 == db),
                    EdgeClass::Child => assert!(forest.is_tree_edge(a, b) && db + 1 == da),
                    EdgeClass::NtUp => assert!(!forest.is_tree_edge(a, b) && da > db),
                    EdgeClass::NtDown => assert!(!forest.is_tree_edge(a, b) && da < db),
                }
                assert_eq!(da.abs_diff(db) % 2, 1);
                if a < b {
                    undirected.push((a, b));
                }
            }
            all_directed.extend(edges);
        }
        let total = all_directed.len();
        all_directed.sort_unstable();
        all_directed.dedup();
        assert_eq!(all_directed.len(), total, "classes overlap");
        undirected.sort_unstable();
        let mut expected: Vec<(usize, usize)> =
            graph.edges().iter().map(|&(l, j)| (l, graph.clause_node(j))).collect();
        expected.sort_unstable();
        assert_eq!(undirected, expected);
        assert_eq!(split.class_len(EdgeClass::Parent), graph.num_nodes() - forest.num_components());

        let again = EdgeSplitGraph::split(&graph, &SpanningForest::build(&graph, policy)).unwrap();
        assert_eq!(again, split);
    }
}

#[test]
fn branch_and_bound_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let n = rng.random_range(3..=14);
        let k = rng.random_range(2..=3);
        let m = rng.random_range(1..=5 * n);
        let f = GenSpec::uniform(k, n, m, true, rng.random()).generate().unwrap();
        let r = exact_solve(&f);
        assert!(r.proven);
        assert_eq!(r.optimal_cost, brute_force(&f).0);
        assert_eq!(f.cost(&r.optimal_assignment).unwrap(), r.optimal_cost);
    }
}

#[test]
fn usb_never_beats_the_oracle_and_reports_consistent_costs() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..20 {
        let f = GenSpec::uniform(3, 12, 50, true, i).generate().unwrap();
        let mats = InstanceMatrices::build(&f);
        let opt = exact_solve(&f).optimal_cost;
        let x = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let params = UsbParams { max_steps: Some(2_000), seed: i, ..Default::default() };
        let out = usb_solve(&f, &mats, RelaxedState::new(x), None, &params).unwrap();
        let best = out.best.unwrap();
        assert!(best.cost >= opt);
        assert_eq!(f.cost(&best.assignment).unwrap(), best.cost);
        assert!(out.improvements.windows(2).all(|w| w[1].cost < w[0].cost));
    }
}

#[test]
fn usb_is_deterministic_under_a_step_cap() {
    let f = GenSpec::uniform(3, 20, 90, true, 4).generate().unwrap();
    let mats = InstanceMatrices::build(&f);
    let params = UsbParams { max_steps: Some(3_000), seed: 5, ..Default::default() };
    let run = || {
        let out = usb_solve(&f, &mats, RelaxedState::new(vec![0.3; 20]), None, &params).unwrap();
        let costs: Vec<(u64, u64)> = out.improvements.iter().map(|i| (i.step, i.cost)).collect();
        (out.best, out.steps, out.restarts, costs)
    };
    assert_eq!(run(), run());
}
