mod common;

use fedgraph::graph::{
    brute_force_min_partition, graph_fidelity, graph_fidelity_min, optimal_subgraph_value, subset_objective,
};
use fedgraph::rng::{stream, Domain};
use fedgraph::synth::gen_clusters;
use fedgraph::DeviceGraph;
use proptest::prelude::*;

fn arb_graph(max_nodes: usize, max_edges: usize) -> impl Strategy<Value = DeviceGraph> {
    (2..=max_nodes).prop_flat_map(move |n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let cap = max_edges.min(pairs.len());
        proptest::sample::subsequence(pairs, 0..=cap).prop_map(move |e| DeviceGraph::new(n, &e).unwrap())
    })
}

fn arb_pair(max_nodes: usize, max_edges: usize) -> impl Strategy<Value = (DeviceGraph, DeviceGraph)> {
    (2..=max_nodes).prop_flat_map(move |n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let cap = max_edges.min(pairs.len());
        (
            proptest::sample::subsequence(pairs.clone(), 0..=cap),
            proptest::sample::subsequence(pairs, 0..=pairs_len(n)),
        )
            .prop_map(move |(e, e0)| (DeviceGraph::new(n, &e).unwrap(), DeviceGraph::new(n, &e0).unwrap()))
    })
}

fn pairs_len(n: usize) -> usize {
    n * (n - 1) / 2
}

proptest! {
    #[test]
    fn incidence_rows_have_one_plus_one_minus(g in arb_graph(12, 30)) {
        let d = g.incidence_matrix();
        for r in 0..d.nrows() {
            let row: Vec<f64> = d.row(r).iter().copied().collect();
            prop_assert_eq!(row.iter().sum::<f64>(), 0.0);
            prop_assert_eq!(row.iter().filter(|&&x| x == 1.0).count(), 1);
            prop_assert_eq!(row.iter().filter(|&&x| x == -1.0).count(), 1);
            prop_assert_eq!(row.iter().filter(|&&x| x == 0.0).count(), g.num_nodes() - 2);
        }
    }

    #[test]
    fn incidence_rank_is_nodes_minus_components(g in arb_graph(20, 40)) {
        let d = g.incidence_matrix();
        let rows: Vec<Vec<f64>> = (0..d.nrows()).map(|r| d.row(r).iter().copied().collect()).collect();
        let k = common::components(g.num_nodes(), &common::edge_pairs(&g));
        prop_assert_eq!(g.num_components(), k);
        prop_assert_eq!(common::rank(rows), g.num_nodes() - k);
    }

    #[test]
    fn subgraph_value_equals_exhaustive_minimum((g, g0) in arb_pair(8, 12), seed in any::<u64>()) {
        let best = optimal_subgraph_value(&g, &g0).unwrap();
        prop_assert_eq!(best, common::brute_min_partition(&g, &g0));
        prop_assert_eq!(best, brute_force_min_partition(&g, &g0).unwrap());
        let both: Vec<bool> = g.edges().iter().map(|e| g0.contains(e.plus, e.minus)).collect();
        let mut rng = stream(seed, Domain::Test, 0, 0);
        use rand::Rng;
        for _ in 0..50 {
            let keep: Vec<bool> = (0..g.num_edges()).map(|_| rng.random::<bool>()).collect();
            let value = subset_objective(&g, &g0, |k| keep[k]).unwrap();
            let false_kept = (0..keep.len()).filter(|&k| keep[k] && !both[k]).count();
            let true_dropped = (0..keep.len()).filter(|&k| !keep[k] && both[k]).count();
            prop_assert!(best <= value);
            prop_assert!(value <= best + false_kept + true_dropped);
        }
    }

    #[test]
    fn fidelity_within_range(n in 4usize..14, k0 in 2usize..4, level in 0.0f64..1.0, seed in any::<u64>()) {
        prop_assume!(k0 <= n);
        let g0 = gen_clusters(n, k0).unwrap().characteristic_graph();
        let g = g0.corrupt(level, &mut stream(seed, Domain::Corruption, 0, 0)).unwrap();
        let gf = graph_fidelity(&g, &g0).unwrap();
        prop_assert!(gf <= 1.0 + 1e-12);
        prop_assert!(gf >= graph_fidelity_min(n, k0) - 1e-12);
    }

    #[test]
    fn algebraic_connectivity_matches_jacobi(g in arb_graph(9, 20)) {
        prop_assume!(g.num_edges() > 0);
        let l = g.laplacian();
        let rows: Vec<Vec<f64>> = (0..l.nrows()).map(|r| l.row(r).iter().copied().collect()).collect();
        let ev = common::jacobi_eigenvalues(&rows);
        let k = common::components(g.num_nodes(), &common::edge_pairs(&g));
        for z in &ev[..k] {
            prop_assert!(z.abs() < 1e-9);
        }
        let lib = g.algebraic_connectivity_sq().unwrap();
        prop_assert!((lib - ev[k]).abs() < 1e-8, "{} vs {}", lib, ev[k]);
    }
}

#[test]
fn complete_graph_spectrum() {
    for n in 2..8 {
        let g = DeviceGraph::complete(n);
        let l = g.laplacian();
        let rows: Vec<Vec<f64>> = (0..n).map(|r| l.row(r).iter().copied().collect()).collect();
        let ev = common::jacobi_eigenvalues(&rows);
        assert!(ev[0].abs() < 1e-10);
        for v in &ev[1..] {
            assert!((v - n as f64).abs() < 1e-9);
        }
        assert!((g.algebraic_connectivity_sq().unwrap() - n as f64).abs() < 1e-9);
    }
}

#[test]
fn triangle_incidence_rank_two() {
    let g = DeviceGraph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
    let d = g.incidence_matrix();
    let rows: Vec<Vec<f64>> = (0..3).map(|r| d.row(r).iter().copied().collect()).collect();
    assert_eq!(common::rank(rows), 2);
}

#[test]
fn corruption_is_reproducible_and_calibrated() {
    let g0 = gen_clusters(20, 4).unwrap().characteristic_graph();
    let a = g0.corrupt(0.2, &mut stream(5, Domain::Corruption, 1, 2)).unwrap();
    let b = g0.corrupt(0.2, &mut stream(5, Domain::Corruption, 1, 2)).unwrap();
    assert_eq!(a, b);
    let pairs = 190.0;
    let trials = 1000;
    let flips: Vec<f64> = (0..trials)
        .map(|t| {
            let g = g0.corrupt(0.2, &mut stream(11, Domain::Corruption, t, 0)).unwrap();
            (g.difference_count(&g0) + g0.difference_count(&g)) as f64
        })
        .collect();
    let m = common::mean(&flips);
    // standard error of the mean flip count over the trials
    let se = (pairs * 0.2 * 0.8 / trials as f64).sqrt();
    assert!((m - 0.2 * pairs).abs() <= 4.0 * se, "mean flips {m}");
}

#[test]
fn induced_subgraph_relabels() {
    let g = DeviceGraph::new(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).unwrap();
    let h = g.induced(&[0, 2, 3]).unwrap();
    assert_eq!(h.num_nodes(), 3);
    assert_eq!(common::edge_pairs(&h), vec![(2, 1)]);
    assert!(g.induced(&[0, 9]).is_err());
}
