use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qlll::conditions::{glc, shc, slc};
use qlll::fixtures::{random_instance, ProjectorKind, Topology};
use qlll::shearer::{
    certified_tail, enumerate_sequences, path_estimate, shearer_slack, tail_bound_slack,
    weighted_sums,
};
use qlll::{Condition, DependencyGraph, FlawSet};

/// Random graph on `m` vertices from an edge bitmask.
fn graph(m: usize, mask: u64) -> DependencyGraph {
    let mut edges = Vec::new();
    let mut bit = 0;
    for i in 0..m {
        for j in i + 1..m {
            if mask >> bit & 1 == 1 {
                edges.push((i, j));
            }
            bit += 1;
        }
    }
    DependencyGraph::from_edges(m, &edges).unwrap()
}

fn graph_and_p(max_m: usize, max_p: f64) -> impl Strategy<Value = (DependencyGraph, Vec<f64>)> {
    (1..=max_m, any::<u64>()).prop_flat_map(move |(m, mask)| {
        (
            Just(graph(m, mask)),
            proptest::collection::vec(0.001f64..max_p, m),
        )
    })
}

/// `Σ_{J ⊇ I independent} (−1)^{|J∖I|} Π_{j∈J} p_j` by subset enumeration.
fn brute_force_q(g: &DependencyGraph, p: &[f64], i: FlawSet) -> f64 {
    (0..1u64 << p.len())
        .map(FlawSet)
        .filter(|&j| i.is_subset(j) && g.is_independent(j))
        .map(|j| {
            let sign = if (j.len() - i.len()).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            sign * j.iter().map(|f| p[f]).product::<f64>()
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn implication_chain((g, p) in graph_and_p(7, 0.4)) {
        let s = slc(&g, &p).unwrap().satisfied;
        let l = glc(&g, &p, None).unwrap().satisfied;
        let h = shc(&g, &p).unwrap().satisfied;
        prop_assert!(!s || l, "SLC without GLC");
        prop_assert!(!l || h, "GLC without SHC");
    }

    #[test]
    fn independence_polynomial_matches_brute_force((g, p) in graph_and_p(10, 0.5), pick: u64) {
        let q = g.indep_polynomial(&p, FlawSet::EMPTY).unwrap();
        prop_assert!((q - brute_force_q(&g, &p, FlawSet::EMPTY)).abs() <= 1e-12);
        // A random independent set, built greedily from the bits of `pick`.
        let mut i = FlawSet::EMPTY;
        for f in 0..g.num_vertices() {
            if pick >> f & 1 == 1 && g.is_independent(i.with(f)) {
                i.insert(f);
            }
        }
        let q = g.indep_polynomial(&p, i).unwrap();
        prop_assert!((q - brute_force_q(&g, &p, i)).abs() <= 1e-12);
    }

    #[test]
    fn q_empty_factors_over_components(
        (g1, p1) in graph_and_p(4, 0.5),
        (g2, p2) in graph_and_p(4, 0.5),
    ) {
        let m1 = g1.num_vertices();
        let mut edges = g1.edges();
        edges.extend(g2.edges().into_iter().map(|(a, b)| (a + m1, b + m1)));
        let union = DependencyGraph::from_edges(m1 + g2.num_vertices(), &edges).unwrap();
        let p: Vec<f64> = p1.iter().chain(&p2).copied().collect();
        let whole = union.q_empty(&p, union.all());
        let product = g1.q_empty(&p1, g1.all()) * g2.q_empty(&p2, g2.all());
        prop_assert!((whole - product).abs() <= 1e-12);
    }

    #[test]
    fn partial_sums_below_path_estimate((g, p) in graph_and_p(4, 0.3)) {
        prop_assume!(shc(&g, &p).unwrap().satisfied);
        let estimate = path_estimate(&g, &p, Condition::Shc, None).unwrap();
        let sums = weighted_sums(&g, &p, 8).unwrap();
        let mut partial = 0.0;
        for s in sums {
            partial += s;
            prop_assert!(partial <= estimate * (1.0 + 1e-12));
        }
    }

    #[test]
    fn slack_tail_is_certified((g, p) in graph_and_p(4, 0.3), r in 0.0f64..4.0) {
        prop_assume!(shc(&g, &p).unwrap().satisfied);
        let epsilon = shearer_slack(&g, &p).unwrap();
        let tail = tail_bound_slack(&g, &p, epsilon, Condition::Shc, None, r).unwrap();
        let from = (tail.t + r).ceil() as usize;
        let certified = certified_tail(&g, &p, from, 8).unwrap();
        prop_assert!(certified.upper() <= tail.bound + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn enumerated_sequences_are_stable((g, p) in graph_and_p(4, 0.5), k in 0usize..5) {
        let seqs = enumerate_sequences(&g, k).unwrap();
        for s in &seqs {
            prop_assert!(s.is_valid(&g));
            prop_assert_eq!(s.size(), k);
        }
        let total: f64 = seqs.iter().map(|s| s.weight(&p)).sum();
        prop_assert!((total - weighted_sums(&g, &p, k).unwrap()[k]).abs() <= 1e-12);
    }

    #[test]
    fn shearer_instances_have_large_q_empty(seed: u64, n in 2usize..6, m in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance::<f64, _>(n, 1.min(n), 1, Topology::Random { m }, ProjectorKind::Diagonal, &mut rng)
            .unwrap();
        let g = inst.dependency_graph();
        let p = inst.probabilities();
        if shc(&g, &p).unwrap().satisfied {
            prop_assert!(g.q_empty(&p, g.all()) >= 2f64.powi(-(n as i32)) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn uniform_gap_is_the_minimum(seed: u64, n in 2usize..5, m in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance::<f64, _>(n, 2, 1, Topology::Random { m }, ProjectorKind::Haar, &mut rng).unwrap();
        let gamma = inst.uniform_gap().unwrap();
        for mask in 0..1u64 << m {
            prop_assert!(gamma <= inst.subset_gap(FlawSet(mask)).unwrap());
        }
    }

    #[test]
    fn commuting_instances_have_gap_at_least_one(seed: u64, n in 2usize..5, m in 1usize..5, rank in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance::<f64, _>(n, 2, rank, Topology::Random { m }, ProjectorKind::Diagonal, &mut rng)
            .unwrap();
        prop_assert!(inst.uniform_gap().unwrap() >= 1.0 - 1e-9);
    }
}

#[test]
fn single_flaw_weights_decrease() {
    let g = DependencyGraph::from_edges(1, &[]).unwrap();
    let sums = weighted_sums(&g, &[0.3], 10).unwrap();
    for k in 1..10 {
        assert!(sums[k + 1] <= sums[k]);
        assert!((sums[k] - 0.3f64.powi(k as i32)).abs() < 1e-15);
    }
}
