mod common;

use common::rng;
use proptest::prelude::*;
use qcol::graph::{gen_erdos_renyi, gen_regular, read_edge_list, write_edge_list};
use qcol::search::{anneal, metropolis, walkcol, ColoringState, Start, WalkColParams};
use qcol::{energy, Adjacency, Assignment, Color, Graph};
use rand::seq::SliceRandom;
use rand::Rng;

fn arb_graph() -> impl Strategy<Value = Graph> {
    (2usize..40, 0.0f64..6.0, any::<u64>()).prop_map(|(n, c, seed)| {
        let c = c.min(n as f64 - 1.5).max(0.0);
        gen_erdos_renyi(n, c, seed).unwrap()
    })
}

proptest! {
    #[test]
    fn energy_is_invariant_under_color_permutation(g in arb_graph(), q in 2usize..6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = Assignment::random(g.n(), q, &mut r);
        let mut perm: Vec<Color> = (0..q as Color).collect();
        perm.shuffle(&mut r);
        prop_assert_eq!(energy(&g, &a), energy(&g, &a.permuted(&perm)));
    }

    #[test]
    fn edge_list_round_trips(g in arb_graph()) {
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        let back = read_edge_list(buf.as_slice()).unwrap();
        prop_assert_eq!(back.n(), g.n());
        prop_assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn directed_edges_pair_up(g in arb_graph()) {
        for s in 0..g.directed_count() {
            let r = g.reverse(s);
            prop_assert_eq!(g.reverse(r), s);
            prop_assert_eq!(g.source(r), g.target(s));
            prop_assert_eq!(g.target(r), g.source(s));
        }
    }

    #[test]
    fn regular_graphs_are_regular(half_n in 3usize..40, c in 1usize..6, seed in any::<u64>()) {
        let n = 2 * half_n;
        prop_assume!(c < n);
        let g = gen_regular(n, c, seed).unwrap();
        prop_assert!((0..n).all(|v| g.degree(v) == c));
    }
}

#[test]
fn bookkeeping_survives_a_million_random_flips() {
    let g = gen_erdos_renyi(2000, 5.0, 17).unwrap();
    let mut r = rng(99);
    let q = 3;
    let mut st = ColoringState::new(&g, Assignment::random(g.n(), q, &mut r), None);
    for step in 0..1_000_000u32 {
        let v = r.random_range(0..g.n());
        let to = r.random_range(0..q) as Color;
        let de = st.energy_delta(&g, v, to);
        let du = st.unsat_delta(&g, v, to);
        let (e0, u0) = (st.energy() as i64, st.unsat() as i64);
        st.recolor(&g, v, to);
        assert_eq!(st.energy() as i64, e0 + de);
        assert_eq!(st.unsat() as i64, u0 + du);
        if step % 50_000 == 0 {
            let a = st.assignment();
            assert_eq!(st.energy(), energy(&g, &a));
            let unsat = (0..g.n())
                .filter(|&v| g.neighbors(v).iter().any(|&u| a.color(u as usize) == a.color(v)))
                .count();
            assert_eq!(st.unsat(), unsat);
        }
    }
    assert_eq!(st.energy(), energy(&g, &st.assignment()));
}

#[test]
fn metropolis_delta_matches_recount() {
    let g = gen_erdos_renyi(300, 7.0, 2).unwrap();
    let mut r = rng(4);
    let st = ColoringState::new(&g, Assignment::random(g.n(), 4, &mut r), None);
    for _ in 0..2000 {
        let v = r.random_range(0..g.n());
        let to = r.random_range(0..4) as Color;
        let mut a = st.assignment();
        let before = energy(&g, &a) as i64;
        a.set(v, to);
        assert_eq!(st.energy_delta(&g, v, to), energy(&g, &a) as i64 - before);
    }
}

#[test]
fn metropolis_infinite_temperature_energy() {
    // Independent uniform colors break each edge with probability 1/q.
    let g = gen_erdos_renyi(10_000, 9.0, 6).unwrap();
    let tr = metropolis(&g, 4, Start::Random, 1e12, 20, 3).unwrap();
    let e = tr.samples.last().unwrap().energy_per_vertex;
    assert!((e / 1.125 - 1.0).abs() < 0.02, "{e}");
    assert!((energy(&g, &tr.assignment) as f64 / 10_000.0 - e).abs() < 1e-12);
}

#[test]
fn empty_graph_stays_at_zero_energy() {
    let g = Graph::empty(50);
    let tr = metropolis(&g, 3, Start::Random, 1.0, 10, 0).unwrap();
    assert!(tr.solved);
    assert!(tr.samples.iter().all(|s| s.energy_per_vertex == 0.0));
}

#[test]
fn local_search_is_reproducible() {
    let g = gen_erdos_renyi(500, 4.0, 1).unwrap();
    let params = WalkColParams {
        p: 0.05,
        max_flips: 100_000,
        seed: 12,
    };
    let a = walkcol(&g, 3, Start::Random, &params).unwrap();
    let b = walkcol(&g, 3, Start::Random, &params).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.assignment, b.assignment);
    let sched = [(2.0, 20), (0.5, 20), (0.0, 5)];
    assert_eq!(anneal(&g, 3, &sched, 5).unwrap().assignment, anneal(&g, 3, &sched, 5).unwrap().assignment);
}

#[test]
fn erdos_renyi_degrees_follow_poisson() {
    let g = gen_erdos_renyi(1000, 4.0, 2024).unwrap();
    let lambda = 4.0f64;
    // Bins 0..=9 and a tail bin for degree >= 10.
    let mut observed = [0usize; 11];
    for v in 0..g.n() {
        observed[g.degree(v).min(10)] += 1;
    }
    let mut pmf = [0.0f64; 11];
    let mut term = (-lambda).exp();
    for (k, p) in pmf.iter_mut().enumerate().take(10) {
        if k > 0 {
            term *= lambda / k as f64;
        }
        *p = term;
    }
    pmf[10] = 1.0 - pmf[..10].iter().sum::<f64>();
    let chi2: f64 = observed
        .iter()
        .zip(pmf)
        .map(|(&o, p)| {
            let e = p * 1000.0;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    // 99.9% quantile of chi-square with 10 degrees of freedom.
    assert!(chi2 < 29.59, "chi2 = {chi2}");
}
