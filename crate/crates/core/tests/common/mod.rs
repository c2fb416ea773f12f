#![allow(dead_code)]

use partition_oracle::randomness::params::{hbar_for, k_max_for};
use partition_oracle::{Graph, GraphBuilder, Label, Params};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random simple graph with degree bound `d`: edges are proposed at random
/// and dropped when they would exceed the bound.
pub fn random_graph(n: usize, d: usize, edges: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let universe = 4 * n as u64 + 10;
    let mut labels: Vec<Label> = (1..=universe).collect();
    labels.shuffle(&mut rng);
    labels.truncate(n);
    let mut b = GraphBuilder::new(d, universe);
    for &l in &labels {
        b.add_vertex(l).unwrap();
    }
    let mut deg = vec![0usize; n];
    let mut seen = std::collections::HashSet::new();
    for _ in 0..edges {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i == j || deg[i] >= d || deg[j] >= d || !seen.insert((i.min(j), i.max(j))) {
            continue;
        }
        deg[i] += 1;
        deg[j] += 1;
        b.add_edge(labels[i], labels[j]).unwrap();
    }
    b.build().unwrap()
}

pub fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n, 2usize..=4, any::<u64>()).prop_map(|(n, d, seed)| random_graph(n, d, 2 * n, seed))
}

/// Practical params with small, varied knobs.
pub fn arb_params(d: usize) -> impl Strategy<Value = Params> {
    (0.05f64..0.3, 2u64..8, prop_oneof![Just(0.1), Just(0.25), Just(0.5)], 0.05f64..0.7, 1u64..6, 0.2f64..0.8)
        .prop_map(move |(rho, ell, delta, phi, budget, epsilon)| {
            let mut p = Params::practical(d as u64);
            p.rho = rho;
            p.ell = ell;
            p.delta = delta;
            p.hbar = hbar_for(delta);
            p.phi = phi;
            p.sample_budget = budget;
            p.k_max = k_max_for(rho);
            p.epsilon = epsilon;
            p.b = 4;
            p
        })
}

pub fn graph_and_params(max_n: usize) -> impl Strategy<Value = (Graph, Params, u64)> {
    arb_graph(max_n).prop_flat_map(|g| {
        let d = g.d();
        (Just(g), arb_params(d), any::<u64>())
    })
}
