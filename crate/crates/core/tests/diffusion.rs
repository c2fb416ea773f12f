mod common;

use std::collections::HashSet;

use partition_oracle::diffusion::{
    bfs_ball, cluster, conductance, inverse_ball, trunc_diffusion, trunc_diffusion_trace, DiffVector, ProfileCache,
};
use partition_oracle::{Graph, Label, Params};
use proptest::prelude::*;

/// Dense lazy-walk matrix over vertex positions.
fn walk_matrix(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.n();
    let d = g.d() as f64;
    let mut m = vec![vec![0.0; n]; n];
    for (i, &u) in g.labels().iter().enumerate() {
        let nbrs = g.adjacent(u).unwrap();
        m[i][i] = 1.0 - nbrs.len() as f64 / (2.0 * d);
        for w in nbrs {
            m[g.position(*w).unwrap()][i] = 1.0 / (2.0 * d);
        }
    }
    m
}

/// Dense step-then-truncate, returning every intermediate vector.
fn dense_trace(g: &Graph, v: Label, t: u64, rho: f64) -> Vec<Vec<f64>> {
    let m = walk_matrix(g);
    let n = g.n();
    let mut x = vec![0.0; n];
    x[g.position(v).unwrap()] = 1.0;
    let mut out = vec![x.clone()];
    for _ in 0..t {
        let mut y: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[i][j] * x[j]).sum()).collect();
        for e in &mut y {
            if *e <= rho {
                *e = 0.0;
            }
        }
        x = y;
        out.push(x.clone());
    }
    out
}

fn near_threshold(trace: &[Vec<f64>], rho: f64) -> bool {
    trace.iter().flatten().any(|&e| (e - rho).abs() < 1e-9)
}

fn brute_conductance(g: &Graph, set: &[Label]) -> f64 {
    let s: HashSet<Label> = set.iter().copied().collect();
    let cut = g.edges().iter().filter(|(a, b)| s.contains(a) != s.contains(b)).count();
    cut as f64 / (g.d() * s.len()) as f64
}

/// Reference for `cluster`: scan `k' = k..=2k`, take the top `min(k', len)`
/// entries when no mass tie straddles the cut, accept the first set whose
/// union with the center has conductance below `phi`.
fn reference_cluster(g: &Graph, v: Label, x: &[f64], k: u64, phi: f64) -> (Vec<Label>, bool) {
    let mut ranked: Vec<(Label, f64)> = g
        .labels()
        .iter()
        .zip(x)
        .filter(|e| *e.1 > 0.0)
        .map(|(&l, &m)| (l, m))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for kp in k..=2 * k {
        let j = (kp as usize).min(ranked.len());
        let split = j == 0 || j == ranked.len() || (ranked[j - 1].1 - ranked[j].1).abs() > 1e-12;
        if !split {
            continue;
        }
        let mut set: Vec<Label> = ranked[..j].iter().map(|e| e.0).collect();
        if !set.contains(&v) {
            set.push(v);
        }
        set.sort_unstable();
        if brute_conductance(g, &set) < phi {
            return (set, false);
        }
    }
    (vec![v], true)
}

#[test]
fn lazy_walk_on_a_path_by_hand() {
    let g = common::random_graph(1, 2, 0, 0);
    let x = trunc_diffusion(&g, g.labels()[0], 3, 0.1).unwrap();
    assert_eq!(x.entries(), &[(g.labels()[0], 1.0)]);
    // path a - b with d = 2: one step from a gives a: 3/4, b: 1/4
    let mut b = partition_oracle::GraphBuilder::new(2, 10);
    b.add_vertex(1).unwrap();
    b.add_vertex(2).unwrap();
    b.add_edge(1, 2).unwrap();
    let g = b.build().unwrap();
    let x = trunc_diffusion(&g, 1, 1, 0.01).unwrap();
    assert_eq!(x.entries(), &[(1, 0.75), (2, 0.25)]);
    let x = trunc_diffusion(&g, 1, 1, 0.3).unwrap();
    assert_eq!(x.entries(), &[(1, 0.75)]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_dense_reference((g, params, pick) in common::graph_and_params(24)) {
        let v = g.labels()[pick as usize % g.n()];
        let dense = dense_trace(&g, v, params.ell, params.rho);
        prop_assume!(!near_threshold(&dense, params.rho));
        let sparse = trunc_diffusion_trace(&g, v, params.ell, params.rho).unwrap();
        for (x, y) in sparse.iter().zip(&dense) {
            for (i, &l) in g.labels().iter().enumerate() {
                prop_assert!((x.get(l) - y[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn truncation_invariants((g, params, pick) in common::graph_and_params(30)) {
        let v = g.labels()[pick as usize % g.n()];
        let trace = trunc_diffusion_trace(&g, v, params.ell, params.rho).unwrap();
        let ball = bfs_ball(&g, v, params.ell).unwrap();
        let mut last = 1.0 + 1e-12;
        for (t, x) in trace.iter().enumerate() {
            let mass = x.total_mass();
            prop_assert!(mass <= last + 1e-12);
            last = mass;
            prop_assert!(x.entries().iter().all(|e| e.1 > params.rho || t == 0));
            prop_assert!((x.len() as f64) < 1.0 / params.rho + 1.0);
            for l in x.support() {
                let dist = ball.iter().find(|e| e.0 == l).map(|e| e.1);
                prop_assert!(dist.is_some_and(|dd| dd <= t as u64));
            }
        }
    }

    #[test]
    fn untruncated_walk_preserves_mass((g, params, pick) in common::graph_and_params(20)) {
        let v = g.labels()[pick as usize % g.n()];
        let x = trunc_diffusion(&g, v, params.ell, 1e-300).unwrap();
        prop_assert!((x.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn conductance_matches_edge_count((g, _params, pick) in common::graph_and_params(20), mask in any::<u32>()) {
        let mut set: Vec<Label> = g.labels().iter().enumerate().filter(|(i, _)| mask >> (i % 32) & 1 == 1).map(|e| *e.1).collect();
        if set.is_empty() {
            set.push(g.labels()[pick as usize % g.n()]);
        }
        let c = conductance(&g, &set).unwrap();
        prop_assert!((c - brute_conductance(&g, &set)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn cluster_matches_reference((g, params, pick) in common::graph_and_params(20), k in 1u64..12) {
        let v = g.labels()[pick as usize % g.n()];
        let dense = dense_trace(&g, v, params.ell, params.rho);
        prop_assume!(!near_threshold(&dense, params.rho));
        let cache = ProfileCache::new(&g, &params);
        for t in 1..=params.ell {
            let got = cluster(&g, v, t, k, &params).unwrap();
            let (members, singleton) = reference_cluster(&g, v, &dense[t as usize], k, params.phi);
            prop_assert_eq!(&got.members, &members);
            prop_assert_eq!(got.is_singleton, singleton);
            prop_assert!(got.members.contains(&v));
            prop_assert_eq!(&cache.profile(v).unwrap().at(t).cluster(k, params.phi), &got);
            if let Some(phi) = got.conductance {
                prop_assert!(phi < params.phi);
            }
        }
    }

    #[test]
    fn inverse_ball_matches_brute_force((g, params, pick) in common::graph_and_params(20)) {
        let v = g.labels()[pick as usize % g.n()];
        let mut expect: Vec<Label> = g
            .labels()
            .iter()
            .copied()
            .filter(|&w| trunc_diffusion_trace(&g, w, params.ell, params.rho).unwrap().iter().any(|x| x.contains(v)))
            .collect();
        expect.sort_unstable();
        prop_assert_eq!(inverse_ball(&g, v, &params).unwrap(), expect.clone());
        prop_assert!((expect.len() as f64) <= params.max_component() + 1.0);
    }
}

#[test]
fn symmetric_vertices_tie_exactly() {
    let g = partition_oracle::generators::generate(&partition_oracle::generators::GraphSpec::new(
        partition_oracle::generators::Generator::Cycle,
        40,
        2,
    ))
    .unwrap();
    let params = Params::practical(2);
    let v = g.labels()[0];
    let x = trunc_diffusion(&g, v, 7, 1e-6).unwrap();
    let left = g.labels()[1];
    let right = g.labels()[39];
    assert_eq!(x.get(left), x.get(right));
    assert!(conductance(&g, &[]).is_err());
    let empty = DiffVector::default();
    assert_eq!(empty.total_mass(), 0.0);
    assert!(cluster(&g, v, 1, 0, &params).is_err());
}
