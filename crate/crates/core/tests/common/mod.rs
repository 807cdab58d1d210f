#![allow(dead_code)]

use std::collections::BTreeSet;

use curvkit::generate::simple_random_walk;
use curvkit::MarkovChain;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Connected graph on `n` vertices: a random spanning tree plus each other
/// edge with probability `p`.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Vec<BTreeSet<usize>> {
    let mut adj = vec![BTreeSet::new(); n];
    for v in 1..n {
        let u = rng.random_range(0..v);
        adj[u].insert(v);
        adj[v].insert(u);
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                adj[u].insert(v);
                adj[v].insert(u);
            }
        }
    }
    adj
}

pub fn random_srw(rng: &mut impl Rng, n: usize, p: f64) -> MarkovChain {
    let adj = random_graph(rng, n, p);
    simple_random_walk((0..n).map(|i| format!("v{i}")).collect(), &adj).unwrap()
}

/// Reversible chain from random symmetric weights on a random connected
/// graph, with lazy self-loops on some vertices.
pub fn random_weighted_chain(rng: &mut impl Rng, n: usize) -> MarkovChain {
    let adj = random_graph(rng, n, 0.35);
    let mut w = DMatrix::<f64>::zeros(n, n);
    for u in 0..n {
        for &v in &adj[u] {
            if u < v {
                let x = rng.random_range(0.1..10.0);
                w[(u, v)] = x;
                w[(v, u)] = x;
            }
        }
        if rng.random_bool(0.3) {
            w[(u, u)] = rng.random_range(0.1..5.0);
        }
    }
    MarkovChain::from_weights((0..n).map(|i| format!("s{i}")).collect(), &w).unwrap()
}

/// Strictly positive density, optionally with a few zeros.
pub fn random_rho(rng: &mut impl Rng, n: usize, allow_zeros: bool) -> DVector<f64> {
    DVector::from_fn(n, |_, _| if allow_zeros && rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.05..3.0) })
}

pub fn random_f(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0))
}
