//! Reference implementations shared by the property and acceptance tests.
#![allow(dead_code)]

use cosmic::graph::Adjacency;
use cosmic::{FeatureMatrix, FeatureVector, Space};
use rand::Rng;

/// Every maximal clique by subset enumeration, each sorted, in
/// lexicographic order.
pub fn brute_force_cliques(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    assert!(n <= 20);
    let mut adj = vec![0u32; n];
    for &(i, j) in edges {
        adj[i] |= 1 << j;
        adj[j] |= 1 << i;
    }
    let is_clique = |s: u32| (0..n).filter(|&v| s >> v & 1 == 1).all(|v| s & !(1 << v) & !adj[v] == 0);
    let mut out = Vec::new();
    for s in 1u32..(1 << n) {
        if !is_clique(s) {
            continue;
        }
        let extendable = (0..n).any(|v| s >> v & 1 == 0 && is_clique(s | 1 << v));
        if !extendable {
            out.push((0..n).filter(|&v| s >> v & 1 == 1).collect::<Vec<_>>());
        }
    }
    out.sort();
    out
}

pub fn random_edges(rng: &mut impl Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    edges
}

pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Adjacency {
    Adjacency::from_edges(n, &random_edges(rng, n, p))
}

/// `(entropy, arrival)` pairs left after feeding `stream` through a cache
/// of `capacity`, replayed by hand. Returns the contents after every step.
pub fn simulate_cache(stream: &[f64], capacity: usize) -> Vec<Vec<(f64, u64)>> {
    let mut slots: Vec<(f64, u64)> = Vec::new();
    let mut history = Vec::new();
    for (t, &h) in stream.iter().enumerate() {
        if slots.len() < capacity {
            slots.push((h, t as u64));
        } else {
            // highest entropy; among equals, the earliest arrival
            let mut worst = 0;
            for i in 1..slots.len() {
                let (hi, ai) = slots[i];
                let (hw, aw) = slots[worst];
                if hi > hw || (hi == hw && ai < aw) {
                    worst = i;
                }
            }
            if h < slots[worst].0 {
                slots[worst] = (h, t as u64);
            }
        }
        let mut snapshot = slots.clone();
        snapshot.sort_by_key(|s| s.1);
        history.push(snapshot);
    }
    history
}

pub fn random_unit(rng: &mut impl Rng, dim: usize, space: Space) -> FeatureVector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(u) = FeatureVector::unit(v, space) {
            return u;
        }
    }
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, dim: usize, space: Space) -> FeatureMatrix {
    let mut m = FeatureMatrix::empty(dim, space);
    for _ in 0..rows {
        m.push(&random_unit(rng, dim, space)).unwrap();
    }
    m
}

/// Lowest index among the maxima.
pub fn first_argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
