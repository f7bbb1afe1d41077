//! Seeded generators for degree-capped graphs and color lists.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Color, Edge, Vertex};
use crate::stream::StreamToken;

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// G(n, p) with `p = Δ / (n - 1)`, dropping any edge that would push an
/// endpoint above degree Δ. Pairs are visited in random order.
pub fn gnp_capped(n: usize, delta: usize, seed: u64) -> Vec<Edge> {
    let mut rng = rng_from(seed);
    if n < 2 || delta == 0 {
        return vec![];
    }
    let p = (delta as f64 / (n - 1) as f64).min(1.0);
    let total = (n as u64) * (n as u64 - 1) / 2;
    let mut picked = Vec::new();
    // geometric skipping over the lexicographic pair index
    let mut idx: i64 = -1;
    loop {
        let skip = if p >= 1.0 {
            0
        } else {
            let r: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            (r.ln() / (1.0 - p).ln()).floor() as i64
        };
        idx += skip + 1;
        if idx as u64 >= total {
            break;
        }
        picked.push(idx as u64);
    }
    picked.shuffle(&mut rng);
    let mut deg = vec![0usize; n];
    let mut edges = Vec::new();
    for i in picked {
        let (u, v) = unrank_pair(i, n as u64);
        if deg[u as usize] < delta && deg[v as usize] < delta {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
            edges.push(Edge::new(u, v).expect("u < v"));
        }
    }
    edges
}

/// Pair index in lexicographic order over `u < v`.
fn unrank_pair(mut i: u64, n: u64) -> (Vertex, Vertex) {
    let mut u = 0u64;
    loop {
        let row = n - 1 - u;
        if i < row {
            return (u as Vertex, (u + 1 + i) as Vertex);
        }
        i -= row;
        u += 1;
    }
}

/// Random pairs with both endpoints below degree Δ, until `nΔ/2` edges or a
/// long run of rejections.
pub fn regular_ish(n: usize, delta: usize, seed: u64) -> Vec<Edge> {
    let mut rng = rng_from(seed);
    if n < 2 || delta == 0 {
        return vec![];
    }
    let target = n * delta.min(n - 1) / 2;
    let mut deg = vec![0usize; n];
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    let mut misses = 0;
    while edges.len() < target && misses < 50 * n {
        let u = rng.gen_range(0..n as Vertex);
        let v = rng.gen_range(0..n as Vertex);
        if u == v || deg[u as usize] >= delta || deg[v as usize] >= delta {
            misses += 1;
            continue;
        }
        let e = Edge::new(u, v).expect("u != v");
        if !seen.insert(e) {
            misses += 1;
            continue;
        }
        misses = 0;
        deg[u as usize] += 1;
        deg[v as usize] += 1;
        edges.push(e);
    }
    edges
}

pub fn clique(n: usize) -> Vec<Edge> {
    let mut edges = Vec::new();
    for u in 0..n as Vertex {
        for v in u + 1..n as Vertex {
            edges.push(Edge::new(u, v).expect("u < v"));
        }
    }
    edges
}

pub fn path(n: usize) -> Vec<Edge> {
    (1..n as Vertex).map(|v| Edge::new(v - 1, v).expect("distinct")).collect()
}

/// One list per vertex with `deg(x) + 1` distinct colors from
/// `[0, universe)`, sorted.
pub fn random_lists(
    n: usize,
    edges: &[Edge],
    universe: u32,
    extra: usize,
    seed: u64,
) -> Result<Vec<Vec<Color>>> {
    let mut deg = vec![0usize; n];
    for e in edges {
        deg[e.u() as usize] += 1;
        deg[e.v() as usize] += 1;
    }
    let mut rng = rng_from(seed);
    deg.iter()
        .map(|&d| {
            let size = d + 1 + extra;
            if size > universe as usize {
                return Err(Error::Usage(format!(
                    "a list of {size} colors does not fit a universe of {universe}"
                )));
            }
            let mut l = BTreeSet::new();
            while l.len() < size {
                l.insert(rng.gen_range(0..universe));
            }
            Ok(l.into_iter().collect())
        })
        .collect()
}

/// Edges and lists interleaved in a seeded random order.
pub fn interleave(edges: &[Edge], lists: &[Vec<Color>], seed: u64) -> Vec<StreamToken> {
    let mut tokens: Vec<StreamToken> = edges.iter().map(|&e| StreamToken::Edge(e)).collect();
    tokens.extend(lists.iter().enumerate().map(|(x, l)| StreamToken::List {
        vertex: x as Vertex,
        colors: l.clone(),
    }));
    tokens.shuffle(&mut rng_from(seed));
    tokens
}

pub fn max_degree(n: usize, edges: &[Edge]) -> usize {
    let mut deg = vec![0usize; n];
    for e in edges {
        deg[e.u() as usize] += 1;
        deg[e.v() as usize] += 1;
    }
    deg.into_iter().max().unwrap_or(0)
}
