//! Offline graph primitives: adjacency graphs, partial colorings, greedy and
//! degeneracy colorings, the constructive Turán independent set, and a small
//! prime search.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{input, theory, Error, Result};

pub type Vertex = u32;
pub type Color = u32;

/// An undirected edge stored with `u < v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    u: Vertex,
    v: Vertex,
}

impl Edge {
    pub fn new(a: Vertex, b: Vertex) -> Result<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Edge { u: a, v: b }),
            std::cmp::Ordering::Greater => Ok(Edge { u: b, v: a }),
            std::cmp::Ordering::Equal => input(format!("self-loop at vertex {a}")),
        }
    }

    #[inline]
    pub fn u(&self) -> Vertex {
        self.u
    }

    #[inline]
    pub fn v(&self) -> Vertex {
        self.v
    }

    /// The endpoint that is not `x`. `x` must be an endpoint.
    #[inline]
    pub fn other(&self, x: Vertex) -> Vertex {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }

    pub fn check_range(&self, n: usize) -> Result<()> {
        if (self.v as usize) >= n {
            return input(format!("edge {self} has an endpoint outside [0, {n})"));
        }
        Ok(())
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{}}}", self.u, self.v)
    }
}

/// Simple undirected graph on `[0, n)` with symmetric adjacency lists.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdjacencyGraph {
    adj: Vec<Vec<Vertex>>,
    m: usize,
}

impl AdjacencyGraph {
    pub fn new(n: usize) -> Self {
        AdjacencyGraph {
            adj: vec![Vec::new(); n],
            m: 0,
        }
    }

    /// Builds a graph, rejecting duplicate edges and out-of-range endpoints.
    pub fn from_edges<'a>(n: usize, edges: impl IntoIterator<Item = &'a Edge>) -> Result<Self> {
        let mut g = AdjacencyGraph::new(n);
        for e in edges {
            g.add_edge(*e)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, e: Edge) -> Result<()> {
        e.check_range(self.n())?;
        if self.has_edge(e.u, e.v) {
            return input(format!("duplicate edge {e}"));
        }
        self.adj[e.u as usize].push(e.v);
        self.adj[e.v as usize].push(e.u);
        self.m += 1;
        Ok(())
    }

    pub fn has_edge(&self, a: Vertex, b: Vertex) -> bool {
        let (a, b) = (a as usize, b as usize);
        if a >= self.n() || b >= self.n() {
            return false;
        }
        let (small, other) = if self.adj[a].len() <= self.adj[b].len() {
            (a, b)
        } else {
            (b, a)
        };
        self.adj[small].iter().any(|&y| y as usize == other)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.adj.len()
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn neighbors(&self, x: Vertex) -> &[Vertex] {
        &self.adj[x as usize]
    }

    #[inline]
    pub fn degree(&self, x: Vertex) -> usize {
        self.adj[x as usize].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, ns)| {
            ns.iter()
                .filter(move |&&v| (v as usize) > u)
                .map(move |&v| Edge { u: u as Vertex, v })
        })
    }

    /// Subgraph induced by `vertices`, relabelled to `[0, vertices.len())` in
    /// the given order. Returns the subgraph and the local-to-global map.
    pub fn induced(&self, vertices: &[Vertex]) -> (AdjacencyGraph, Vec<Vertex>) {
        let mut local = vec![u32::MAX; self.n()];
        for (i, &x) in vertices.iter().enumerate() {
            local[x as usize] = i as u32;
        }
        let mut sub = AdjacencyGraph::new(vertices.len());
        for (i, &x) in vertices.iter().enumerate() {
            for &y in self.neighbors(x) {
                let j = local[y as usize];
                if j != u32::MAX && (j as usize) > i {
                    sub.adj[i].push(j);
                    sub.adj[j as usize].push(i as u32);
                    sub.m += 1;
                }
            }
        }
        (sub, vertices.to_vec())
    }
}

/// `(U, chi)`: `chi(x) = None` exactly for the uncolored vertices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialColoring {
    colors: Vec<Option<Color>>,
}

impl PartialColoring {
    pub fn uncolored(n: usize) -> Self {
        PartialColoring {
            colors: vec![None; n],
        }
    }

    pub fn from_colors(colors: impl IntoIterator<Item = Color>) -> Self {
        PartialColoring {
            colors: colors.into_iter().map(Some).collect(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.colors.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    #[inline]
    pub fn get(&self, x: Vertex) -> Option<Color> {
        self.colors[x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: Vertex, c: Color) {
        self.colors[x as usize] = Some(c);
    }

    #[inline]
    pub fn is_colored(&self, x: Vertex) -> bool {
        self.colors[x as usize].is_some()
    }

    pub fn uncolored_vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.colors
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_none())
            .map(|(x, _)| x as Vertex)
    }

    pub fn uncolored_count(&self) -> usize {
        self.colors.iter().filter(|c| c.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.colors.iter().all(Option::is_some)
    }

    pub fn distinct_colors(&self) -> usize {
        self.colors.iter().flatten().collect::<BTreeSet<_>>().len()
    }

    pub fn max_color(&self) -> Option<Color> {
        self.colors.iter().flatten().copied().max()
    }

    pub fn as_slice(&self) -> &[Option<Color>] {
        &self.colors
    }

    /// The full color vector, if every vertex is colored.
    pub fn to_complete(&self) -> Option<Vec<Color>> {
        self.colors.iter().copied().collect()
    }
}

/// Edges whose endpoints are both colored with the same color.
pub fn check_proper<'a>(
    edges: impl IntoIterator<Item = &'a Edge>,
    coloring: &PartialColoring,
) -> Result<Vec<Edge>> {
    let mut bad = Vec::new();
    for e in edges {
        e.check_range(coloring.len())?;
        if let (Some(a), Some(b)) = (coloring.get(e.u), coloring.get(e.v)) {
            if a == b {
                bad.push(*e);
            }
        }
    }
    Ok(bad)
}

/// Greedy coloring from scratch; see [`greedy_extend`].
pub fn greedy_color(
    graph: &AdjacencyGraph,
    order: &[Vertex],
    lists: Option<&[Vec<Color>]>,
) -> Result<PartialColoring> {
    let mut coloring = PartialColoring::uncolored(graph.n());
    greedy_extend(graph, &mut coloring, order, lists)?;
    Ok(coloring)
}

/// Colors every still-uncolored vertex of `order`, in order, with the
/// smallest color of its list (default `0, 1, 2, ...`) not used by an
/// already-colored neighbor.
pub fn greedy_extend(
    graph: &AdjacencyGraph,
    coloring: &mut PartialColoring,
    order: &[Vertex],
    lists: Option<&[Vec<Color>]>,
) -> Result<()> {
    if coloring.len() != graph.n() {
        return input("coloring and graph sizes differ");
    }
    let mut taken: Vec<bool> = Vec::new();
    let mut used: Vec<Color> = Vec::new();
    for &x in order {
        if (x as usize) >= graph.n() {
            return input(format!("vertex {x} out of range"));
        }
        if coloring.is_colored(x) {
            continue;
        }
        let c = match lists {
            None => {
                let d = graph.degree(x);
                taken.clear();
                taken.resize(d + 1, false);
                for &y in graph.neighbors(x) {
                    if let Some(c) = coloring.get(y) {
                        if (c as usize) <= d {
                            taken[c as usize] = true;
                        }
                    }
                }
                // at most d entries are taken, so one of the d + 1 is free
                taken.iter().position(|t| !t).unwrap() as Color
            }
            Some(lists) => {
                used.clear();
                used.extend(graph.neighbors(x).iter().filter_map(|&y| coloring.get(y)));
                used.sort_unstable();
                let mut list = lists[x as usize].clone();
                list.sort_unstable();
                match list.into_iter().find(|c| used.binary_search(c).is_err()) {
                    Some(c) => c,
                    None => {
                        return theory(format!(
                            "list of vertex {x} exhausted (|L| = {}, deg = {})",
                            lists[x as usize].len(),
                            graph.degree(x)
                        ))
                    }
                }
            }
        };
        coloring.set(x, c);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Degeneracy {
    pub kappa: usize,
    /// Peeling order: each vertex has at most `kappa` neighbors later in it.
    pub ordering: Vec<Vertex>,
}

/// Min-degree peeling, smallest id first among ties.
pub fn degeneracy_peel(graph: &AdjacencyGraph) -> Degeneracy {
    let n = graph.n();
    let mut deg: Vec<usize> = (0..n as Vertex).map(|x| graph.degree(x)).collect();
    let maxd = deg.iter().copied().max().unwrap_or(0);
    let mut buckets: Vec<BTreeSet<Vertex>> = vec![BTreeSet::new(); maxd + 1];
    for (x, &d) in deg.iter().enumerate() {
        buckets[d].insert(x as Vertex);
    }
    let mut removed = vec![false; n];
    let mut ordering = Vec::with_capacity(n);
    let mut kappa = 0;
    let mut low = 0;
    for _ in 0..n {
        while buckets[low].is_empty() {
            low += 1;
        }
        let x = buckets[low].pop_first().unwrap();
        kappa = kappa.max(low);
        removed[x as usize] = true;
        ordering.push(x);
        for &y in graph.neighbors(x) {
            let y = y as usize;
            if !removed[y] {
                buckets[deg[y]].remove(&(y as Vertex));
                deg[y] -= 1;
                buckets[deg[y]].insert(y as Vertex);
                low = low.min(deg[y]);
            }
        }
    }
    Degeneracy { kappa, ordering }
}

/// Greedy coloring in reverse peeling order; uses at most `kappa + 1` colors.
pub fn degeneracy_plus_one_color(graph: &AdjacencyGraph) -> PartialColoring {
    let mut order = degeneracy_peel(graph).ordering;
    order.reverse();
    greedy_color(graph, &order, None).expect("default palette never runs out")
}

/// Greedy coloring by increasing id of the graph spanned by `edges`
/// (duplicates allowed); isolated vertices get color 0.
pub fn greedy_by_id(n: usize, edges: &[Edge]) -> Vec<Color> {
    let mut start = vec![0usize; n + 1];
    for e in edges {
        start[e.u as usize + 1] += 1;
        start[e.v as usize + 1] += 1;
    }
    for i in 0..n {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut adj = vec![0 as Vertex; start[n]];
    for e in edges {
        adj[fill[e.u as usize]] = e.v;
        fill[e.u as usize] += 1;
        adj[fill[e.v as usize]] = e.u;
        fill[e.v as usize] += 1;
    }
    let mut colors = vec![0 as Color; n];
    let mut seen: Vec<usize> = Vec::new();
    for x in 0..n {
        let nbrs = &adj[start[x]..start[x + 1]];
        if seen.len() < nbrs.len() + 1 {
            seen.resize(nbrs.len() + 1, usize::MAX);
        }
        for &y in nbrs {
            if (y as usize) < x && (colors[y as usize] as usize) < seen.len() {
                seen[colors[y as usize] as usize] = x;
            }
        }
        colors[x] = (0..).find(|&c| seen[c] != x).unwrap() as Color;
    }
    colors
}

/// Constructive Turán: repeatedly takes the vertex `x` minimizing
/// `sum_{y in N[x]} 1 / (deg_{G[U]}(y) + 1)` and deletes `N[x]`.
/// The result has at least `n^2 / (2m + n)` vertices.
pub fn find_independent_set(graph: &AdjacencyGraph) -> Vec<Vertex> {
    let n = graph.n();
    let mut alive = vec![true; n];
    let mut deg: Vec<usize> = (0..n as Vertex).map(|x| graph.degree(x)).collect();
    let mut remaining = n;
    let mut set = Vec::new();
    let inv = |d: usize| 1.0 / (d as f64 + 1.0);
    while remaining > 0 {
        let mut best: Option<(f64, Vertex)> = None;
        for x in 0..n {
            if !alive[x] {
                continue;
            }
            let mut score = inv(deg[x]);
            for &y in graph.neighbors(x as Vertex) {
                if alive[y as usize] {
                    score += inv(deg[y as usize]);
                }
            }
            // ties (up to rounding) go to the smaller id
            if best.is_none_or(|(b, _)| score < b - 1e-12) {
                best = Some((score, x as Vertex));
            }
        }
        let (_, x) = best.expect("remaining > 0");
        set.push(x);
        let mut closed: Vec<Vertex> = vec![x];
        closed.extend(graph.neighbors(x).iter().filter(|&&y| alive[y as usize]));
        for &z in &closed {
            alive[z as usize] = false;
            remaining -= 1;
        }
        for &z in &closed {
            for &y in graph.neighbors(z) {
                if alive[y as usize] {
                    deg[y as usize] -= 1;
                }
            }
        }
    }
    set.sort_unstable();
    set
}

/// `ceil(n^2 / (2m + n))`, the guaranteed independent-set size.
pub fn turan_bound(n: usize, m: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let num = (n * n) as u128;
    let den = (2 * m + n) as u128;
    num.div_ceil(den) as usize
}

pub fn is_prime(x: u64) -> bool {
    if x < 2 {
        return false;
    }
    if x % 2 == 0 {
        return x == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= x {
        if x % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Smallest prime in `[lo, hi]` by trial division.
pub fn prime_in_range(lo: u64, hi: u64) -> Result<u64> {
    (lo.max(2)..=hi)
        .find(|&x| is_prime(x))
        .ok_or_else(|| Error::Config(format!("no prime in [{lo}, {hi}]")))
}

/// Parses the plain edge-list format: one `u v` pair per line, `#` comments.
pub fn parse_edge_list(text: &str) -> Result<Vec<Edge>> {
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: &str| Error::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        let mut it = line.split_whitespace();
        let a: Vertex = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err("expected two vertex ids"))?;
        let b: Vertex = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err("expected two vertex ids"))?;
        if it.next().is_some() {
            return Err(parse_err("trailing tokens"));
        }
        edges.push(Edge::new(a, b).map_err(|e| parse_err(&e.to_string()))?);
    }
    Ok(edges)
}
