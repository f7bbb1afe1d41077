//! Single-pass coloring that stays correct against an adaptive adversary.
//!
//! The stream is cut into buffers of `n Δ^β` edges. Vertices with many
//! buffer edges are "fast" and are colored per degree level, the rest are
//! "slow" and are colored per block of a hash that is still unused when its
//! edges are recorded. Every block gets its own slice of the palette.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{input, theory, Error, Result};
use crate::graph::{degeneracy_plus_one_color, greedy_by_id, AdjacencyGraph, Color, Edge, Vertex};
use crate::harness::StreamColorer;
use crate::hashing::KeyedHash;
use crate::stream::{SpaceCategory, SpaceMeter};

/// `ceil(base^exp)`, snapping values within rounding noise of an integer.
pub fn ceil_pow(base: f64, exp: f64) -> u64 {
    let v = base.powf(exp);
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.max(1.0) {
        r as u64
    } else {
        v.ceil() as u64
    }
}

fn log2_n(n: usize) -> f64 {
    (n.max(2) as f64).log2()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RobustConfig {
    pub n: usize,
    pub delta: usize,
    pub beta: f64,
    pub seed: u64,
}

impl RobustConfig {
    pub fn new(n: usize, delta: usize, beta: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Usage(format!("beta {beta} outside [0, 1]")));
        }
        if n == 0 || delta == 0 {
            return Err(Error::Usage("n and delta must be positive".into()));
        }
        Ok(RobustConfig { n, delta, beta, seed })
    }

    fn dpow(&self, e: f64) -> u64 {
        ceil_pow(self.delta as f64, e).max(1)
    }

    /// Edges per buffer before it is emptied.
    pub fn buffer_cap(&self) -> usize {
        let v = self.n as f64 * (self.delta as f64).powf(self.beta);
        let r = v.round();
        (if (v - r).abs() <= 1e-9 * r.max(1.0) { r } else { v.ceil() }) as usize
    }

    pub fn epochs(&self) -> usize {
        self.dpow(1.0 - self.beta) as usize
    }

    pub fn slow_range(&self) -> u64 {
        self.dpow(2.0 - 2.0 * self.beta)
    }

    pub fn fast_threshold(&self) -> u64 {
        self.dpow((1.0 + self.beta) / 2.0)
    }

    pub fn levels(&self) -> usize {
        self.dpow((1.0 - self.beta) / 2.0) as usize
    }

    pub fn fast_range(&self) -> u64 {
        self.dpow(1.5 * (1.0 - self.beta))
    }

    /// `ceil(5 log2 n)`, the per-vertex tail bound on recorded edges.
    pub fn tail_bound(&self) -> u64 {
        (5.0 * log2_n(self.n)).ceil() as u64
    }

    /// Colors reserved per block.
    pub fn block_capacity(&self) -> u64 {
        self.fast_threshold() + self.tail_bound() + 1
    }

    /// Below `Δ < log² n` the analysis does not apply and the whole graph is
    /// stored instead.
    pub fn fallback(&self) -> bool {
        (self.delta as f64) < log2_n(self.n).powi(2)
    }

    /// Total colors reserved by the layout.
    pub fn palette_bound(&self) -> u64 {
        if self.fallback() {
            return self.delta as u64 + 1;
        }
        (self.slow_range() + self.levels() as u64 * self.fast_range()) * self.block_capacity()
    }

    /// `(5 - 3β) / 2`, the exponent of Δ in the asymptotic color bound.
    pub fn palette_exponent(&self) -> f64 {
        (5.0 - 3.0 * self.beta) / 2.0
    }
}

/// Disjoint color ranges for slow blocks followed by fast blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PaletteLayout {
    pub slow_blocks: u64,
    pub levels: u64,
    pub fast_blocks: u64,
    pub capacity: u64,
}

impl PaletteLayout {
    pub fn new(cfg: &RobustConfig) -> Self {
        PaletteLayout {
            slow_blocks: cfg.slow_range(),
            levels: cfg.levels() as u64,
            fast_blocks: cfg.fast_range(),
            capacity: cfg.block_capacity(),
        }
    }

    pub fn total(&self) -> u64 {
        (self.slow_blocks + self.levels * self.fast_blocks) * self.capacity
    }

    /// `level` is 1-based.
    pub fn fast_block(&self, level: u64, block: u64) -> u64 {
        self.slow_blocks + (level - 1) * self.fast_blocks + block
    }

    pub fn color(&self, block: u64, local: u64) -> u64 {
        block * self.capacity + local
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RobustStats {
    pub epoch: usize,
    pub buffer_edges: usize,
    pub slow_set_edges: usize,
    pub fast_set_edges: usize,
    /// Max over vertices of the number of slow-set insertions touching it.
    pub max_slow_set_degree: u64,
    pub max_fast_set_degree: u64,
    pub fallback: bool,
}

pub struct RobustColorer {
    cfg: RobustConfig,
    layout: PaletteLayout,
    threshold: u64,
    buffer_cap: usize,
    slow_hash: Vec<KeyedHash>,
    fast_hash: Vec<KeyedHash>,
    degree: Vec<u32>,
    buffer: Vec<Edge>,
    buffer_degree: Vec<u32>,
    /// 1-based epoch.
    curr: usize,
    slow_sets: Vec<Vec<Edge>>,
    fast_sets: Vec<Vec<Edge>>,
    slow_set_degree: Vec<u32>,
    fast_set_degree: Vec<u32>,
    /// Stream time at which each vertex entered each level.
    level_entry: Vec<Vec<u64>>,
    time: u64,
    whole_graph: Option<Vec<Edge>>,
    meter: SpaceMeter,
    /// Zones built by the last query, with the stream time they belong to.
    last_zones: Option<(u64, Zones)>,
}

impl RobustColorer {
    pub fn new(cfg: RobustConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let fallback = cfg.fallback();
        let (slow_hash, fast_hash) = if fallback {
            (vec![], vec![])
        } else {
            let slow = (0..cfg.epochs())
                .map(|_| KeyedHash::new(rng.gen(), cfg.slow_range()))
                .collect();
            let fast = (0..cfg.levels())
                .map(|_| KeyedHash::new(rng.gen(), cfg.fast_range()))
                .collect();
            (slow, fast)
        };
        let mut meter = SpaceMeter::new(cfg.n);
        meter.set(SpaceCategory::Counters, 2 * cfg.n as u64);
        meter.set(
            SpaceCategory::HashDescriptions,
            (slow_hash.len() + fast_hash.len()) as u64,
        );
        RobustColorer {
            layout: PaletteLayout::new(&cfg),
            threshold: cfg.fast_threshold(),
            buffer_cap: cfg.buffer_cap(),
            slow_sets: vec![Vec::new(); slow_hash.len()],
            fast_sets: vec![Vec::new(); fast_hash.len()],
            slow_hash,
            fast_hash,
            degree: vec![0; cfg.n],
            buffer: Vec::new(),
            buffer_degree: vec![0; cfg.n],
            curr: 1,
            slow_set_degree: vec![0; cfg.n],
            fast_set_degree: vec![0; cfg.n],
            level_entry: vec![Vec::new(); cfg.n],
            time: 0,
            whole_graph: fallback.then(Vec::new),
            meter,
            last_zones: None,
            cfg,
        }
    }

    pub fn config(&self) -> &RobustConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &PaletteLayout {
        &self.layout
    }

    pub fn meter(&self) -> &SpaceMeter {
        &self.meter
    }

    pub fn robust_stats(&self) -> RobustStats {
        RobustStats {
            epoch: self.curr,
            buffer_edges: self.buffer.len(),
            slow_set_edges: self.slow_sets.iter().map(Vec::len).sum(),
            fast_set_edges: self.fast_sets.iter().map(Vec::len).sum(),
            max_slow_set_degree: self.slow_set_degree.iter().copied().max().unwrap_or(0) as u64,
            max_fast_set_degree: self.fast_set_degree.iter().copied().max().unwrap_or(0) as u64,
            fallback: self.whole_graph.is_some(),
        }
    }

    fn threshold(&self) -> u64 {
        self.threshold
    }

    fn level_of(&self, d: u32) -> usize {
        (d as u64).div_ceil(self.threshold()) as usize
    }

    fn is_fast(&self, x: Vertex) -> bool {
        self.buffer_degree[x as usize] as u64 > self.threshold()
    }

    fn stored(&self) -> usize {
        match &self.whole_graph {
            Some(g) => g.len(),
            None => {
                self.buffer.len()
                    + self.slow_sets.iter().map(Vec::len).sum::<usize>()
                    + self.fast_sets.iter().map(Vec::len).sum::<usize>()
            }
        }
    }

    /// Layout block of every vertex: its slow block, or its fast block
    /// numbered after all slow ones.
    fn blocks(&self) -> Vec<u64> {
        let slow = &self.slow_hash[self.curr - 1];
        (0..self.cfg.n as Vertex)
            .map(|x| {
                if self.is_fast(x) {
                    let level = self.level_of(self.degree[x as usize]);
                    self.layout.fast_block(level as u64, self.fast_hash[level - 1].eval(x))
                } else {
                    slow.eval(x)
                }
            })
            .collect()
    }

    /// Stored edges inside blocks, split by zone, each sorted.
    fn stored_by_zone(&self) -> Zones {
        let block = self.blocks();
        let same = |e: &Edge| block[e.u() as usize] == block[e.v() as usize];
        let mut z = Zones::default();
        z.slow.extend(self.slow_sets[self.curr - 1].iter().filter(|e| same(e) && !self.is_fast(e.u())));
        for (i, set) in self.fast_sets.iter().enumerate() {
            z.fast_from_sets.extend(set.iter().filter(|e| {
                same(e) && self.is_fast(e.u()) && self.level_of(self.degree[e.u() as usize]) == i + 1
            }));
        }
        for e in self.buffer.iter().filter(|e| same(e)) {
            if self.is_fast(e.u()) {
                z.fast.push(*e);
            } else {
                z.slow.push(*e);
            }
        }
        z.fast.extend_from_slice(&z.fast_from_sets);
        for v in [&mut z.slow, &mut z.fast, &mut z.fast_from_sets] {
            v.sort_unstable();
            v.dedup();
        }
        z.block = block;
        z
    }

    fn check_local(&self, local: Color) -> Result<()> {
        if local as u64 >= self.layout.capacity {
            return Err(Error::PaletteOverflow(format!(
                "block needed color {local} but holds {}",
                self.layout.capacity
            )));
        }
        Ok(())
    }

    /// Checks that need the full graph: every edge inside a slow block is in
    /// the current slow set or the buffer, every edge inside a fast block is
    /// in its level's set or the buffer, and buffer-only edges inside a fast
    /// block, oriented toward the later arrival into the level, have
    /// out-degree at most the fast threshold.
    pub fn check_invariants(&self, graph: &[Edge]) -> Result<()> {
        if self.whole_graph.is_some() {
            return Ok(());
        }
        let fresh;
        let z = match &self.last_zones {
            Some((t, z)) if *t == self.time => z,
            _ => {
                fresh = self.stored_by_zone();
                &fresh
            }
        };
        for e in graph {
            if z.block[e.u() as usize] != z.block[e.v() as usize] {
                continue;
            }
            let (zone, stored) = if self.is_fast(e.u()) { ("fast", &z.fast) } else { ("slow", &z.slow) };
            if stored.binary_search(e).is_err() {
                return theory(format!("{zone} block edge {e} is not stored"));
            }
        }
        let mut out = vec![0u64; self.cfg.n];
        for e in &self.buffer {
            let (u, v) = (e.u(), e.v());
            if z.block[u as usize] != z.block[v as usize]
                || !self.is_fast(u)
                || z.fast_from_sets.binary_search(e).is_ok()
            {
                continue;
            }
            let level = self.level_of(self.degree[u as usize]);
            let tu = self.level_entry[u as usize][level - 1];
            let tv = self.level_entry[v as usize][level - 1];
            let tail = if tv >= tu { u } else { v };
            out[tail as usize] += 1;
            if out[tail as usize] > self.threshold() {
                return theory(format!(
                    "vertex {tail} has out-degree above {} in its fast block",
                    self.threshold()
                ));
            }
        }
        Ok(())
    }
}

/// (degeneracy+1)-coloring of the graph spanned by sorted, distinct
/// `edges`; isolated vertices get color 0.
fn degeneracy_color_edges(n: usize, edges: &[Edge]) -> Vec<Color> {
    let mut touched: Vec<Vertex> = edges.iter().flat_map(|e| [e.u(), e.v()]).collect();
    touched.sort_unstable();
    touched.dedup();
    let id = |x: Vertex| touched.binary_search(&x).unwrap() as Vertex;
    let compact: Vec<Edge> = edges
        .iter()
        .map(|e| Edge::new(id(e.u()), id(e.v())).expect("distinct"))
        .collect();
    let local = degeneracy_plus_one_color(
        &AdjacencyGraph::from_edges(touched.len(), &compact).expect("distinct edges"),
    );
    let mut colors = vec![0; n];
    for (i, &x) in touched.iter().enumerate() {
        colors[x as usize] = local.get(i as Vertex).expect("all colored");
    }
    colors
}

#[derive(Default)]
struct Zones {
    block: Vec<u64>,
    slow: Vec<Edge>,
    fast: Vec<Edge>,
    fast_from_sets: Vec<Edge>,
}

impl StreamColorer for RobustColorer {
    fn process(&mut self, e: Edge) -> Result<()> {
        e.check_range(self.cfg.n)?;
        let (u, v) = (e.u() as usize, e.v() as usize);
        if self.degree[u] as usize >= self.cfg.delta || self.degree[v] as usize >= self.cfg.delta {
            return input(format!("edge {e} exceeds the degree cap {}", self.cfg.delta));
        }
        self.degree[u] += 1;
        self.degree[v] += 1;
        if let Some(g) = &mut self.whole_graph {
            g.push(e);
            self.meter.set(SpaceCategory::StoredEdges, 2 * g.len() as u64);
            return Ok(());
        }
        if self.buffer.len() == self.buffer_cap {
            for b in self.buffer.drain(..) {
                self.buffer_degree[b.u() as usize] = 0;
                self.buffer_degree[b.v() as usize] = 0;
            }
            self.slow_sets[self.curr - 1] = Vec::new();
            self.curr += 1;
            if self.curr > self.slow_hash.len() {
                return input("stream is longer than nΔ/2 edges");
            }
        }
        self.buffer.push(e);
        self.buffer_degree[u] += 1;
        self.buffer_degree[v] += 1;
        self.time += 1;
        let t = self.threshold();
        for x in [u, v] {
            if (self.degree[x] as u64 - 1) % t == 0 {
                self.level_entry[x].push(self.time);
            }
        }
        for i in self.curr..self.slow_hash.len() {
            let h = &self.slow_hash[i];
            if h.eval(e.u()) == h.eval(e.v()) {
                self.slow_sets[i].push(e);
                self.slow_set_degree[u] += 1;
                self.slow_set_degree[v] += 1;
            }
        }
        let lowest = self.level_of(self.degree[u].max(self.degree[v]));
        for i in lowest..self.fast_hash.len() {
            let g = &self.fast_hash[i];
            if g.eval(e.u()) == g.eval(e.v()) {
                self.fast_sets[i].push(e);
                self.fast_set_degree[u] += 1;
                self.fast_set_degree[v] += 1;
            }
        }
        self.meter.set(SpaceCategory::StoredEdges, 2 * self.stored() as u64);
        Ok(())
    }

    fn query(&mut self) -> Result<Vec<Color>> {
        let n = self.cfg.n;
        if let Some(g) = &self.whole_graph {
            return Ok(greedy_by_id(n, g));
        }
        let z = self.stored_by_zone();
        let slow_local = greedy_by_id(n, &z.slow);
        let fast_local = degeneracy_color_edges(n, &z.fast);
        let colors = (0..n as Vertex)
            .map(|x| {
                let local = if self.is_fast(x) { fast_local[x as usize] } else { slow_local[x as usize] };
                self.check_local(local)?;
                Ok(self.layout.color(z.block[x as usize], local as u64) as Color)
            })
            .collect::<Result<Vec<Color>>>();
        self.last_zones = Some((self.time, z));
        colors
    }

    fn palette_size(&self) -> u64 {
        self.cfg.palette_bound()
    }

    fn stored_edges(&self) -> usize {
        self.stored()
    }

    fn audit(&self, graph: &[Edge]) -> Result<()> {
        self.check_invariants(graph)
    }

    fn stats(&self) -> Vec<(&'static str, u64)> {
        let s = self.robust_stats();
        vec![
            ("epoch", s.epoch as u64),
            ("max_slow_set_degree", s.max_slow_set_degree),
            ("max_fast_set_degree", s.max_fast_set_degree),
            ("slow_set_edges", s.slow_set_edges as u64),
            ("fast_set_edges", s.fast_set_edges as u64),
            ("fallback", s.fallback as u64),
        ]
    }
}
