//! Robust coloring with few random bits.
//!
//! For every future epoch `i` and repetition `j` a 4-wise independent hash
//! `h_ij: V -> [ℓ²]` records its monochromatic edges in a set `D_ij` that is
//! dropped as soon as it grows past `7n/Δ`. A query greedily colors the
//! first surviving set of the current epoch together with the buffer, and
//! pairs that color with the hash value.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{input, theory, Error, Result};
use crate::graph::{greedy_by_id, Color, Edge};
use crate::harness::StreamColorer;
use crate::hashing::{FourIndepHash, Gf2w, PairPowers};
use crate::stream::{SpaceCategory, SpaceMeter};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LowRandConfig {
    pub n: usize,
    pub delta: usize,
    pub seed: u64,
}

impl LowRandConfig {
    pub fn new(n: usize, delta: usize, seed: u64) -> Result<Self> {
        if n == 0 || delta == 0 {
            return Err(Error::Usage("n and delta must be positive".into()));
        }
        Ok(LowRandConfig { n, delta, seed })
    }

    /// `ceil(10 log2 n)`.
    pub fn repetitions(&self) -> usize {
        (10.0 * (self.n.max(2) as f64).log2()).ceil() as usize
    }

    /// Largest power of two not above Δ.
    pub fn ell(&self) -> u64 {
        1u64 << (usize::BITS - 1 - self.delta.leading_zeros())
    }

    pub fn hash_range(&self) -> u64 {
        self.ell() * self.ell()
    }

    pub fn out_bits(&self) -> u32 {
        2 * self.ell().trailing_zeros()
    }

    /// `ceil(log2 max(n, ℓ²))`, at least 1.
    pub fn field_width(&self) -> u32 {
        let m = (self.n as u64).max(self.hash_range()).max(2);
        64 - (m - 1).leading_zeros()
    }

    /// A set accepts an edge only while `|D| < 7n/Δ`.
    pub fn accepts(&self, len: usize) -> bool {
        len * self.delta < 7 * self.n
    }

    /// `floor(7n/Δ) + 1`, the largest size a set can reach.
    pub fn set_cap(&self) -> usize {
        7 * self.n / self.delta + 1
    }

    pub fn color_space(&self) -> u64 {
        (self.delta as u64 + 1) * self.hash_range()
    }

    pub fn seed_bits(&self) -> u64 {
        (self.delta * self.repetitions()) as u64 * 4 * self.field_width() as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EdgeSet {
    Live(Vec<Edge>),
    Invalidated,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RandomnessAudit {
    pub hashes: u64,
    pub field_width: u32,
    pub seed_bits: u64,
    pub stored_edges: u64,
    pub state_bits: u64,
    /// State bits allowed by the worst case: seeds, every set at its cap,
    /// a full buffer and the degree counters.
    pub worst_case_bits: u64,
}

pub struct LowRandColorer {
    cfg: LowRandConfig,
    hashes: Vec<FourIndepHash>,
    sets: Vec<EdgeSet>,
    field: Arc<Gf2w>,
    degree: Vec<u32>,
    buffer: Vec<Edge>,
    /// 1-based epoch.
    curr: usize,
    /// Epoch in which each set was first read, if ever.
    read_at: Vec<Option<usize>>,
    phase_violations: u64,
    max_set_len: usize,
    invalidations: u64,
    /// `h(y)` for every vertex under the hash of the set last read.
    hash_values: Option<(usize, Vec<u64>)>,
    meter: SpaceMeter,
}

impl LowRandColorer {
    pub fn new(cfg: LowRandConfig) -> Self {
        let field = Arc::new(Gf2w::new(cfg.field_width()));
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let count = cfg.delta * cfg.repetitions();
        let hashes: Vec<FourIndepHash> = (0..count)
            .map(|_| FourIndepHash::random(field.clone(), cfg.out_bits(), &mut rng))
            .collect();
        let mut meter = SpaceMeter::new(cfg.n);
        meter.set(SpaceCategory::HashDescriptions, 4 * count as u64);
        meter.set(SpaceCategory::Counters, cfg.n as u64);
        LowRandColorer {
            sets: vec![EdgeSet::Live(Vec::new()); count],
            read_at: vec![None; count],
            hashes,
            field,
            degree: vec![0; cfg.n],
            buffer: Vec::new(),
            curr: 1,
            phase_violations: 0,
            max_set_len: 0,
            invalidations: 0,
            hash_values: None,
            meter,
            cfg,
        }
    }

    pub fn config(&self) -> &LowRandConfig {
        &self.cfg
    }

    pub fn meter(&self) -> &SpaceMeter {
        &self.meter
    }

    fn index(&self, epoch: usize, rep: usize) -> usize {
        (epoch - 1) * self.cfg.repetitions() + rep
    }

    pub fn set(&self, epoch: usize, rep: usize) -> &EdgeSet {
        &self.sets[self.index(epoch, rep)]
    }

    pub fn epoch(&self) -> usize {
        self.curr
    }

    /// Writes to a set after it was read; must stay zero.
    pub fn phase_violations(&self) -> u64 {
        self.phase_violations
    }

    pub fn max_set_len(&self) -> usize {
        self.max_set_len
    }

    pub fn invalidations(&self) -> u64 {
        self.invalidations
    }

    /// Appends a monochromatic edge to set `idx` or invalidates it.
    fn offer(&mut self, idx: usize, e: Edge) {
        if self.read_at[idx].is_some() {
            self.phase_violations += 1;
        }
        match &mut self.sets[idx] {
            EdgeSet::Live(d) if self.cfg.accepts(d.len()) => {
                d.push(e);
                self.max_set_len = self.max_set_len.max(d.len());
            }
            EdgeSet::Live(_) => {
                self.sets[idx] = EdgeSet::Invalidated;
                self.invalidations += 1;
            }
            EdgeSet::Invalidated => {}
        }
    }

    fn stored(&self) -> usize {
        self.buffer.len()
            + self
                .sets
                .iter()
                .map(|s| match s {
                    EdgeSet::Live(v) => v.len(),
                    EdgeSet::Invalidated => 0,
                })
                .sum::<usize>()
    }

    pub fn randomness_audit(&self) -> RandomnessAudit {
        let id_bits = self.meter.id_bits() as u64;
        let stored = self.stored() as u64;
        let counter_bits = self.cfg.n as u64 * id_bits;
        let seed_bits: u64 = self.hashes.iter().map(|h| h.seed_bits()).sum();
        let worst_edges = (self.hashes.len() * self.cfg.set_cap() + self.cfg.n) as u64;
        RandomnessAudit {
            hashes: self.hashes.len() as u64,
            field_width: self.field.width(),
            seed_bits,
            stored_edges: stored,
            state_bits: seed_bits + 2 * id_bits * stored + counter_bits,
            worst_case_bits: seed_bits + 2 * id_bits * worst_edges + counter_bits,
        }
    }
}

impl StreamColorer for LowRandColorer {
    fn process(&mut self, e: Edge) -> Result<()> {
        e.check_range(self.cfg.n)?;
        let (u, v) = (e.u() as usize, e.v() as usize);
        if self.degree[u] as usize >= self.cfg.delta || self.degree[v] as usize >= self.cfg.delta {
            return input(format!("edge {e} exceeds the degree cap {}", self.cfg.delta));
        }
        if self.buffer.len() == self.cfg.n {
            self.buffer.clear();
            let reps = self.cfg.repetitions();
            // past epochs are never read again
            let old = self.index(self.curr, 0);
            for s in &mut self.sets[old..old + reps] {
                *s = EdgeSet::Invalidated;
            }
            self.curr += 1;
            if self.curr > self.cfg.delta {
                return input("stream is longer than nΔ/2 edges");
            }
        }
        self.buffer.push(e);
        self.degree[u] += 1;
        self.degree[v] += 1;
        let pp = PairPowers::new(&self.field, e.u() as u64, e.v() as u64);
        let start = self.index(self.curr + 1, 0).min(self.sets.len());
        for idx in start..self.sets.len() {
            if !self.hashes[idx].collides(&pp) {
                continue;
            }
            self.offer(idx, e);
        }
        self.meter.set(SpaceCategory::StoredEdges, 2 * self.stored() as u64);
        Ok(())
    }

    fn query(&mut self) -> Result<Vec<Color>> {
        let n = self.cfg.n;
        let first = self.index(self.curr, 0);
        let reps = self.cfg.repetitions();
        let Some(k) = (0..reps).find(|&j| matches!(self.sets[first + j], EdgeSet::Live(_))) else {
            return Err(Error::QueryFail(format!(
                "every set of epoch {} was invalidated",
                self.curr
            )));
        };
        let idx = first + k;
        self.read_at[idx].get_or_insert(self.curr);
        let EdgeSet::Live(d) = &self.sets[idx] else { unreachable!() };
        let edges: Vec<Edge> = d.iter().chain(&self.buffer).copied().collect();
        let chi = greedy_by_id(n, &edges);
        if self.hash_values.as_ref().is_none_or(|(i, _)| *i != idx) {
            let h = &self.hashes[idx];
            self.hash_values = Some((idx, (0..n as u64).map(|y| h.eval(y)).collect()));
            self.meter.set(SpaceCategory::Coloring, n as u64);
        }
        let values = &self.hash_values.as_ref().expect("filled above").1;
        let range = self.cfg.hash_range();
        chi.iter()
            .zip(values)
            .map(|(&c, &hy)| {
                if c as usize > self.cfg.delta {
                    return theory(format!("greedy used color {c} above Δ"));
                }
                Ok((c as u64 * range + hy) as Color)
            })
            .collect()
    }

    fn palette_size(&self) -> u64 {
        self.cfg.color_space()
    }

    fn stored_edges(&self) -> usize {
        self.stored()
    }

    fn audit(&self, _graph: &[Edge]) -> Result<()> {
        if self.phase_violations > 0 {
            return theory("a set was written after it was read");
        }
        if self.max_set_len > self.cfg.set_cap() {
            return theory(format!("a set reached {} edges", self.max_set_len));
        }
        Ok(())
    }

    fn stats(&self) -> Vec<(&'static str, u64)> {
        let a = self.randomness_audit();
        vec![
            ("epoch", self.curr as u64),
            ("max_set_len", self.max_set_len as u64),
            ("invalidations", self.invalidations),
            ("phase_violations", self.phase_violations),
            ("seed_bits", a.seed_bits),
            ("state_bits", a.state_bits),
        ]
    }
}
