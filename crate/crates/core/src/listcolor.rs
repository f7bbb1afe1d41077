//! Deterministic multipass (degree+1)-list-coloring.
//!
//! Same epoch structure as the (Δ+1) algorithm, but proposals are cut down by
//! partitions of the color universe picked from the family
//! `c -> ((a c + b) mod p) mod s`. Each refining stage first spends four
//! passes choosing a partition whose cost is at most the family average,
//! then three passes choosing the hash as before. A last stage splits the
//! survivors into single colors.

use serde::Serialize;

use crate::derand::{ChildSlacks, ConflictEdge, GwSampler};
use crate::determ::{check_same, hash_prime, precision, select_refinement, stage_bits, EdgeFeed};
use crate::error::{input, theory, Error, Result};
use crate::graph::{find_independent_set, prime_in_range, AdjacencyGraph, Color, Edge, PartialColoring, Vertex};
use crate::stream::{MultiPassSource, SpaceCategory, SpaceMeter, StreamToken};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Partition {
    pub a: u64,
    pub b: u64,
    pub p: u64,
    pub s: u64,
}

impl Partition {
    #[inline]
    pub fn part(&self, c: Color) -> u64 {
        ((self.a as u128 * c as u128 + self.b as u128) % self.p as u128) as u64 % self.s
    }
}

/// All `c -> ((a c + b) mod p) mod s` with `a` in `[1, p)`, `b` in `[0, p)`,
/// indexed by `(a - 1) p + b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionFamily {
    pub p: u64,
    pub s: u64,
}

impl PartitionFamily {
    /// `p` is the smallest prime at least `universe`.
    pub fn new(universe: u64, s: u64) -> Result<Self> {
        if universe > 1 << 31 {
            return Err(Error::Config(format!("color universe {universe} is too large")));
        }
        let lo = universe.max(2);
        Ok(PartitionFamily {
            p: prime_in_range(lo, 2 * lo)?,
            s,
        })
    }

    pub fn size(&self) -> u64 {
        (self.p - 1) * self.p
    }

    pub fn member(&self, i: u64) -> Partition {
        Partition {
            a: 1 + i / self.p,
            b: i % self.p,
            p: self.p,
            s: self.s,
        }
    }
}

/// `max over parts R of |S ∩ R| - 1`, and 0 for an empty set.
pub fn partition_cost(part: &Partition, set: &[Color]) -> u64 {
    if set.len() <= 1 {
        return 0;
    }
    let mut ids: Vec<u64> = set.iter().map(|&c| part.part(c)).collect();
    ids.sort_unstable();
    let mut best = 1;
    let mut run = 1;
    for w in ids.windows(2) {
        run = if w[0] == w[1] { run + 1 } else { 1 };
        best = best.max(run);
    }
    best as u64 - 1
}

/// Scratch space for sweeping one row `a` of the family over all `b`.
///
/// With residue `r = a c mod p`, color `c` lands in part `(key + b) mod s`
/// where `key = r mod s` until `b` reaches `p - r` and `(r - p) mod s` after.
/// Shifting every key by `b` permutes parts, so the cost only changes at
/// those switch points.
#[derive(Clone, Debug, Default)]
struct RowSweep {
    count: Vec<u32>,
    freq: Vec<u32>,
    events: Vec<u64>,
    runs: Vec<(u64, u64)>,
}

impl RowSweep {
    fn bump_up(&mut self, key: usize, max: &mut u32) {
        let c = self.count[key];
        if c > 0 {
            self.freq[c as usize] -= 1;
        }
        self.count[key] = c + 1;
        self.freq[c as usize + 1] += 1;
        *max = (*max).max(c + 1);
    }

    fn bump_down(&mut self, key: usize, max: &mut u32) {
        let c = self.count[key];
        self.freq[c as usize] -= 1;
        if c == *max && self.freq[c as usize] == 0 {
            *max -= 1;
        }
        self.count[key] = c - 1;
        if c > 1 {
            self.freq[c as usize - 1] += 1;
        }
    }

    /// Costs for all `b` as runs `(first b, cost)`, given the residues of
    /// the set's colors.
    fn runs(&mut self, residues: &[u64], p: u64, s: u64) -> &[(u64, u64)] {
        self.runs.clear();
        if residues.len() <= 1 {
            self.runs.push((0, 0));
            return &self.runs;
        }
        if self.count.len() < s as usize {
            self.count.resize(s as usize, 0);
        }
        self.freq.clear();
        self.freq.resize(residues.len() + 1, 0);
        let shift = p % s;
        let mut max = 0;
        self.events.clear();
        for (i, &r) in residues.iter().enumerate() {
            self.bump_up((r % s) as usize, &mut max);
            if r != 0 && (r % s) != (r + s - shift) % s {
                self.events.push((p - r) << 32 | i as u64);
            }
        }
        self.events.sort_unstable();
        self.runs.push((0, max as u64 - 1));
        let mut i = 0;
        while i < self.events.len() {
            let at = self.events[i] >> 32;
            while i < self.events.len() && self.events[i] >> 32 == at {
                let r = residues[(self.events[i] & 0xffff_ffff) as usize];
                self.bump_down((r % s) as usize, &mut max);
                self.bump_up(((r + s - shift) % s) as usize, &mut max);
                i += 1;
            }
            let cost = max as u64 - 1;
            if self.runs.last().unwrap().1 != cost {
                self.runs.push((at, cost));
            }
        }
        for &r in residues {
            self.count[(r % s) as usize] = 0;
            self.count[((r + s - shift) % s) as usize] = 0;
        }
        &self.runs
    }
}

fn sum_runs(runs: &[(u64, u64)], p: u64, lo: u64, hi: u64) -> u128 {
    let mut total = 0u128;
    for (i, &(start, cost)) in runs.iter().enumerate() {
        let end = runs.get(i + 1).map_or(p, |r| r.0);
        let (l, h) = (start.max(lo), end.min(hi));
        if l < h {
            total += (h - l) as u128 * cost as u128;
        }
    }
    total
}

/// Splits `[lo, hi)` into at most `q` contiguous groups of equal size (the
/// last one may be shorter).
fn split(lo: u64, hi: u64, q: u64) -> Vec<(u64, u64)> {
    let size = (hi - lo).div_ceil(q).max(1);
    (lo..hi).step_by(size as usize).map(|s| (s, (s + size).min(hi))).collect()
}

/// Smallest `q` with `q^4 >= size`.
fn fourth_root_ceil(size: u64) -> u64 {
    let mut q = (size as f64).powf(0.25).floor() as u64;
    while q.saturating_pow(4) < size {
        q += 1;
    }
    q.max(1)
}

/// Successive refinement over the flat family index. Each level is fed the
/// current sets `P_x ∩ L_x` once, i.e. one pass.
#[derive(Clone, Debug)]
pub struct PartitionSearch {
    family: PartitionFamily,
    fanout: u64,
    range: (u64, u64),
    groups: Vec<(u64, u64)>,
    sums: Vec<u128>,
    level: usize,
    sweep: RowSweep,
    residues: Vec<u64>,
    /// Sum over sets of `|S| - 1`, taken during the first level.
    pub total: u128,
    pub chain: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionChoice {
    pub index: u64,
    pub partition: Partition,
    pub cost: u128,
    pub total: u128,
}

impl PartitionSearch {
    pub const LEVELS: usize = 4;

    pub fn new(family: PartitionFamily) -> Self {
        let mut s = PartitionSearch {
            family,
            fanout: fourth_root_ceil(family.size()),
            range: (0, family.size()),
            groups: vec![],
            sums: vec![],
            level: 0,
            sweep: RowSweep::default(),
            residues: vec![],
            total: 0,
            chain: vec![],
        };
        s.start_level();
        s
    }

    fn last_level(&self) -> bool {
        self.level == Self::LEVELS - 1
    }

    fn start_level(&mut self) {
        let (lo, hi) = self.range;
        self.groups = if self.last_level() {
            (lo..hi).map(|i| (i, i + 1)).collect()
        } else {
            split(lo, hi, self.fanout)
        };
        self.sums = vec![0; self.groups.len()];
    }

    /// Accumulators held during the current level.
    pub fn words(&self) -> u64 {
        self.groups.len() as u64
    }

    pub fn add_set(&mut self, set: &[Color]) {
        if self.level == 0 {
            self.total += set.len().saturating_sub(1) as u128;
        }
        if set.len() <= 1 {
            return;
        }
        let p = self.family.p;
        if self.last_level() {
            for (g, &(i, _)) in self.groups.iter().enumerate() {
                self.sums[g] += partition_cost(&self.family.member(i), set) as u128;
            }
            return;
        }
        let (lo, hi) = self.range;
        let gsize = self.groups[0].1 - self.groups[0].0;
        let first = lo / p;
        self.residues.clear();
        self.residues
            .extend(set.iter().map(|&c| (first + 1) * c as u64 % p));
        for row in first..=(hi - 1) / p {
            if row > first {
                for (r, &c) in self.residues.iter_mut().zip(set) {
                    *r += c as u64;
                    if *r >= p {
                        *r -= p;
                    }
                }
            }
            let (rs, re) = (row * p, row * p + p);
            let runs = self.sweep.runs(&self.residues, p, self.family.s);
            let mut g = ((rs.max(lo) - lo) / gsize) as usize;
            while g < self.groups.len() && self.groups[g].0 < re {
                let (gs, ge) = self.groups[g];
                let (l, h) = (gs.max(rs), ge.min(re));
                if l < h {
                    self.sums[g] += sum_runs(runs, p, l - rs, h - rs);
                }
                g += 1;
            }
        }
    }

    /// Moves into the group with the least average cost (lowest index on
    /// ties). Returns the choice after the last level.
    pub fn end_level(&mut self) -> Option<PartitionChoice> {
        let mut best = 0;
        for g in 1..self.groups.len() {
            let len = |g: usize| (self.groups[g].1 - self.groups[g].0) as u128;
            if self.sums[g] * len(best) < self.sums[best] * len(g) {
                best = g;
            }
        }
        self.chain.push(best);
        if self.last_level() {
            let index = self.groups[best].0;
            return Some(PartitionChoice {
                index,
                partition: self.family.member(index),
                cost: self.sums[best],
                total: self.total,
            });
        }
        self.range = self.groups[best];
        self.level += 1;
        self.start_level();
        None
    }
}

/// Runs the four levels over sets held in memory.
pub fn select_partition_offline(family: PartitionFamily, sets: &[Vec<Color>]) -> PartitionChoice {
    let mut search = PartitionSearch::new(family);
    loop {
        for s in sets {
            search.add_set(s);
        }
        if let Some(c) = search.end_level() {
            return c;
        }
    }
}

/// Whether `cost <= total / sqrt(s)`, exactly.
pub fn within_partition_bound(cost: u128, total: u128, s: u64) -> bool {
    cost * cost * s as u128 <= total * total
}

/// Sorted, deduplicated, and cut to the `cap` smallest colors.
fn effective_list(colors: &[Color], cap: usize) -> Vec<Color> {
    let mut v = colors.to_vec();
    v.sort_unstable();
    v.dedup();
    v.truncate(cap);
    v
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ListStageTrace {
    pub partition: Option<Partition>,
    pub partition_cost: u128,
    /// Sum of `|L_x ∩ P_x| - 1` before and after the stage.
    pub excess_before: u128,
    pub excess_after: u128,
    pub potential: f64,
    pub refined_potential: f64,
    pub min_slack: u64,
    pub counter_words: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ListEpochTrace {
    pub uncolored: usize,
    pub k: u32,
    pub stages: Vec<ListStageTrace>,
    /// Words used to record the surviving candidate colors.
    pub final_list_words: usize,
    pub final_potential: f64,
    pub conflicts: usize,
    pub committed: usize,
    pub uncolored_after: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ListReport {
    pub n: usize,
    pub delta: usize,
    pub universe: u64,
    pub prime: u64,
    pub passes: usize,
    pub epochs: Vec<ListEpochTrace>,
    pub final_uncolored: usize,
    pub peak_words: u64,
    pub peak_counter_words: u64,
}

impl ListReport {
    /// Validation pass, seven passes per refining stage, four for the
    /// singleton stage, one per epoch end, and the final pass.
    pub fn expected_passes(&self) -> usize {
        2 + self
            .epochs
            .iter()
            .map(|e| 7 * (e.stages.len() - 1) + 4 + 1)
            .sum::<usize>()
    }
}

const NOT_LOCAL: u32 = u32::MAX;

pub struct ListColorer<'s> {
    feed: EdgeFeed<'s>,
    n: usize,
    delta: usize,
    universe: u64,
    prime: u64,
    eps: f64,
    coloring: PartialColoring,
    uncolored: Vec<Vertex>,
    local: Vec<u32>,
    meter: SpaceMeter,
    report: ListReport,
    start_passes: usize,
}

/// Per-epoch proposal state: the chosen partitions and each vertex's part.
struct Proposals {
    partitions: Vec<Partition>,
    parts: Vec<Vec<u32>>,
    class: Vec<u64>,
}

impl Proposals {
    #[inline]
    fn contains(&self, lx: usize, c: Color) -> bool {
        self.partitions
            .iter()
            .zip(&self.parts)
            .all(|(q, parts)| q.part(c) == parts[lx] as u64)
    }
}

impl<'s> ListColorer<'s> {
    /// Spends one pass validating lists and degrees and learning the color
    /// universe (and Δ when not given).
    pub fn new(source: &'s MultiPassSource, n: usize, delta: Option<usize>) -> Result<Self> {
        let start_passes = source.pass_count();
        let mut deg = vec![0usize; n];
        let mut list_len: Vec<Option<usize>> = vec![None; n];
        let mut universe = 0u64;
        for t in source.open_pass()? {
            match t {
                StreamToken::Edge(e) => {
                    e.check_range(n)?;
                    deg[e.u() as usize] += 1;
                    deg[e.v() as usize] += 1;
                }
                StreamToken::List { vertex, colors } => {
                    if *vertex as usize >= n {
                        return input(format!("list for vertex {vertex} outside [0, {n})"));
                    }
                    let mut c = colors.clone();
                    c.sort_unstable();
                    c.dedup();
                    list_len[*vertex as usize] = Some(c.len());
                    if let Some(&m) = c.last() {
                        universe = universe.max(m as u64 + 1);
                    }
                }
            }
        }
        let max_deg = deg.iter().copied().max().unwrap_or(0);
        let delta = delta.unwrap_or(max_deg);
        for x in 0..n {
            if deg[x] > delta {
                return input(format!(
                    "vertex {x} has degree {} above the declared maximum {delta}",
                    deg[x]
                ));
            }
            match list_len[x] {
                None => return input(format!("no color list for vertex {x}")),
                Some(l) if l < deg[x] + 1 => {
                    return input(format!(
                        "list of vertex {x} has {l} colors but degree {}",
                        deg[x]
                    ))
                }
                _ => {}
            }
        }
        let mut meter = SpaceMeter::new(n);
        meter.set(SpaceCategory::Coloring, n as u64);
        let prime = hash_prime(n)?;
        Ok(ListColorer {
            feed: EdgeFeed {
                source,
                n,
                delta,
                validated: true,
            },
            n,
            delta,
            universe,
            prime,
            eps: precision(n),
            coloring: PartialColoring::uncolored(n),
            uncolored: (0..n as Vertex).collect(),
            local: (0..n as u32).collect(),
            meter,
            report: ListReport {
                n,
                delta,
                universe,
                prime,
                ..Default::default()
            },
            start_passes,
        })
    }

    pub fn coloring(&self) -> &PartialColoring {
        &self.coloring
    }

    pub fn report(&self) -> &ListReport {
        &self.report
    }

    pub fn needs_epoch(&self) -> bool {
        !self.uncolored.is_empty()
            && (self.report.epochs.is_empty() || self.uncolored.len() * self.delta > self.n)
    }

    /// Refining stages per epoch: `ceil(2 log2(Δ + 1) / k)`.
    pub fn refining_stages(delta: usize, k: u32) -> usize {
        (2.0 * ((delta + 1) as f64).log2() / k as f64).ceil() as usize
    }

    pub fn run_epoch(&mut self) -> Result<&ListEpochTrace> {
        let size = self.uncolored.len();
        let k = stage_bits(self.n, size);
        let s = 1u64 << k;
        let family = PartitionFamily::new(self.universe, s)?;
        let cap = self.delta + 1;
        let mut trace = ListEpochTrace {
            uncolored: size,
            k,
            ..Default::default()
        };
        let mut props = Proposals {
            partitions: vec![],
            parts: vec![],
            class: vec![0; size],
        };
        let mut slack = vec![0u64; size];
        let mut last_edge_potential: Option<f64> = None;
        let mut excess: Option<u128> = None;
        self.meter.set(SpaceCategory::Counters, 3 * size as u64);
        let stages = Self::refining_stages(self.delta, k);

        for t in 0..stages {
            // four passes choosing the partition
            let mut search = PartitionSearch::new(family);
            let choice = loop {
                let (local, props) = (&self.local, &props);
                self.meter.set(SpaceCategory::Accumulators, search.words());
                self.feed.run_tokens(|tok| {
                    if let StreamToken::List { vertex, colors } = tok {
                        let lx = local[*vertex as usize];
                        if lx != NOT_LOCAL {
                            let set: Vec<Color> = effective_list(colors, cap)
                                .into_iter()
                                .filter(|&c| props.contains(lx as usize, c))
                                .collect();
                            search.add_set(&set);
                        }
                    }
                    Ok(())
                })?;
                if let Some(c) = search.end_level() {
                    break c;
                }
            };
            self.meter.release(SpaceCategory::Accumulators);
            if let Some(prev) = excess {
                if prev != choice.total {
                    return theory(format!("excess drifted from {prev} to {}", choice.total));
                }
            } else if choice.total > (self.delta * size) as u128 {
                return theory("initial list excess above Δ|U|");
            }
            if !within_partition_bound(choice.cost, choice.total, s) {
                return theory(format!(
                    "partition cost {} above {} / sqrt({s})",
                    choice.cost, choice.total
                ));
            }
            let q = choice.partition;

            // pass 1: per-part counts of colored neighbors and list colors
            let fan = s as usize;
            let counter_words = (size * fan) as u64;
            if counter_words > 2 * self.n as u64 {
                return theory(format!("{counter_words} slack counters exceed 2n"));
            }
            self.meter.charge(SpaceCategory::Counters, 2 * counter_words as i64);
            self.report.peak_counter_words = self.report.peak_counter_words.max(counter_words);
            let mut used = vec![0u32; size * fan];
            let mut avail = vec![0u32; size * fan];
            let mut dconf = vec![0u32; size];
            {
                let (local, props, coloring) = (&self.local, &props, &self.coloring);
                self.feed.run_tokens(|tok| {
                    match tok {
                        StreamToken::Edge(e) => {
                            let (lu, lv) = (local[e.u() as usize], local[e.v() as usize]);
                            match (lu != NOT_LOCAL, lv != NOT_LOCAL) {
                                (true, true) => {
                                    if props.class[lu as usize] == props.class[lv as usize] {
                                        dconf[lu as usize] += 1;
                                        dconf[lv as usize] += 1;
                                    }
                                }
                                (true, false) | (false, true) => {
                                    let (lx, y) =
                                        if lu != NOT_LOCAL { (lu as usize, e.v()) } else { (lv as usize, e.u()) };
                                    let c = coloring.get(y).expect("vertices outside U are colored");
                                    if props.contains(lx, c) {
                                        used[lx * fan + q.part(c) as usize] += 1;
                                    }
                                }
                                (false, false) => {}
                            }
                        }
                        StreamToken::List { vertex, colors } => {
                            let lx = local[*vertex as usize];
                            if lx != NOT_LOCAL {
                                for c in effective_list(colors, cap) {
                                    if props.contains(lx as usize, c) {
                                        avail[lx as usize * fan + q.part(c) as usize] += 1;
                                    }
                                }
                            }
                        }
                    }
                    Ok(())
                })?;
            }
            let mut children = ChildSlacks::new();
            let mut potential = 0.0;
            let mut min_slack = u64::MAX;
            for lx in 0..size {
                let row = lx * fan..(lx + 1) * fan;
                let a: u64 = avail[row.clone()].iter().map(|&v| v as u64).sum();
                let u: u64 = used[row.clone()].iter().map(|&v| v as u64).sum();
                let sx = a.saturating_sub(u);
                if t > 0 && sx != slack[lx] {
                    return theory(format!("slack of #{lx} drifted from {} to {sx}", slack[lx]));
                }
                if sx == 0 {
                    return theory(format!("vertex {} has zero slack", self.uncolored[lx]));
                }
                slack[lx] = sx;
                min_slack = min_slack.min(sx);
                potential += dconf[lx] as f64 / sx as f64;
                children.push_vertex(
                    row.map(|i| ((i - lx * fan) as u64, (avail[i] as u64).saturating_sub(used[i] as u64))),
                );
            }
            if t == 0 && potential > size as f64 * (1.0 + 1e-9) {
                return theory(format!("initial potential {potential} exceeds |U| = {size}"));
            }
            if let Some(prev) = last_edge_potential {
                check_same(prev, potential, "potential forms")?;
            }
            let sampler = GwSampler::build(&children, self.prime, 1.0 + self.eps)?;
            drop(children);
            let choice_h = {
                let (local, class) = (&self.local, &props.class);
                select_refinement(&mut self.feed, &sampler, self.eps, &mut self.meter, |e| {
                    conflict(local, class, e)
                })?
            };
            let mut part_of = vec![0u32; size];
            let mut excess_after = 0u128;
            for lx in 0..size {
                let slot = sampler.sample(lx, choice_h.hash.eval(self.uncolored[lx] as u64));
                let j = slot.key;
                part_of[lx] = j as u32;
                props.class[lx] = props.class[lx]
                    .checked_mul(s)
                    .and_then(|c| c.checked_add(j))
                    .ok_or_else(|| Error::Config("proposal class id overflow".into()))?;
                slack[lx] = slot.slack;
                excess_after += avail[lx * fan + j as usize] as u128 - 1;
            }
            props.partitions.push(q);
            props.parts.push(part_of);
            self.meter.charge(SpaceCategory::Counters, size as i64 - 2 * counter_words as i64);
            // Σ(|L ∩ P| - 1) <= 2^{-(t+1)k/2} Δ|U|, squared
            let rhs = ((self.delta * size) as u128).pow(2);
            let shift = (t as u32 + 1) * k;
            let lhs = excess_after
                .checked_pow(2)
                .and_then(|v| if shift >= 128 { (v == 0).then_some(0) } else { v.checked_mul(1u128 << shift) });
            if excess_after > 0 && lhs.is_none_or(|l| l > rhs) {
                return theory(format!("list excess {excess_after} did not shrink after stage {t}"));
            }
            excess = Some(excess_after);
            last_edge_potential = Some(choice_h.potential);
            trace.stages.push(ListStageTrace {
                partition: Some(q),
                partition_cost: choice.cost,
                excess_before: choice.total,
                excess_after,
                potential,
                refined_potential: choice_h.potential,
                min_slack,
                counter_words,
            });
        }

        // singleton stage: record the surviving candidates, then their bits
        let mut cand: Vec<Vec<Color>> = vec![Vec::new(); size];
        {
            let (local, props) = (&self.local, &props);
            self.feed.run_tokens(|tok| {
                if let StreamToken::List { vertex, colors } = tok {
                    let lx = local[*vertex as usize];
                    if lx != NOT_LOCAL {
                        cand[lx as usize] = effective_list(colors, cap)
                            .into_iter()
                            .filter(|&c| props.contains(lx as usize, c))
                            .collect();
                    }
                }
                Ok(())
            })?;
        }
        let words: usize = cand.iter().map(Vec::len).sum();
        if words > 2 * size {
            return theory(format!("{words} surviving candidates exceed 2|U| = {}", 2 * size));
        }
        self.meter.charge(SpaceCategory::Counters, words as i64);
        trace.final_list_words = words;
        let mut free: Vec<Vec<bool>> = cand.iter().map(|c| vec![true; c.len()]).collect();
        let mut used_in_p = vec![0u64; size];
        let mut dconf = vec![0u32; size];
        {
            let (local, props, coloring, cand) = (&self.local, &props, &self.coloring, &cand);
            self.feed.run(|e| {
                let (lu, lv) = (local[e.u() as usize], local[e.v() as usize]);
                match (lu != NOT_LOCAL, lv != NOT_LOCAL) {
                    (true, true) => {
                        if props.class[lu as usize] == props.class[lv as usize] {
                            dconf[lu as usize] += 1;
                            dconf[lv as usize] += 1;
                        }
                    }
                    (true, false) | (false, true) => {
                        let (lx, y) = if lu != NOT_LOCAL { (lu as usize, e.v()) } else { (lv as usize, e.u()) };
                        let c = coloring.get(y).expect("vertices outside U are colored");
                        if props.contains(lx, c) {
                            used_in_p[lx] += 1;
                            if let Ok(i) = cand[lx].binary_search(&c) {
                                free[lx][i] = false;
                            }
                        }
                    }
                    (false, false) => {}
                }
            })?;
        }
        let mut children = ChildSlacks::new();
        let mut potential = 0.0;
        let mut min_slack = u64::MAX;
        for lx in 0..size {
            let sx = (cand[lx].len() as u64).saturating_sub(used_in_p[lx]);
            if stages > 0 && sx != slack[lx] {
                return theory(format!("slack of #{lx} drifted from {} to {sx}", slack[lx]));
            }
            if sx == 0 {
                return theory(format!("vertex {} has zero slack", self.uncolored[lx]));
            }
            min_slack = min_slack.min(sx);
            potential += dconf[lx] as f64 / sx as f64;
            children.push_vertex(cand[lx].iter().zip(&free[lx]).map(|(&c, &f)| (c as u64, f as u64)));
        }
        if let Some(prev) = last_edge_potential {
            check_same(prev, potential, "potential forms")?;
        }
        let sampler = GwSampler::build(&children, self.prime, 1.0 + self.eps)?;
        drop(children);
        let choice_h = {
            let (local, class) = (&self.local, &props.class);
            select_refinement(&mut self.feed, &sampler, self.eps, &mut self.meter, |e| {
                conflict(local, class, e)
            })?
        };
        let mut proposal = vec![0 as Color; size];
        for lx in 0..size {
            let slot = sampler.sample(lx, choice_h.hash.eval(self.uncolored[lx] as u64));
            if slot.slack != 1 {
                return theory("singleton proposal without slack");
            }
            proposal[lx] = slot.key as Color;
        }
        self.meter.charge(SpaceCategory::Counters, -(words as i64));
        trace.stages.push(ListStageTrace {
            partition: None,
            partition_cost: 0,
            excess_before: excess.unwrap_or(0),
            excess_after: 0,
            potential,
            refined_potential: choice_h.potential,
            min_slack,
            counter_words: words as u64,
        });

        // end of epoch: conflicts among equal proposals
        let mut conflicts: Vec<(u32, u32)> = Vec::new();
        {
            let (local, proposal) = (&self.local, &proposal);
            self.feed.run(|e| {
                let (lu, lv) = (local[e.u() as usize], local[e.v() as usize]);
                if lu != NOT_LOCAL && lv != NOT_LOCAL && proposal[lu as usize] == proposal[lv as usize] {
                    conflicts.push((lu, lv));
                }
            })?;
        }
        self.meter.set(SpaceCategory::StoredEdges, 2 * conflicts.len() as u64);
        let final_potential = 2.0 * conflicts.len() as f64;
        check_same(choice_h.potential, final_potential, "conflict counts")?;
        if conflicts.len() > size {
            return theory(format!("{} conflict edges exceed |U| = {size}", conflicts.len()));
        }
        let mut fgraph = AdjacencyGraph::new(size);
        for &(a, b) in &conflicts {
            fgraph.add_edge(Edge::new(a, b)?)?;
        }
        let independent = find_independent_set(&fgraph);
        for &lx in &independent {
            self.coloring.set(self.uncolored[lx as usize], proposal[lx as usize]);
        }
        self.meter.release(SpaceCategory::StoredEdges);
        self.uncolored.retain(|&x| !self.coloring.is_colored(x));
        self.local.fill(NOT_LOCAL);
        for (i, &x) in self.uncolored.iter().enumerate() {
            self.local[x as usize] = i as u32;
        }
        let after = self.uncolored.len();
        if 3 * after > 2 * size {
            return theory(format!("epoch left {after} of {size} vertices uncolored"));
        }
        trace.final_potential = final_potential;
        trace.conflicts = conflicts.len();
        trace.committed = independent.len();
        trace.uncolored_after = after;
        self.report.epochs.push(trace);
        Ok(self.report.epochs.last().unwrap())
    }

    /// Final pass: edges and lists of the remaining vertices, then greedy.
    pub fn finish(mut self) -> Result<(PartialColoring, ListReport)> {
        let size = self.uncolored.len();
        let cap = self.delta + 1;
        let mut adj: Vec<Vec<Vertex>> = vec![Vec::new(); size];
        let mut lists: Vec<Vec<Color>> = vec![Vec::new(); size];
        let mut stored = 0usize;
        {
            let local = &self.local;
            self.feed.run_tokens(|tok| {
                match tok {
                    StreamToken::Edge(e) => {
                        for (x, y) in [(e.u(), e.v()), (e.v(), e.u())] {
                            let lx = local[x as usize];
                            if lx != NOT_LOCAL {
                                adj[lx as usize].push(y);
                                stored += 1;
                            }
                        }
                    }
                    StreamToken::List { vertex, colors } => {
                        let lx = local[*vertex as usize];
                        if lx != NOT_LOCAL {
                            lists[lx as usize] = effective_list(colors, cap);
                            stored += lists[lx as usize].len();
                        }
                    }
                }
                Ok(())
            })?;
        }
        self.meter.set(SpaceCategory::StoredEdges, stored as u64);
        for (lx, &x) in self.uncolored.iter().enumerate() {
            let taken: Vec<Color> = adj[lx].iter().filter_map(|&y| self.coloring.get(y)).collect();
            let c = lists[lx]
                .iter()
                .copied()
                .find(|c| !taken.contains(c))
                .ok_or_else(|| Error::TheoryViolation(format!("list of vertex {x} exhausted")))?;
            self.coloring.set(x, c);
        }
        self.meter.release(SpaceCategory::StoredEdges);
        self.report.final_uncolored = size;
        self.report.passes = self.feed.source.pass_count() - self.start_passes;
        self.report.peak_words = self.meter.peak_words();
        if self.report.passes != self.report.expected_passes() {
            return theory(format!(
                "made {} passes, schedule predicts {}",
                self.report.passes,
                self.report.expected_passes()
            ));
        }
        Ok((self.coloring, self.report))
    }
}

fn conflict(local: &[u32], class: &[u64], e: Edge) -> Option<ConflictEdge> {
    let (lu, lv) = (local[e.u() as usize], local[e.v() as usize]);
    (lu != NOT_LOCAL && lv != NOT_LOCAL && class[lu as usize] == class[lv as usize]).then_some(
        ConflictEdge {
            u: e.u(),
            lu,
            v: e.v(),
            lv,
        },
    )
}

pub fn run(
    source: &MultiPassSource,
    n: usize,
    delta: Option<usize>,
) -> Result<(PartialColoring, ListReport)> {
    let mut colorer = ListColorer::new(source, n, delta)?;
    while colorer.needs_epoch() {
        colorer.run_epoch()?;
    }
    colorer.finish()
}

/// Lists as seen by the algorithm: at most Δ + 1 smallest colors each.
pub fn lists_from_source(source: &MultiPassSource, n: usize, delta: usize) -> Result<Vec<Vec<Color>>> {
    let mut lists = vec![Vec::new(); n];
    for t in source.open_pass()? {
        if let StreamToken::List { vertex, colors } = t {
            lists[*vertex as usize] = effective_list(colors, delta + 1);
        }
    }
    Ok(lists)
}
