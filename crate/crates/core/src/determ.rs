//! Deterministic multipass (Δ+1)-coloring.
//!
//! Colors are `b`-bit values in `[0, Δ]`. Each epoch starts every uncolored
//! vertex with the full cube of proposals and, stage by stage, fixes the next
//! block of low bits using a pseudorandom choice steered by the potential.
//! At the end of the epoch the surviving singleton proposals are committed
//! on an independent set of the conflict graph.

use serde::Serialize;

use crate::derand::{
    argmin, choose_hash, ChildSlacks, ConflictEdge, GwSampler, HashChoice, HashScores, PartSums,
};
use crate::error::{input, theory, Error, Result};
use crate::graph::{
    find_independent_set, prime_in_range, AdjacencyGraph, Color, Edge, PartialColoring, Vertex,
};
use crate::stream::{MultiPassSource, SpaceCategory, SpaceMeter, StreamToken};

/// `log2(max(n, 2))`.
pub fn log_n(n: usize) -> f64 {
    (n.max(2) as f64).log2()
}

/// Relative slack allowed per estimate: `1 / (8 log n)`.
pub fn precision(n: usize) -> f64 {
    1.0 / (8.0 * log_n(n))
}

/// Smallest prime in `[8 n log n, 16 n log n]`.
pub fn hash_prime(n: usize) -> Result<u64> {
    let l = log_n(n);
    let lo = (8.0 * n.max(1) as f64 * l).ceil() as u64;
    let hi = (16.0 * n.max(1) as f64 * l).floor() as u64;
    prime_in_range(lo, hi)
}

/// Bits per color: `ceil(log2(Δ + 1))`.
pub fn color_bits(delta: usize) -> u32 {
    (delta as u64 + 1).next_power_of_two().trailing_zeros()
}

/// Bits fixed per stage: `1 + floor(log2(n / |U|))`.
pub fn stage_bits(n: usize, uncolored: usize) -> u32 {
    assert!(uncolored > 0 && uncolored <= n);
    1 + (n / uncolored).ilog2()
}

/// Widths of the stages of one epoch: `k` each, the last one takes the rest.
pub fn stage_widths(b: u32, k: u32) -> Vec<u32> {
    if b == 0 {
        return vec![];
    }
    let stages = b.div_ceil(k);
    let mut w = vec![k; stages as usize];
    w[stages as usize - 1] = b - k * (stages - 1);
    w
}

/// Colors whose lowest `fixed` bits equal `pattern`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Subcube {
    fixed: u32,
    pattern: u32,
}

impl Subcube {
    pub const FULL: Subcube = Subcube { fixed: 0, pattern: 0 };

    pub fn new(fixed: u32, pattern: u32) -> Self {
        assert!(fixed >= 32 || pattern >> fixed == 0);
        Subcube { fixed, pattern }
    }

    pub fn fixed_count(&self) -> u32 {
        self.fixed
    }

    pub fn pattern(&self) -> u32 {
        self.pattern
    }

    #[inline]
    pub fn contains(&self, c: Color) -> bool {
        c & low_mask(self.fixed) == self.pattern
    }

    /// Fixes the next `width` bits to `j`.
    pub fn child(&self, j: u32, width: u32) -> Subcube {
        Subcube::new(self.fixed + width, self.pattern | (j << self.fixed))
    }

    /// Which child of width `width` contains `c`.
    #[inline]
    pub fn child_index(&self, c: Color, width: u32) -> u32 {
        (c >> self.fixed) & low_mask(width)
    }

    /// Number of members inside `{0,1}^b`.
    pub fn size(&self, b: u32) -> u64 {
        1u64 << (b - self.fixed)
    }

    /// `|P ∩ [0, Δ]|`.
    #[inline]
    pub fn count_up_to(&self, delta: usize) -> u64 {
        let q = self.pattern as u64;
        if q > delta as u64 {
            0
        } else {
            ((delta as u64 - q) >> self.fixed) + 1
        }
    }
}

#[inline]
fn low_mask(bits: u32) -> u32 {
    if bits >= 32 {
        u32::MAX
    } else {
        (1u32 << bits) - 1
    }
}

/// The `2^width` children of `parent` inside `{0,1}^b`.
pub fn subcube_partition(parent: Subcube, b: u32, width: u32) -> Vec<Subcube> {
    assert!(parent.fixed + width <= b);
    (0..1u32 << width).map(|j| parent.child(j, width)).collect()
}

/// `max(0, |T ∩ L| - #{colored neighbors with a color in T})`, counting
/// neighbors with multiplicity.
pub fn slack_wrt(
    in_t: impl Fn(Color) -> bool,
    list: impl IntoIterator<Item = Color>,
    neighbor_colors: impl IntoIterator<Item = Color>,
) -> u64 {
    let avail = list.into_iter().filter(|&c| in_t(c)).count() as i64;
    let used = neighbor_colors.into_iter().filter(|&c| in_t(c)).count() as i64;
    (avail - used).max(0) as u64
}

/// A partially committed coloring held offline, for inspection and tests.
#[derive(Clone, Debug)]
pub struct Pcc {
    pub coloring: PartialColoring,
    /// `Some` exactly on uncolored vertices.
    pub proposals: Vec<Option<Subcube>>,
    pub delta: usize,
}

impl Pcc {
    pub fn trivial(coloring: PartialColoring, delta: usize) -> Self {
        let proposals = coloring
            .as_slice()
            .iter()
            .map(|c| c.is_none().then_some(Subcube::FULL))
            .collect();
        Pcc {
            coloring,
            proposals,
            delta,
        }
    }

    pub fn slack(&self, g: &AdjacencyGraph, x: Vertex) -> u64 {
        let p = self.proposals[x as usize].expect("x is uncolored");
        slack_wrt(
            |c| p.contains(c),
            0..=self.delta as Color,
            g.neighbors(x).iter().filter_map(|&y| self.coloring.get(y)),
        )
    }

    pub fn dconf(&self, g: &AdjacencyGraph, x: Vertex) -> usize {
        let p = self.proposals[x as usize];
        g.neighbors(x)
            .iter()
            .filter(|&&y| p.is_some() && self.proposals[y as usize] == p)
            .count()
    }

    /// Sum over conflicting uncolored edges of `1/s_x + 1/s_y`.
    pub fn potential(&self, g: &AdjacencyGraph) -> Result<f64> {
        let mut phi = 0.0;
        for e in g.edges() {
            let (pu, pv) = (self.proposals[e.u() as usize], self.proposals[e.v() as usize]);
            if pu.is_some() && pu == pv {
                let (su, sv) = (self.slack(g, e.u()), self.slack(g, e.v()));
                if su == 0 || sv == 0 {
                    return theory(format!("zero slack on conflicting edge {e}"));
                }
                phi += 1.0 / su as f64 + 1.0 / sv as f64;
            }
        }
        Ok(phi)
    }

    /// Sum over uncolored `x` of `dconf(x) / s_x`.
    pub fn potential_by_vertex(&self, g: &AdjacencyGraph) -> Result<f64> {
        let mut phi = 0.0;
        for x in 0..g.n() as Vertex {
            if self.proposals[x as usize].is_some() {
                let d = self.dconf(g, x);
                if d > 0 {
                    let s = self.slack(g, x);
                    if s == 0 {
                        return theory(format!("zero slack at conflicting vertex {x}"));
                    }
                    phi += d as f64 / s as f64;
                }
            }
        }
        Ok(phi)
    }
}

/// Streams edges of a source, checking endpoint ranges always and the degree
/// cap during the first pass only.
pub(crate) struct EdgeFeed<'s> {
    pub source: &'s MultiPassSource,
    pub n: usize,
    pub delta: usize,
    pub validated: bool,
}

impl EdgeFeed<'_> {
    pub fn run(&mut self, mut f: impl FnMut(Edge)) -> Result<()> {
        self.run_tokens(|t| {
            if let StreamToken::Edge(e) = t {
                f(*e);
            }
            Ok(())
        })
    }

    pub fn run_tokens(&mut self, mut f: impl FnMut(&StreamToken) -> Result<()>) -> Result<()> {
        let mut degrees = (!self.validated).then(|| vec![0u32; self.n]);
        for t in self.source.open_pass()? {
            if let StreamToken::Edge(e) = t {
                e.check_range(self.n)?;
                if let Some(d) = degrees.as_mut() {
                    d[e.u() as usize] += 1;
                    d[e.v() as usize] += 1;
                }
            }
            f(t)?;
        }
        if let Some(d) = degrees {
            if let Some(x) = d.iter().position(|&d| d as usize > self.delta) {
                return input(format!(
                    "vertex {x} has degree {} above the declared maximum {}",
                    d[x], self.delta
                ));
            }
            self.validated = true;
        }
        Ok(())
    }
}

/// One pass that returns the maximum degree.
pub fn discover_max_degree(source: &MultiPassSource, n: usize) -> Result<usize> {
    let mut d = vec![0usize; n];
    for t in source.open_pass()? {
        if let StreamToken::Edge(e) = t {
            e.check_range(n)?;
            d[e.u() as usize] += 1;
            d[e.v() as usize] += 1;
        }
    }
    Ok(d.into_iter().max().unwrap_or(0))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StageTrace {
    pub width: u32,
    /// Potential at the start of the stage, from the vertex form.
    pub potential: f64,
    pub min_slack: u64,
    pub counter_words: u64,
    pub hash: (u64, u64),
    /// Potential of the chosen refinement, from the edge form.
    pub refined_potential: f64,
    pub mean_potential: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EpochTrace {
    pub uncolored: usize,
    pub k: u32,
    pub stages: Vec<StageTrace>,
    pub final_potential: f64,
    pub final_min_slack: u64,
    pub conflicts: usize,
    pub committed: usize,
    pub uncolored_after: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DetermReport {
    pub n: usize,
    pub delta: usize,
    pub bits: u32,
    pub prime: u64,
    /// Passes made by the coloring itself.
    pub passes: usize,
    /// Whether one extra pass was spent discovering Δ.
    pub discovery_pass: bool,
    pub epochs: Vec<EpochTrace>,
    pub final_uncolored: usize,
    pub final_edges: usize,
    pub peak_words: u64,
    pub peak_counter_words: u64,
}

impl DetermReport {
    /// `1 + sum over epochs of (3 * stages + 1)`.
    pub fn expected_passes(&self) -> usize {
        1 + self.epochs.iter().map(|e| 3 * e.stages.len() + 1).sum::<usize>()
    }
}

pub struct DeterministicColorer<'s> {
    feed: EdgeFeed<'s>,
    n: usize,
    delta: usize,
    bits: u32,
    prime: u64,
    eps: f64,
    coloring: PartialColoring,
    uncolored: Vec<Vertex>,
    local: Vec<u32>,
    meter: SpaceMeter,
    report: DetermReport,
    start_passes: usize,
}

const NOT_LOCAL: u32 = u32::MAX;

impl<'s> DeterministicColorer<'s> {
    /// With `delta = None` one extra pass discovers the maximum degree.
    pub fn new(source: &'s MultiPassSource, n: usize, delta: Option<usize>) -> Result<Self> {
        let (delta, discovery) = match delta {
            Some(d) => (d, false),
            None => (discover_max_degree(source, n)?, true),
        };
        let mut meter = SpaceMeter::new(n);
        meter.set(SpaceCategory::Coloring, n as u64);
        let prime = hash_prime(n)?;
        Ok(DeterministicColorer {
            feed: EdgeFeed {
                source,
                n,
                delta,
                validated: false,
            },
            n,
            delta,
            bits: color_bits(delta),
            prime,
            eps: precision(n),
            coloring: PartialColoring::uncolored(n),
            uncolored: (0..n as Vertex).collect(),
            local: (0..n as u32).collect(),
            meter,
            report: DetermReport {
                n,
                delta,
                bits: color_bits(delta),
                prime,
                discovery_pass: discovery,
                ..Default::default()
            },
            start_passes: source.pass_count(),
        })
    }

    pub fn coloring(&self) -> &PartialColoring {
        &self.coloring
    }

    pub fn uncolored(&self) -> &[Vertex] {
        &self.uncolored
    }

    pub fn report(&self) -> &DetermReport {
        &self.report
    }

    pub fn meter(&self) -> &SpaceMeter {
        &self.meter
    }

    /// Whether the epoch loop continues: at least one epoch, then until
    /// `|U| Δ <= n`.
    pub fn needs_epoch(&self) -> bool {
        !self.uncolored.is_empty()
            && (self.report.epochs.is_empty() || self.uncolored.len() * self.delta > self.n)
    }

    fn passes_so_far(&self) -> usize {
        self.feed.source.pass_count() - self.start_passes
    }

    pub fn run_epoch(&mut self) -> Result<&EpochTrace> {
        let size = self.uncolored.len();
        let k = stage_bits(self.n, size);
        let mut trace = EpochTrace {
            uncolored: size,
            k,
            ..Default::default()
        };
        let mut pattern = vec![0u32; size];
        let mut fixed = 0u32;
        // slack of each proposal; only read after a stage has set it
        let mut slack = vec![self.delta as u64 + 1; size];
        let mut last_edge_potential: Option<f64> = None;
        self.meter.set(SpaceCategory::Counters, 3 * size as u64);

        for (stage, width) in stage_widths(self.bits, k).into_iter().enumerate() {
            let st = self.run_stage(&mut pattern, &mut slack, fixed, width, stage == 0)?;
            if let Some(prev) = last_edge_potential {
                check_same(prev, st.potential, "vertex and edge forms of the potential")?;
            }
            last_edge_potential = Some(st.refined_potential);
            fixed += width;
            trace.stages.push(st);
        }
        if let Some(first) = trace.stages.first() {
            if first.potential > size as f64 * (1.0 + 1e-9) {
                return theory(format!(
                    "initial potential {} exceeds |U| = {size}",
                    first.potential
                ));
            }
        }

        // end-of-epoch pass: collect edges whose endpoints propose the same color
        let mut conflicts: Vec<(u32, u32)> = Vec::new();
        {
            let local = &self.local;
            let pattern = &pattern;
            self.feed.run(|e| {
                let (lu, lv) = (local[e.u() as usize], local[e.v() as usize]);
                if lu != NOT_LOCAL && lv != NOT_LOCAL && pattern[lu as usize] == pattern[lv as usize] {
                    conflicts.push((lu, lv));
                }
            })?;
        }
        self.meter.set(SpaceCategory::StoredEdges, 2 * conflicts.len() as u64);
        let min_slack = slack.iter().copied().min().unwrap_or(1);
        if slack.iter().any(|&s| s != 1) {
            return theory(format!(
                "slack after the last stage must be exactly 1 (min {min_slack}, max {})",
                slack.iter().max().unwrap()
            ));
        }
        let final_potential = 2.0 * conflicts.len() as f64;
        if let Some(prev) = last_edge_potential {
            check_same(prev, final_potential, "final potential")?;
        }
        if conflicts.len() > size {
            return theory(format!("{} conflict edges exceed |U| = {size}", conflicts.len()));
        }
        if final_potential > 2.0 * size as f64 {
            return theory(format!("final potential {final_potential} exceeds 2|U|"));
        }

        let mut fgraph = AdjacencyGraph::new(size);
        for &(a, b) in &conflicts {
            fgraph.add_edge(Edge::new(a, b)?)?;
        }
        let independent = find_independent_set(&fgraph);
        for &lx in &independent {
            let c = pattern[lx as usize];
            if c as usize > self.delta {
                return theory(format!("committed color {c} outside the palette"));
            }
            self.coloring.set(self.uncolored[lx as usize], c);
        }
        self.meter.release(SpaceCategory::StoredEdges);
        self.reindex();
        let after = self.uncolored.len();
        if 3 * after > 2 * size {
            return theory(format!("epoch left {after} of {size} vertices uncolored"));
        }
        trace.final_potential = final_potential;
        trace.final_min_slack = min_slack;
        trace.conflicts = conflicts.len();
        trace.committed = independent.len();
        trace.uncolored_after = after;
        self.report.epochs.push(trace);
        Ok(self.report.epochs.last().unwrap())
    }

    fn reindex(&mut self) {
        self.uncolored.retain(|&x| !self.coloring.is_colored(x));
        self.local.fill(NOT_LOCAL);
        for (i, &x) in self.uncolored.iter().enumerate() {
            self.local[x as usize] = i as u32;
        }
    }

    fn run_stage(
        &mut self,
        pattern: &mut [u32],
        slack: &mut [u64],
        fixed: u32,
        width: u32,
        first: bool,
    ) -> Result<StageTrace> {
        let size = pattern.len();
        let fan = 1usize << width;
        let counter_words = (size * fan) as u64;
        if counter_words > 2 * self.n as u64 {
            return theory(format!("{counter_words} slack counters exceed 2n"));
        }
        self.meter.charge(SpaceCategory::Counters, counter_words as i64);
        self.report.peak_counter_words = self.report.peak_counter_words.max(counter_words);

        // pass 1: colored-neighbor counts per child, conflict degrees
        let mut used = vec![0u32; size * fan];
        let mut dconf = vec![0u32; size];
        {
            let (local, coloring, pat) = (&self.local, &self.coloring, &*pattern);
            let low = low_mask(fixed);
            self.feed.run(|e| {
                let (lu, lv) = (local[e.u() as usize], local[e.v() as usize]);
                match (lu != NOT_LOCAL, lv != NOT_LOCAL) {
                    (true, true) => {
                        if pat[lu as usize] == pat[lv as usize] {
                            dconf[lu as usize] += 1;
                            dconf[lv as usize] += 1;
                        }
                    }
                    (true, false) | (false, true) => {
                        let (lx, y) = if lu != NOT_LOCAL { (lu, e.v()) } else { (lv, e.u()) };
                        let c = coloring.get(y).expect("vertices outside U are colored");
                        if c & low == pat[lx as usize] {
                            let j = (c >> fixed) & low_mask(width);
                            used[lx as usize * fan + j as usize] += 1;
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
            let cube = Subcube::new(fixed, pattern[lx]);
            let mut avail_total = 0u64;
            let mut used_total = 0u64;
            let kids = (0..fan as u32).map(|j| {
                let avail = cube.child(j, width).count_up_to(self.delta);
                let u = used[lx * fan + j as usize] as u64;
                avail_total += avail;
                used_total += u;
                (j as u64, avail.saturating_sub(u))
            });
            let kids: Vec<_> = kids.collect();
            let s = avail_total.saturating_sub(used_total);
            if !first && s != slack[lx] {
                return theory(format!("slack of #{lx} drifted from {} to {s}", slack[lx]));
            }
            slack[lx] = s;
            if s == 0 {
                return theory(format!("vertex {} has zero slack", self.uncolored[lx]));
            }
            min_slack = min_slack.min(s);
            potential += dconf[lx] as f64 / s as f64;
            children.push_vertex(kids);
        }
        drop(used);

        let sampler = GwSampler::build(&children, self.prime, 1.0 + self.eps)?;
        drop(children);
        self.meter.charge(SpaceCategory::Counters, sampler.words() as i64);
        self.meter.set(SpaceCategory::HashDescriptions, 2);

        let choice = {
            let (local, pat) = (&self.local, &*pattern);
            select_refinement(&mut self.feed, &sampler, self.eps, &mut self.meter, |e| {
                let (lu, lv) = (local[e.u() as usize], local[e.v() as usize]);
                (lu != NOT_LOCAL && lv != NOT_LOCAL && pat[lu as usize] == pat[lv as usize])
                    .then_some(ConflictEdge { u: e.u(), lu, v: e.v(), lv })
            })?
        };

        for lx in 0..size {
            let r = choice.hash.eval(self.uncolored[lx] as u64);
            let slot = sampler.sample(lx, r);
            pattern[lx] |= (slot.key as u32) << fixed;
            slack[lx] = slot.slack;
        }
        self.meter.charge(SpaceCategory::Counters, -((counter_words + sampler.words()) as i64));

        Ok(StageTrace {
            width,
            potential,
            min_slack,
            counter_words,
            hash: (choice.hash.a, choice.hash.b),
            refined_potential: choice.potential,
            mean_potential: choice.mean,
        })
    }

    /// Final pass: collects the edges at the remaining uncolored vertices and
    /// completes the coloring greedily.
    pub fn finish(mut self) -> Result<(PartialColoring, DetermReport)> {
        let mut adj: Vec<Vec<Vertex>> = vec![Vec::new(); self.uncolored.len()];
        let mut stored = 0usize;
        {
            let local = &self.local;
            self.feed.run(|e| {
                for (x, y) in [(e.u(), e.v()), (e.v(), e.u())] {
                    let lx = local[x as usize];
                    if lx != NOT_LOCAL {
                        adj[lx as usize].push(y);
                        stored += 1;
                    }
                }
            })?;
        }
        self.meter.set(SpaceCategory::StoredEdges, stored as u64);
        let mut taken = vec![false; self.delta + 1];
        for (lx, &x) in self.uncolored.iter().enumerate() {
            taken.fill(false);
            for &y in &adj[lx] {
                if let Some(c) = self.coloring.get(y) {
                    if (c as usize) <= self.delta {
                        taken[c as usize] = true;
                    }
                }
            }
            let c = taken.iter().position(|t| !t).ok_or_else(|| {
                Error::TheoryViolation(format!("no free color for vertex {x}"))
            })?;
            self.coloring.set(x, c as Color);
        }
        self.meter.release(SpaceCategory::StoredEdges);
        self.report.final_uncolored = self.uncolored.len();
        self.report.final_edges = stored;
        self.report.passes = self.passes_so_far();
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

/// Passes two and three: picks the part `{a z + b : b}` with the least total
/// potential, then its best member.
pub(crate) fn select_refinement(
    feed: &mut EdgeFeed<'_>,
    sampler: &GwSampler,
    eps: f64,
    meter: &mut SpaceMeter,
    conflict: impl Fn(Edge) -> Option<ConflictEdge>,
) -> Result<HashChoice> {
    let mut parts = PartSums::new(sampler);
    feed.run(|e| {
        if let Some(ce) = conflict(e) {
            parts.add(ce);
        }
    })?;
    meter.set(SpaceCategory::Accumulators, parts.words());
    let part_sums = parts.finish();
    let a = argmin(&part_sums) as u64;

    let mut scores = HashScores::new(sampler, a);
    feed.run(|e| {
        if let Some(ce) = conflict(e) {
            scores.add(ce);
        }
    })?;
    let scores = scores.finish();
    meter.release(SpaceCategory::Accumulators);
    choose_hash(sampler.p(), &part_sums, a, &scores, eps)
}

pub(crate) fn check_same(a: f64, b: f64, what: &str) -> Result<()> {
    if (a - b).abs() > 1e-7 * (1.0 + a.abs().max(b.abs())) {
        return theory(format!("{what} disagree: {a} vs {b}"));
    }
    Ok(())
}

/// Runs the whole algorithm: epochs, then the final greedy completion.
pub fn run(
    source: &MultiPassSource,
    n: usize,
    delta: Option<usize>,
) -> Result<(PartialColoring, DetermReport)> {
    let mut colorer = DeterministicColorer::new(source, n, delta)?;
    while colorer.needs_epoch() {
        colorer.run_epoch()?;
    }
    colorer.finish()
}
