//! Adaptive adversary game: the adversary inserts edges and asks for
//! colorings, seeing every output; a referee keeps the whole graph, checks
//! each answer and enforces the degree and length caps.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{AdjacencyGraph, Color, Edge, Vertex};
use crate::hashing::{splitmix64, KeyedHash};

/// A single-pass colorer that can be asked for a full coloring at any time.
pub trait StreamColorer {
    fn process(&mut self, e: Edge) -> Result<()>;

    fn query(&mut self) -> Result<Vec<Color>>;

    /// Number of color ids the algorithm may use.
    fn palette_size(&self) -> u64;

    fn stored_edges(&self) -> usize;

    /// Checks against the whole graph, run by the referee after each query.
    fn audit(&self, _graph: &[Edge]) -> Result<()> {
        Ok(())
    }

    fn stats(&self) -> Vec<(&'static str, u64)> {
        Vec::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Insert(Edge),
    Query,
    Stop,
}

/// What the adversary may look at: the graph so far and past outputs.
pub struct View<'a> {
    pub n: usize,
    pub delta: usize,
    pub max_inserts: usize,
    pub inserts: usize,
    pub inserts_since_query: usize,
    pub graph: &'a AdjacencyGraph,
    pub last_output: Option<&'a [Color]>,
}

impl View<'_> {
    fn open(&self, x: Vertex) -> bool {
        self.graph.degree(x) < self.delta
    }

    pub fn is_legal(&self, u: Vertex, v: Vertex) -> bool {
        u != v
            && (u as usize) < self.n
            && (v as usize) < self.n
            && self.open(u)
            && self.open(v)
            && !self.graph.has_edge(u, v)
    }

    pub fn at_length_cap(&self) -> bool {
        self.inserts >= self.max_inserts
    }

    /// A uniformly random legal non-edge, if any.
    pub fn random_legal_pair<R: Rng>(&self, rng: &mut R) -> Option<Edge> {
        let open: Vec<Vertex> = (0..self.n as Vertex).filter(|&x| self.open(x)).collect();
        if open.len() < 2 {
            return None;
        }
        for _ in 0..64 {
            let u = *open.choose(rng).unwrap();
            let v = *open.choose(rng).unwrap();
            if self.is_legal(u, v) {
                return Some(Edge::new(u, v).expect("distinct"));
            }
        }
        // scan endpoints in random order for any open non-neighbor
        let mut order = open.clone();
        order.shuffle(rng);
        let mut adjacent = vec![false; self.n];
        for &u in &order {
            for &y in self.graph.neighbors(u) {
                adjacent[y as usize] = true;
            }
            let partners: Vec<Vertex> =
                open.iter().copied().filter(|&v| v != u && !adjacent[v as usize]).collect();
            if let Some(&v) = partners.choose(rng) {
                return Some(Edge::new(u, v).expect("distinct"));
            }
            for &y in self.graph.neighbors(u) {
                adjacent[y as usize] = false;
            }
        }
        None
    }
}

/// Colors larger than this are grouped by sorting instead of by index.
const INDEXED_COLORS: usize = 1 << 24;

/// Buckets vertices by color with an array indexed by color, reset lazily
/// through a per-call stamp.
#[derive(Clone, Debug, Default)]
struct ColorBuckets {
    stamp: Vec<u32>,
    head: Vec<u32>,
    next: Vec<u32>,
    current: u32,
    used: Vec<Color>,
}

const NIL: u32 = u32::MAX;

impl ColorBuckets {
    /// Groups `members` by `out[x]`; returns false when a color is too large
    /// to index.
    fn fill(&mut self, out: &[Color], members: impl Iterator<Item = Vertex>) -> bool {
        self.used.clear();
        self.current = self.current.wrapping_add(1);
        if self.current == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.current = 1;
        }
        if self.next.len() < out.len() {
            self.next.resize(out.len(), NIL);
        }
        for x in members {
            let c = out[x as usize] as usize;
            if c >= INDEXED_COLORS {
                return false;
            }
            if c >= self.stamp.len() {
                self.stamp.resize(c + 1, 0);
                self.head.resize(c + 1, NIL);
            }
            if self.stamp[c] != self.current {
                self.stamp[c] = self.current;
                self.head[c] = NIL;
                self.used.push(c as Color);
            }
            self.next[x as usize] = self.head[c];
            self.head[c] = x;
        }
        true
    }

    fn members(&self, c: Color) -> impl Iterator<Item = Vertex> + '_ {
        let mut x = self.head[c as usize];
        std::iter::from_fn(move || {
            (x != NIL).then(|| {
                let v = x;
                x = self.next[v as usize];
                v
            })
        })
    }
}

pub trait Adversary {
    fn next_action(&mut self, view: &View<'_>) -> Action;
}

pub struct StopAdversary;

impl Adversary for StopAdversary {
    fn next_action(&mut self, _view: &View<'_>) -> Action {
        Action::Stop
    }
}

/// Random legal inserts that ignore the outputs.
pub struct ObliviousRandom {
    rng: ChaCha8Rng,
    query_every: usize,
}

impl ObliviousRandom {
    pub fn new(seed: u64, query_every: usize) -> Self {
        ObliviousRandom {
            rng: ChaCha8Rng::seed_from_u64(seed),
            query_every: query_every.max(1),
        }
    }
}

impl Adversary for ObliviousRandom {
    fn next_action(&mut self, view: &View<'_>) -> Action {
        if view.inserts_since_query >= self.query_every {
            return Action::Query;
        }
        if view.at_length_cap() {
            return Action::Stop;
        }
        view.random_legal_pair(&mut self.rng).map_or(Action::Stop, Action::Insert)
    }
}

/// Queries every `q` inserts and connects two vertices that shared a color
/// in the last output, falling back to a random legal pair.
pub struct ConflictSeeker {
    rng: ChaCha8Rng,
    query_every: usize,
    started: bool,
    buckets: ColorBuckets,
    pairs: Vec<Edge>,
}

impl ConflictSeeker {
    pub fn new(seed: u64, query_every: usize) -> Self {
        ConflictSeeker {
            rng: ChaCha8Rng::seed_from_u64(seed),
            query_every: query_every.max(1),
            started: false,
            buckets: ColorBuckets::default(),
            pairs: Vec::new(),
        }
    }
}

impl Adversary for ConflictSeeker {
    fn next_action(&mut self, view: &View<'_>) -> Action {
        if !self.started || view.inserts_since_query >= self.query_every {
            self.started = true;
            return Action::Query;
        }
        if view.at_length_cap() {
            return Action::Stop;
        }
        if let Some(out) = view.last_output {
            self.pairs.clear();
            let open = (0..view.n as Vertex).filter(|&x| view.open(x));
            if self.buckets.fill(out, open.clone()) {
                let mut group = Vec::new();
                for &c in &self.buckets.used {
                    group.clear();
                    group.extend(self.buckets.members(c));
                    push_free_pairs(view, &group, &mut self.pairs);
                }
            } else {
                let mut by_color: Vec<(Color, Vertex)> = open.map(|x| (out[x as usize], x)).collect();
                by_color.sort_unstable();
                for group in by_color.chunk_by(|a, b| a.0 == b.0) {
                    let group: Vec<Vertex> = group.iter().map(|&(_, x)| x).collect();
                    push_free_pairs(view, &group, &mut self.pairs);
                }
            }
            if let Some(&e) = self.pairs.choose(&mut self.rng) {
                return Action::Insert(e);
            }
        }
        view.random_legal_pair(&mut self.rng).map_or(Action::Stop, Action::Insert)
    }
}

fn push_free_pairs(view: &View<'_>, group: &[Vertex], pairs: &mut Vec<Edge>) {
    for (i, &u) in group.iter().enumerate() {
        for &v in &group[i + 1..] {
            if !view.graph.has_edge(u, v) {
                pairs.push(Edge::new(u, v).expect("distinct"));
            }
        }
    }
}

/// Replays a fixed action list.
pub struct Scripted {
    actions: std::vec::IntoIter<Action>,
}

impl Scripted {
    pub fn new(actions: Vec<Action>) -> Self {
        Scripted {
            actions: actions.into_iter(),
        }
    }
}

impl Adversary for Scripted {
    fn next_action(&mut self, _view: &View<'_>) -> Action {
        self.actions.next().unwrap_or(Action::Stop)
    }
}

/// Non-robust foil: one fixed block map `V -> [Δ²]`, every block-internal
/// edge kept forever, blocks greedily colored on fresh palettes. Outputs
/// reveal the blocks, so an adaptive adversary can aim at stored pairs.
pub struct NaiveBaseline {
    n: usize,
    delta: usize,
    block: KeyedHash,
    degree: Vec<u32>,
    stored: Vec<Edge>,
}

impl NaiveBaseline {
    pub fn new(n: usize, delta: usize, seed: u64) -> Self {
        let range = (delta as u64 * delta as u64).max(1);
        NaiveBaseline {
            n,
            delta,
            block: KeyedHash::new(ChaCha8Rng::seed_from_u64(seed).gen(), range),
            degree: vec![0; n],
            stored: Vec::new(),
        }
    }
}

impl StreamColorer for NaiveBaseline {
    fn process(&mut self, e: Edge) -> Result<()> {
        e.check_range(self.n)?;
        let (u, v) = (e.u() as usize, e.v() as usize);
        if self.degree[u] as usize >= self.delta || self.degree[v] as usize >= self.delta {
            return Err(Error::Input(format!("edge {e} exceeds the degree cap {}", self.delta)));
        }
        self.degree[u] += 1;
        self.degree[v] += 1;
        if self.block.eval(e.u()) == self.block.eval(e.v()) {
            self.stored.push(e);
        }
        Ok(())
    }

    fn query(&mut self) -> Result<Vec<Color>> {
        let local = crate::graph::greedy_by_id(self.n, &self.stored);
        let width = self.delta as u64 + 1;
        Ok((0..self.n as Vertex)
            .map(|x| (self.block.eval(x) * width + local[x as usize] as u64) as Color)
            .collect())
    }

    fn palette_size(&self) -> u64 {
        self.block.range() * (self.delta as u64 + 1)
    }

    fn stored_edges(&self) -> usize {
        self.stored.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Colored {
        violations: usize,
        colors: usize,
        max_color: Color,
        digest: u64,
    },
    QueryFail,
    PaletteOverflow,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub action: Action,
    pub verdict: Option<Verdict>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub entries: Vec<Entry>,
}

impl Transcript {
    pub fn actions(&self) -> Vec<Action> {
        self.entries.iter().map(|e| e.action).collect()
    }
}

impl fmt::Display for Transcript {
    /// `E u v` and `Q` lines; query verdicts follow as comments.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            match (e.action, e.verdict) {
                (Action::Insert(edge), _) => writeln!(f, "E {} {}", edge.u(), edge.v())?,
                (Action::Query, Some(Verdict::Colored { violations, colors, max_color, digest })) => writeln!(
                    f,
                    "Q # violations={violations} colors={colors} max_color={max_color} digest={digest:016x}"
                )?,
                (Action::Query, Some(Verdict::QueryFail)) => writeln!(f, "Q # query-fail")?,
                (Action::Query, Some(Verdict::PaletteOverflow)) => writeln!(f, "Q # palette-overflow")?,
                (Action::Query, None) => writeln!(f, "Q")?,
                (Action::Stop, _) => {}
            }
        }
        Ok(())
    }
}

/// Reads `E u v`, bare `u v` and `Q` lines; `#` starts a comment.
pub fn parse_actions(text: &str) -> Result<Vec<Action>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let ends = match fields.as_slice() {
            ["Q"] => {
                out.push(Action::Query);
                continue;
            }
            ["E", u, v] | [u, v] => (*u, *v),
            _ => return Err(parse_err(format!("unrecognized line `{line}`"))),
        };
        let num = |s: &str| s.parse::<Vertex>().map_err(|_| parse_err(format!("bad vertex `{s}`")));
        let e = Edge::new(num(ends.0)?, num(ends.1)?).map_err(|err| parse_err(err.to_string()))?;
        out.push(Action::Insert(e));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GameConfig {
    pub n: usize,
    pub delta: usize,
    pub max_inserts: usize,
}

impl GameConfig {
    /// Length cap `nΔ/2`.
    pub fn new(n: usize, delta: usize) -> Self {
        GameConfig {
            n,
            delta,
            max_inserts: n * delta / 2,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GameResult {
    pub inserts: usize,
    pub queries: usize,
    /// Queries whose output had a monochromatic edge.
    pub violations: usize,
    pub violating_edges: usize,
    pub palette_used: usize,
    pub max_color: Option<Color>,
    pub palette_size: u64,
    pub out_of_palette: usize,
    pub query_fails: usize,
    pub palette_overflows: usize,
    pub audit_failures: usize,
    pub first_audit_failure: Option<String>,
    pub peak_stored_edges: usize,
    pub stats: BTreeMap<String, u64>,
}

pub struct GameOutcome {
    pub result: GameResult,
    pub transcript: Transcript,
}

fn digest(colors: &[Color]) -> u64 {
    colors
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |h, &c| splitmix64(h ^ c as u64))
}

/// Plays until the adversary stops. An illegal insert aborts the game with
/// [`Error::Adversary`].
pub fn run_game(
    alg: &mut dyn StreamColorer,
    adversary: &mut dyn Adversary,
    cfg: GameConfig,
) -> Result<GameOutcome> {
    let mut graph = AdjacencyGraph::new(cfg.n);
    let mut edges: Vec<Edge> = Vec::new();
    let mut last_output: Option<Vec<Color>> = None;
    let mut since_query = 0;
    let mut result = GameResult {
        palette_size: alg.palette_size(),
        peak_stored_edges: alg.stored_edges(),
        ..Default::default()
    };
    let mut transcript = Transcript::default();
    let mut buckets = ColorBuckets::default();
    loop {
        let action = adversary.next_action(&View {
            n: cfg.n,
            delta: cfg.delta,
            max_inserts: cfg.max_inserts,
            inserts: edges.len(),
            inserts_since_query: since_query,
            graph: &graph,
            last_output: last_output.as_deref(),
        });
        let mut verdict = None;
        match action {
            Action::Stop => break,
            Action::Insert(e) => {
                let (u, v) = (e.u(), e.v());
                if edges.len() >= cfg.max_inserts {
                    return Err(Error::Adversary(format!("insert {e} beyond the length cap")));
                }
                if (v as usize) >= cfg.n {
                    return Err(Error::Adversary(format!("edge {e} outside the vertex range")));
                }
                if graph.has_edge(u, v) {
                    return Err(Error::Adversary(format!("edge {e} inserted twice")));
                }
                if graph.degree(u) >= cfg.delta || graph.degree(v) >= cfg.delta {
                    return Err(Error::Adversary(format!("edge {e} breaks the degree cap")));
                }
                graph.add_edge(e)?;
                edges.push(e);
                since_query += 1;
                alg.process(e)?;
                result.inserts += 1;
                result.peak_stored_edges = result.peak_stored_edges.max(alg.stored_edges());
            }
            Action::Query => {
                since_query = 0;
                result.queries += 1;
                match alg.query() {
                    Ok(colors) => {
                        if colors.len() != cfg.n {
                            return Err(Error::TheoryViolation(format!(
                                "query returned {} colors for {} vertices",
                                colors.len(),
                                cfg.n
                            )));
                        }
                        let bad = edges
                            .iter()
                            .filter(|e| colors[e.u() as usize] == colors[e.v() as usize])
                            .count();
                        if bad > 0 {
                            result.violations += 1;
                            result.violating_edges += bad;
                        }
                        let distinct = if buckets.fill(&colors, 0..cfg.n as Vertex) {
                            buckets.used.len()
                        } else {
                            let mut sorted = colors.clone();
                            sorted.sort_unstable();
                            sorted.dedup();
                            sorted.len()
                        };
                        let max_color = colors.iter().copied().max().unwrap_or(0);
                        result.palette_used = result.palette_used.max(distinct);
                        result.max_color = result.max_color.max(Some(max_color));
                        result.out_of_palette +=
                            colors.iter().filter(|&&c| c as u64 >= result.palette_size).count();
                        if let Err(e) = alg.audit(&edges) {
                            result.audit_failures += 1;
                            result.first_audit_failure.get_or_insert(e.to_string());
                        }
                        verdict = Some(Verdict::Colored {
                            violations: bad,
                            colors: distinct,
                            max_color,
                            digest: digest(&colors),
                        });
                        last_output = Some(colors);
                    }
                    Err(Error::QueryFail(_)) => {
                        result.query_fails += 1;
                        verdict = Some(Verdict::QueryFail);
                    }
                    Err(Error::PaletteOverflow(_)) => {
                        result.palette_overflows += 1;
                        verdict = Some(Verdict::PaletteOverflow);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        transcript.entries.push(Entry { action, verdict });
    }
    result.stats = alg.stats().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    Ok(GameOutcome { result, transcript })
}

/// Flat `key=value` lines for a game result.
pub fn render_result(r: &GameResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "inserts={}", r.inserts);
    let _ = writeln!(s, "queries={}", r.queries);
    let _ = writeln!(s, "violations={}", r.violations);
    let _ = writeln!(s, "violating_edges={}", r.violating_edges);
    let _ = writeln!(s, "palette_used={}", r.palette_used);
    let _ = writeln!(s, "palette_size={}", r.palette_size);
    let _ = writeln!(s, "out_of_palette={}", r.out_of_palette);
    let _ = writeln!(s, "query_fails={}", r.query_fails);
    let _ = writeln!(s, "palette_overflows={}", r.palette_overflows);
    let _ = writeln!(s, "audit_failures={}", r.audit_failures);
    let _ = writeln!(s, "peak_stored_edges={}", r.peak_stored_edges);
    for (k, v) in &r.stats {
        let _ = writeln!(s, "stat.{k}={v}");
    }
    s
}

/// Per-trial seeds for the algorithm and the adversary, derived from one
/// campaign seed.
pub fn trial_seeds(seed: u64, trial: usize) -> (u64, u64) {
    let base = splitmix64(seed ^ splitmix64(trial as u64));
    (splitmix64(base ^ 1), splitmix64(base ^ 2))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CampaignSummary {
    pub trials: usize,
    pub seed: u64,
    pub query_every: usize,
    pub games: Vec<GameResult>,
}

impl CampaignSummary {
    pub fn violations(&self) -> usize {
        self.games.iter().map(|g| g.violations).sum()
    }

    pub fn query_fails(&self) -> usize {
        self.games.iter().map(|g| g.query_fails).sum()
    }

    pub fn palette_overflows(&self) -> usize {
        self.games.iter().map(|g| g.palette_overflows).sum()
    }

    pub fn audit_failures(&self) -> usize {
        self.games.iter().map(|g| g.audit_failures).sum()
    }

    pub fn out_of_palette(&self) -> usize {
        self.games.iter().map(|g| g.out_of_palette).sum()
    }

    pub fn max_stored_edges(&self) -> usize {
        self.games.iter().map(|g| g.peak_stored_edges).max().unwrap_or(0)
    }

    pub fn max_palette_used(&self) -> usize {
        self.games.iter().map(|g| g.palette_used).max().unwrap_or(0)
    }

    pub fn max_stat(&self, key: &str) -> u64 {
        self.games
            .iter()
            .filter_map(|g| g.stats.get(key).copied())
            .max()
            .unwrap_or(0)
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
            && self.query_fails() == 0
            && self.palette_overflows() == 0
            && self.audit_failures() == 0
            && self.out_of_palette() == 0
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Flat `key=value` lines: totals, maxima, then one verdict per trial.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "trials={}", self.trials);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "query_every={}", self.query_every);
        let _ = writeln!(s, "violations={}", self.violations());
        let _ = writeln!(s, "query_fails={}", self.query_fails());
        let _ = writeln!(s, "palette_overflows={}", self.palette_overflows());
        let _ = writeln!(s, "audit_failures={}", self.audit_failures());
        let _ = writeln!(s, "out_of_palette={}", self.out_of_palette());
        let _ = writeln!(s, "max_palette_used={}", self.max_palette_used());
        let _ = writeln!(s, "max_stored_edges={}", self.max_stored_edges());
        for (i, g) in self.games.iter().enumerate() {
            let ok = g.violations == 0
                && g.query_fails == 0
                && g.palette_overflows == 0
                && g.audit_failures == 0
                && g.out_of_palette == 0;
            let _ = writeln!(
                s,
                "trial.{i}={} inserts={} queries={} violations={} stored={}",
                if ok { "pass" } else { "fail" },
                g.inserts,
                g.queries,
                g.violations,
                g.peak_stored_edges
            );
        }
        s
    }
}

/// Runs `trials` independent games. The factories receive the per-trial
/// seeds from [`trial_seeds`].
pub fn run_campaign<A, D>(
    cfg: GameConfig,
    trials: usize,
    seed: u64,
    query_every: usize,
    mut make_alg: A,
    mut make_adv: D,
) -> Result<CampaignSummary>
where
    A: FnMut(u64) -> Result<Box<dyn StreamColorer>>,
    D: FnMut(u64) -> Box<dyn Adversary>,
{
    let mut summary = CampaignSummary {
        trials,
        seed,
        query_every,
        games: Vec::with_capacity(trials),
    };
    for t in 0..trials {
        let (alg_seed, adv_seed) = trial_seeds(seed, t);
        let mut alg = make_alg(alg_seed)?;
        let mut adv = make_adv(adv_seed);
        summary.games.push(run_game(alg.as_mut(), adv.as_mut(), cfg)?.result);
    }
    Ok(summary)
}
