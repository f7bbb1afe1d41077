//! Restartable token streams with pass counting, and a word-granular space
//! meter.

use std::cell::Cell;
use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Color, Edge, Vertex};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StreamToken {
    Edge(Edge),
    List { vertex: Vertex, colors: Vec<Color> },
}

/// An in-memory token sequence that can only be read through [`open_pass`].
///
/// [`open_pass`]: MultiPassSource::open_pass
#[derive(Debug, Default)]
pub struct MultiPassSource {
    tokens: Vec<StreamToken>,
    open: Cell<bool>,
    passes: Cell<usize>,
}

impl MultiPassSource {
    /// Rejects a vertex with two list tokens.
    pub fn new(tokens: Vec<StreamToken>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &tokens {
            if let StreamToken::List { vertex, .. } = t {
                if !seen.insert(*vertex) {
                    return Err(Error::Input(format!("second list for vertex {vertex}")));
                }
            }
        }
        Ok(MultiPassSource {
            tokens,
            open: Cell::new(false),
            passes: Cell::new(0),
        })
    }

    pub fn from_edges(edges: impl IntoIterator<Item = Edge>) -> Self {
        MultiPassSource {
            tokens: edges.into_iter().map(StreamToken::Edge).collect(),
            open: Cell::new(false),
            passes: Cell::new(0),
        }
    }

    /// Parses the token format: `E u v` and `L x k c1 .. ck` lines, `#`
    /// comments. A bare `u v` line is accepted as an edge.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| -> Result<u32> {
                s.parse::<u32>()
                    .map_err(|_| err(format!("expected a non-negative integer, got {s:?}")))
            };
            match fields[0] {
                "E" | "e" => {
                    if fields.len() != 3 {
                        return Err(err("edge line needs exactly two endpoints".into()));
                    }
                    let e = Edge::new(num(fields[1])?, num(fields[2])?)
                        .map_err(|e| err(e.to_string()))?;
                    tokens.push(StreamToken::Edge(e));
                }
                "L" | "l" => {
                    if fields.len() < 3 {
                        return Err(err("list line needs a vertex and a length".into()));
                    }
                    let vertex = num(fields[1])?;
                    let k = num(fields[2])? as usize;
                    if fields.len() != 3 + k {
                        return Err(err(format!(
                            "list declares {k} colors but has {}",
                            fields.len() - 3
                        )));
                    }
                    let mut colors = fields[3..]
                        .iter()
                        .map(|s| num(s))
                        .collect::<Result<Vec<_>>>()?;
                    colors.sort_unstable();
                    if colors.windows(2).any(|w| w[0] == w[1]) {
                        return Err(err(format!("repeated color in list of vertex {vertex}")));
                    }
                    if !seen.insert(vertex) {
                        return Err(err(format!("second list for vertex {vertex}")));
                    }
                    tokens.push(StreamToken::List { vertex, colors });
                }
                _ if fields.len() == 2 => {
                    let e = Edge::new(num(fields[0])?, num(fields[1])?)
                        .map_err(|e| err(e.to_string()))?;
                    tokens.push(StreamToken::Edge(e));
                }
                other => return Err(err(format!("unknown record type {other:?}"))),
            }
        }
        Ok(MultiPassSource {
            tokens,
            open: Cell::new(false),
            passes: Cell::new(0),
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        render_tokens(&self.tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn pass_count(&self) -> usize {
        self.passes.get()
    }

    pub fn reset_pass_count(&self) {
        self.passes.set(0);
    }

    /// Starts a sequential read of the whole stream. Only one pass may be
    /// open at a time; dropping the iterator closes it.
    pub fn open_pass(&self) -> Result<Pass<'_>> {
        if self.open.get() {
            return Err(Error::Usage("a pass is already open on this source".into()));
        }
        self.open.set(true);
        self.passes.set(self.passes.get() + 1);
        Ok(Pass {
            source: self,
            pos: 0,
        })
    }
}

pub fn render_tokens(tokens: &[StreamToken]) -> String {
    let mut out = String::new();
    for t in tokens {
        match t {
            StreamToken::Edge(e) => {
                let _ = writeln!(out, "E {} {}", e.u(), e.v());
            }
            StreamToken::List { vertex, colors } => {
                let _ = write!(out, "L {vertex} {}", colors.len());
                for c in colors {
                    let _ = write!(out, " {c}");
                }
                out.push('\n');
            }
        }
    }
    out
}

pub struct Pass<'a> {
    source: &'a MultiPassSource,
    pos: usize,
}

impl<'a> Iterator for Pass<'a> {
    type Item = &'a StreamToken;

    fn next(&mut self) -> Option<Self::Item> {
        let t = self.source.tokens.get(self.pos)?;
        self.pos += 1;
        Some(t)
    }
}

impl Drop for Pass<'_> {
    fn drop(&mut self) {
        self.source.open.set(false);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum SpaceCategory {
    StoredEdges,
    Counters,
    HashDescriptions,
    Accumulators,
    Coloring,
}

impl SpaceCategory {
    pub const ALL: [SpaceCategory; 5] = [
        SpaceCategory::StoredEdges,
        SpaceCategory::Counters,
        SpaceCategory::HashDescriptions,
        SpaceCategory::Accumulators,
        SpaceCategory::Coloring,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SpaceCategory::StoredEdges => "stored_edges",
            SpaceCategory::Counters => "counters",
            SpaceCategory::HashDescriptions => "hash_descriptions",
            SpaceCategory::Accumulators => "accumulators",
            SpaceCategory::Coloring => "coloring",
        }
    }
}

/// Words currently held by an algorithm, per category, with running peaks.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SpaceMeter {
    current: [u64; 5],
    peak_by: [u64; 5],
    current_words: u64,
    peak_words: u64,
    id_bits: u32,
}

impl SpaceMeter {
    /// `n` sets the id width used by [`SpaceMeter::peak_bits`].
    pub fn new(n: usize) -> Self {
        SpaceMeter {
            id_bits: (n.max(2) as u64).next_power_of_two().trailing_zeros(),
            ..Default::default()
        }
    }

    /// Panics if a category would go negative: that is an accounting bug.
    pub fn charge(&mut self, cat: SpaceCategory, delta: i64) {
        let i = cat.index();
        let next = self.current[i] as i64 + delta;
        assert!(
            next >= 0,
            "space meter underflow in {}: {} + {delta}",
            cat.name(),
            self.current[i]
        );
        self.current[i] = next as u64;
        self.current_words = (self.current_words as i64 + delta) as u64;
        self.peak_by[i] = self.peak_by[i].max(self.current[i]);
        self.peak_words = self.peak_words.max(self.current_words);
    }

    /// Sets a category to an absolute level.
    pub fn set(&mut self, cat: SpaceCategory, words: u64) {
        let delta = words as i64 - self.current[cat.index()] as i64;
        self.charge(cat, delta);
    }

    pub fn release(&mut self, cat: SpaceCategory) {
        self.set(cat, 0);
    }

    pub fn current(&self, cat: SpaceCategory) -> u64 {
        self.current[cat.index()]
    }

    pub fn peak(&self, cat: SpaceCategory) -> u64 {
        self.peak_by[cat.index()]
    }

    pub fn current_words(&self) -> u64 {
        self.current_words
    }

    pub fn peak_words(&self) -> u64 {
        self.peak_words
    }

    pub fn id_bits(&self) -> u32 {
        self.id_bits
    }

    pub fn peak_bits(&self) -> u64 {
        self.peak_words * self.id_bits as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::hash_map::DefaultHasher;
    use std::hash::{Hash, Hasher};

    fn e(a: u32, b: u32) -> Edge {
        Edge::new(a, b).unwrap()
    }

    #[test]
    fn empty_stream() {
        let s = MultiPassSource::from_edges([]);
        assert_eq!(s.open_pass().unwrap().count(), 0);
        assert_eq!(s.pass_count(), 1);
    }

    #[test]
    fn passes_replay_identically() {
        let s = MultiPassSource::from_edges([e(0, 1), e(1, 2), e(0, 2)]);
        let a: Vec<_> = s.open_pass().unwrap().cloned().collect();
        let b: Vec<_> = s.open_pass().unwrap().cloned().collect();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!(s.pass_count(), 2);
    }

    #[test]
    fn nested_pass_is_rejected() {
        let s = MultiPassSource::from_edges([e(0, 1)]);
        let p = s.open_pass().unwrap();
        assert!(matches!(s.open_pass(), Err(Error::Usage(_))));
        drop(p);
        assert!(s.open_pass().is_ok());
        assert_eq!(s.pass_count(), 2);
    }

    #[test]
    fn interleaved_tokens_round_trip() {
        let text = "# mixed\nL 0 2 5 7\nE 0 1\nL 1 3 1 2 9\nE 1 2\nL 2 1 4\n";
        let s = MultiPassSource::parse(text).unwrap();
        let digest = |toks: &mut dyn Iterator<Item = &StreamToken>| {
            let mut h = DefaultHasher::new();
            for t in toks {
                t.hash(&mut h);
            }
            h.finish()
        };
        let replay = digest(&mut s.open_pass().unwrap());
        let again = MultiPassSource::parse(&s.to_text()).unwrap();
        assert_eq!(replay, digest(&mut again.open_pass().unwrap()));
        assert_eq!(s.to_text(), text.lines().skip(1).map(|l| format!("{l}\n")).collect::<String>());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = MultiPassSource::parse("E 0 1\nE 2\n").unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 2, .. }));
        let bad = MultiPassSource::parse("L 0 3 1 2\n").unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 1, .. }));
        let bad = MultiPassSource::parse("L 0 1 1\nL 0 1 2\n").unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 2, .. }));
        let bad = MultiPassSource::parse("E 3 3\n").unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn meter_tracks_peak() {
        let mut m = SpaceMeter::new(1000);
        m.charge(SpaceCategory::Counters, 5);
        m.charge(SpaceCategory::Counters, -5);
        assert_eq!(m.current_words(), 0);
        assert_eq!(m.peak_words(), 5);
        m.charge(SpaceCategory::StoredEdges, 1000);
        assert!(m.peak_words() >= 1000);
        assert_eq!(m.peak_bits(), 1000 * 10);
        m.set(SpaceCategory::StoredEdges, 10);
        assert_eq!(m.current(SpaceCategory::StoredEdges), 10);
        assert_eq!(m.peak(SpaceCategory::StoredEdges), 1000);
    }

    #[test]
    #[should_panic(expected = "underflow")]
    fn meter_rejects_negative_balance() {
        let mut m = SpaceMeter::new(4);
        m.charge(SpaceCategory::Accumulators, -1);
    }
}
