//! Slack-weighted sampling and deterministic hash selection over the affine
//! family `{z -> a z + b mod p}`.
//!
//! Every uncolored vertex owns a list of children (candidate sub-palettes)
//! with positive slack. A [`GwSampler`] maps `(x, r)` with `r` in `[0, p)` to
//! one child of `x`, giving child `j` an interval of about `p * w_j`
//! consecutive residues. Selection then runs in two passes: the first sums
//! the potential over all `b` for every `a`, the second scores every `b` for
//! the best `a`.

use crate::error::{theory, Error, Result};
use crate::graph::Vertex;
use crate::hashing::{inv_mod, mul_mod, CwHash};

/// `w_j = s_j / sum_i s_i`. Fails when every slack is zero.
pub fn compute_weights(slacks: &[u64]) -> Result<Vec<f64>> {
    let total: u64 = slacks.iter().sum();
    if total == 0 {
        return theory("all child slacks are zero");
    }
    Ok(slacks.iter().map(|&s| s as f64 / total as f64).collect())
}

/// Per-vertex children with positive slack, keys ascending.
#[derive(Clone, Debug, Default)]
pub struct ChildSlacks {
    offsets: Vec<usize>,
    keys: Vec<u64>,
    slack: Vec<u64>,
}

impl ChildSlacks {
    pub fn new() -> Self {
        ChildSlacks {
            offsets: vec![0],
            ..Default::default()
        }
    }

    /// Appends the next vertex. Zero-slack children are dropped.
    pub fn push_vertex(&mut self, children: impl IntoIterator<Item = (u64, u64)>) {
        for (key, s) in children {
            if s > 0 {
                debug_assert!(self.keys.len() == *self.offsets.last().unwrap()
                    || *self.keys.last().unwrap() < key);
                self.keys.push(key);
                self.slack.push(s);
            }
        }
        self.offsets.push(self.keys.len());
    }

    pub fn vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn entries(&self) -> usize {
        self.keys.len()
    }
}

/// One child of a vertex together with its residue interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slot {
    pub key: u64,
    pub slack: u64,
    pub start: u64,
    pub end: u64,
}

#[derive(Clone, Debug)]
pub struct GwSampler {
    p: u64,
    offsets: Vec<usize>,
    slots: Vec<Slot>,
}

impl GwSampler {
    /// Gives child `j` of each vertex `floor(p * w_j * inflation)` residues in
    /// ascending key order, stopping once `p` residues are handed out.
    pub fn build(children: &ChildSlacks, p: u64, inflation: f64) -> Result<Self> {
        let mut slots = Vec::with_capacity(children.entries());
        for x in 0..children.vertices() {
            let range = children.offsets[x]..children.offsets[x + 1];
            let total: u64 = children.slack[range.clone()].iter().sum();
            if total == 0 {
                return theory(format!("vertex #{x} has no child with positive slack"));
            }
            let mut filled = 0u64;
            for i in range {
                let s = children.slack[i];
                let want = (p as f64 * s as f64 * inflation / total as f64).floor() as u64;
                let end = (filled + want).min(p);
                slots.push(Slot {
                    key: children.keys[i],
                    slack: s,
                    start: filled,
                    end,
                });
                filled = end;
            }
            if filled < p {
                return Err(Error::Config(format!(
                    "sampler covers only {filled} of {p} residues for vertex #{x}; p is too small"
                )));
            }
        }
        Ok(GwSampler {
            p,
            offsets: children.offsets.clone(),
            slots,
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn slots(&self, x: usize) -> &[Slot] {
        &self.slots[self.offsets[x]..self.offsets[x + 1]]
    }

    /// The child of `x` owning residue `r`.
    pub fn sample(&self, x: usize, r: u64) -> &Slot {
        let s = self.slots(x);
        let i = s.partition_point(|slot| slot.end <= r);
        &s[i]
    }

    /// Stored words: one threshold and one key per child.
    pub fn words(&self) -> u64 {
        2 * self.slots.len() as u64
    }
}

/// An edge between two uncolored vertices with equal proposed sets:
/// global ids for hashing, local ids for the sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConflictEdge {
    pub u: Vertex,
    pub lu: u32,
    pub v: Vertex,
    pub lv: u32,
}

/// Calls `f(slot_u, slot_v)` for every key the two vertices share, skipping
/// empty intervals.
#[inline]
fn for_common_slots(sampler: &GwSampler, e: &ConflictEdge, mut f: impl FnMut(&Slot, &Slot)) {
    let (a, b) = (sampler.slots(e.lu as usize), sampler.slots(e.lv as usize));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].key.cmp(&b[j].key) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if a[i].end > a[i].start && b[j].end > b[j].start {
                    f(&a[i], &b[j]);
                }
                i += 1;
                j += 1;
            }
        }
    }
}

#[inline]
fn pair_weight(su: &Slot, sv: &Slot) -> f64 {
    1.0 / su.slack as f64 + 1.0 / sv.slack as f64
}

/// Potential of the refinement chosen by `h`, straight from the definition.
pub fn potential_of(sampler: &GwSampler, edges: &[ConflictEdge], h: CwHash) -> f64 {
    let mut phi = 0.0;
    for e in edges {
        let su = sampler.sample(e.lu as usize, h.eval(e.u as u64));
        let sv = sampler.sample(e.lv as usize, h.eval(e.v as u64));
        if su.key == sv.key {
            phi += pair_weight(su, sv);
        }
    }
    phi
}

/// Pass-two accumulator: `totals[a] = sum_b potential(a z + b)`.
pub struct PartSums<'a> {
    sampler: &'a GwSampler,
    totals: Vec<f64>,
    diff: Vec<f64>,
    buffer: Vec<(u64, u32, u32)>,
    chunk: usize,
    peak_buffer: usize,
}

impl<'a> PartSums<'a> {
    pub fn new(sampler: &'a GwSampler) -> Self {
        let p = sampler.p as usize;
        PartSums {
            sampler,
            totals: vec![0.0; p],
            diff: vec![0.0; p],
            buffer: Vec::new(),
            chunk: p,
            peak_buffer: 0,
        }
    }

    pub fn add(&mut self, e: ConflictEdge) {
        let p = self.sampler.p;
        let c = (e.u as u64 + p - e.v as u64 % p) % p;
        self.buffer.push((c, e.lu, e.lv));
        self.peak_buffer = self.peak_buffer.max(self.buffer.len());
        if self.buffer.len() >= self.chunk {
            self.flush();
        }
    }

    /// With `c = u - v` fixed, the pair overlap as a function of
    /// `delta = a c` is a sum of periodic trapezoids. Edges sharing `c` are
    /// merged into one slope-difference array and swept once.
    fn flush(&mut self) {
        let p = self.sampler.p;
        let pi = p as i64;
        self.buffer.sort_unstable();
        let mut start = 0;
        while start < self.buffer.len() {
            let c = self.buffer[start].0;
            let mut end = start;
            let mut slope0 = 0.0f64;
            let mut value0 = 0.0f64;
            while end < self.buffer.len() && self.buffer[end].0 == c {
                let (_, lu, lv) = self.buffer[end];
                let edge = ConflictEdge { u: 0, lu, v: 0, lv };
                let diff = &mut self.diff;
                for_common_slots(self.sampler, &edge, |su, sv| {
                    let w = pair_weight(su, sv);
                    let (s1, e1) = (su.start as i64, su.end as i64);
                    let (s2, e2) = (sv.start as i64, sv.end as i64);
                    for (t, sign) in [(s1 - e2, 1.0), (s1 - s2, -1.0), (e1 - e2, -1.0), (e1 - s2, 1.0)] {
                        let tau = t.rem_euclid(pi) as usize;
                        let q = t.div_euclid(pi) as f64;
                        diff[tau] += sign * w;
                        slope0 -= sign * w * q;
                    }
                    let overlap = (e1.min(e2) - s1.max(s2)).max(0);
                    value0 += w * overlap as f64;
                });
                end += 1;
            }
            let cinv = inv_mod(c, p);
            let (mut slope, mut value, mut a) = (slope0, value0, 0u64);
            for d in self.diff.iter_mut() {
                slope += *d;
                *d = 0.0;
                self.totals[a as usize] += value;
                value += slope;
                a += cinv;
                if a >= p {
                    a -= p;
                }
            }
            start = end;
        }
        self.buffer.clear();
    }

    /// Words held at peak: two length-`p` arrays plus the edge buffer.
    pub fn words(&self) -> u64 {
        2 * self.sampler.p + 3 * self.peak_buffer as u64
    }

    pub fn finish(mut self) -> Vec<f64> {
        self.flush();
        self.totals
    }
}

/// Pass-three accumulator: potential of `a* z + b` for every `b`.
pub struct HashScores<'a> {
    sampler: &'a GwSampler,
    a: u64,
    diff: Vec<f64>,
}

impl<'a> HashScores<'a> {
    pub fn new(sampler: &'a GwSampler, a: u64) -> Self {
        HashScores {
            sampler,
            a,
            diff: vec![0.0; sampler.p as usize + 1],
        }
    }

    fn add_range(&mut self, lo: u64, hi: u64, w: f64) {
        self.diff[lo as usize] += w;
        self.diff[hi as usize] -= w;
    }

    /// Adds `w` on the cyclic range of length `len` starting at `start`.
    fn add_cyclic(&mut self, start: u64, len: u64, w: f64) {
        let p = self.sampler.p;
        if len == 0 {
            return;
        }
        if start + len <= p {
            self.add_range(start, start + len, w);
        } else {
            self.add_range(start, p, w);
            self.add_range(0, start + len - p, w);
        }
    }

    pub fn add(&mut self, e: ConflictEdge) {
        let p = self.sampler.p;
        let a = self.a;
        let delta = mul_mod(a, (e.u as u64 + p - e.v as u64 % p) % p, p);
        let shift = mul_mod(a, e.u as u64, p);
        let mut pieces: Vec<(u64, u64, f64)> = Vec::new();
        for_common_slots(self.sampler, &e, |su, sv| {
            let w = pair_weight(su, sv);
            // residues r of h(u) with r in I_u and r - delta in I_v
            let len = sv.end - sv.start;
            let js = (sv.start + delta) % p;
            let mut shifted = [(js, (js + len).min(p)), (0, (js + len).saturating_sub(p))];
            if len == p {
                shifted = [(0, p), (0, 0)];
            }
            for (lo, hi) in shifted {
                let lo = lo.max(su.start);
                let hi = hi.min(su.end);
                if lo < hi {
                    pieces.push(((lo + p - shift) % p, hi - lo, w));
                }
            }
        });
        for (start, len, w) in pieces {
            self.add_cyclic(start, len, w);
        }
    }

    pub fn words(&self) -> u64 {
        self.sampler.p + 1
    }

    pub fn finish(self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.sampler.p as usize);
        let mut acc = 0.0;
        for d in &self.diff[..self.sampler.p as usize] {
            acc += d;
            out.push(acc);
        }
        out
    }
}

/// Index of the smallest entry; the lowest index wins ties.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HashChoice {
    pub hash: CwHash,
    pub potential: f64,
    /// Average potential over the whole family.
    pub mean: f64,
}

/// Combines the pass results and checks the sub-average guarantee with
/// relative slack `(1 + eps)^2`.
pub fn choose_hash(p: u64, part_sums: &[f64], a: u64, scores: &[f64], eps: f64) -> Result<HashChoice> {
    let b = argmin(scores) as u64;
    let potential = scores[b as usize].max(0.0);
    let mean = part_sums.iter().sum::<f64>() / (p as f64 * p as f64);
    let bound = (1.0 + eps).powi(2) * mean;
    if potential > bound * (1.0 + 1e-9) + 1e-9 {
        return theory(format!(
            "selected hash has potential {potential} above {bound} (mean {mean})"
        ));
    }
    Ok(HashChoice {
        hash: CwHash::new(a, b, p),
        potential,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sampler_from(weights: &[Vec<u64>], p: u64, inflation: f64) -> Result<GwSampler> {
        let mut c = ChildSlacks::new();
        for w in weights {
            c.push_vertex(w.iter().enumerate().map(|(j, &s)| (j as u64, s)));
        }
        GwSampler::build(&c, p, inflation)
    }

    #[test]
    fn weights() {
        assert_eq!(compute_weights(&[3, 1]).unwrap(), vec![0.75, 0.25]);
        assert_eq!(compute_weights(&[0, 5, 0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(compute_weights(&[0, 0]).is_err());
    }

    #[test]
    fn toy_sampler_thresholds() {
        let s = sampler_from(&[vec![1, 1]], 8, 1.0).unwrap();
        let slots = s.slots(0);
        assert_eq!((slots[0].start, slots[0].end), (0, 4));
        assert_eq!((slots[1].start, slots[1].end), (4, 8));
        assert_eq!(s.sample(0, 3).key, 0);
        assert_eq!(s.sample(0, 4).key, 1);

        let s = sampler_from(&[vec![1, 0]], 8, 1.0).unwrap();
        assert_eq!(s.slots(0).len(), 1);
        assert!((0..8).all(|r| s.sample(0, r).key == 0));
    }

    #[test]
    fn shortfall_is_reported() {
        let r = sampler_from(&[vec![1, 1, 1]], 8, 1.0);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    fn brute_totals(s: &GwSampler, edges: &[ConflictEdge]) -> Vec<Vec<f64>> {
        let p = s.p();
        (0..p)
            .map(|a| (0..p).map(|b| potential_of(s, edges, CwHash::new(a, b, p))).collect())
            .collect()
    }

    #[test]
    fn pass_accumulators_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..30 {
            let n = rng.gen_range(2..9u32);
            let p = [11u64, 13, 17, 29][trial % 4];
            let k = rng.gen_range(1..5);
            let weights: Vec<Vec<u64>> = (0..n)
                .map(|_| {
                    let mut w: Vec<u64> = (0..k).map(|_| rng.gen_range(0..4)).collect();
                    if w.iter().all(|&x| x == 0) {
                        w[0] = 1;
                    }
                    w
                })
                .collect();
            let inflation = 1.0 + rng.gen_range(0.0..0.5);
            let Ok(s) = sampler_from(&weights, p, inflation) else { continue };
            let mut edges = vec![];
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(0.6) {
                        edges.push(ConflictEdge { u, lu: u, v, lv: v });
                    }
                }
            }
            let brute = brute_totals(&s, &edges);
            let mut ps = PartSums::new(&s);
            ps.chunk = 3;
            for e in &edges {
                ps.add(*e);
            }
            let totals = ps.finish();
            for a in 0..p as usize {
                let want: f64 = brute[a].iter().sum();
                assert!((totals[a] - want).abs() < 1e-9, "a={a}: {} vs {want}", totals[a]);
            }
            let a = argmin(&totals) as u64;
            let mut hs = HashScores::new(&s, a);
            for e in &edges {
                hs.add(*e);
            }
            let scores = hs.finish();
            for b in 0..p as usize {
                assert!((scores[b] - brute[a as usize][b]).abs() < 1e-9);
            }
            let choice = choose_hash(p, &totals, a, &scores, 0.0).unwrap();
            let flat: Vec<f64> = brute.concat();
            let mean = flat.iter().sum::<f64>() / flat.len() as f64;
            assert!(choice.potential <= mean + 1e-9);
        }
    }
}
