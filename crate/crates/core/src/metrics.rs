//! Run metrics as flat `key=value` lines with a JSON mirror.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunMetrics {
    pub algorithm: String,
    pub n: usize,
    pub delta: usize,
    pub beta: f64,
    pub passes: usize,
    pub epochs: usize,
    pub colors_reserved: u64,
    pub colors_used: usize,
    pub peak_space_words: u64,
    pub violations: usize,
    pub query_fails: usize,
    /// Milliseconds; left out unless timing was requested so that repeated
    /// runs stay byte-identical.
    pub wall_time_ms: Option<u64>,
    pub seeds: Vec<u64>,
    pub extra: BTreeMap<String, String>,
}

impl RunMetrics {
    pub fn new(algorithm: &str, n: usize, delta: usize) -> Self {
        RunMetrics {
            algorithm: algorithm.to_string(),
            n,
            delta,
            ..Default::default()
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.extra.insert(key.to_string(), value.to_string());
    }

    pub fn to_flat(&self) -> String {
        let mut s = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "algorithm={}", self.algorithm);
        let _ = writeln!(s, "n={}", self.n);
        let _ = writeln!(s, "delta={}", self.delta);
        let _ = writeln!(s, "beta={}", self.beta);
        let _ = writeln!(s, "passes={}", self.passes);
        let _ = writeln!(s, "epochs={}", self.epochs);
        let _ = writeln!(s, "colors_reserved={}", self.colors_reserved);
        let _ = writeln!(s, "colors_used={}", self.colors_used);
        let _ = writeln!(s, "peak_space_words={}", self.peak_space_words);
        let _ = writeln!(s, "violations={}", self.violations);
        let _ = writeln!(s, "query_fails={}", self.query_fails);
        if let Some(ms) = self.wall_time_ms {
            let _ = writeln!(s, "wall_time_ms={ms}");
        }
        let _ = writeln!(s, "seeds={}", seeds.join(","));
        for (k, v) in &self.extra {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_form_is_sorted_and_stable() {
        let mut m = RunMetrics::new("determ", 8, 7);
        m.seeds = vec![3, 4];
        m.set("zeta", 1);
        m.set("alpha", 2);
        let flat = m.to_flat();
        assert!(flat.starts_with("algorithm=determ\nn=8\ndelta=7\n"));
        assert!(flat.contains("seeds=3,4\nalpha=2\nzeta=1\n"));
        assert!(!flat.contains("wall_time"));
        assert_eq!(flat, m.clone().to_flat());
    }

    #[test]
    fn json_mirror_carries_every_field() {
        let mut m = RunMetrics::new("robust", 256, 64);
        m.wall_time_ms = Some(12);
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(v["algorithm"], "robust");
        assert_eq!(v["wall_time_ms"], 12);
        assert_eq!(v["delta"], 64);
    }
}
