//! Performance-grounded anchor store.
//!
//! Stores verified `(kpi, weights, performance)` tuples and ranks them for a
//! query KPI with an outcome-weighted RBF kernel:
//!
//! ```text
//! score_i = exp(-||q - k_i||^2 / (2 sigma^2)) * p_i / p_max
//! ```
//!
//! KPI vectors are stored normalized with the same scaler as the MLP
//! architect so distances are comparable across features.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::Event;
use crate::reward::WeightVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorEntry {
    pub kpi: [f64; 5],
    pub weights: WeightVector,
    pub performance_mbps: f64,
    pub source: String,
}

impl AnchorEntry {
    fn check(&self) -> std::result::Result<(), String> {
        if self.kpi.iter().any(|v| !v.is_finite()) {
            return Err("non-finite kpi".into());
        }
        if !(self.performance_mbps.is_finite() && self.performance_mbps >= 0.0) {
            return Err(format!("invalid performance {}", self.performance_mbps));
        }
        if !self.weights.is_clamp_valid() {
            return Err(format!("weights {:?} outside clamp bounds", self.weights.as_array()));
        }
        Ok(())
    }

    fn same_config(&self, other: &AnchorEntry) -> bool {
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-6);
        close(&self.kpi, &other.kpi) && close(&self.weights.as_array(), &other.weights.as_array())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredAnchor {
    pub index: usize,
    pub score: f64,
    pub entry: AnchorEntry,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub added: usize,
    pub replaced: usize,
    pub kept_existing: usize,
    pub skipped: usize,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorStore {
    entries: Vec<AnchorEntry>,
    sigma: f64,
    p_max: f64,
}

fn squared_distance(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl AnchorStore {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Domain(format!("anchor sigma must be > 0, got {sigma}")));
        }
        Ok(AnchorStore {
            entries: Vec::new(),
            sigma,
            p_max: 0.0,
        })
    }

    pub fn entries(&self) -> &[AnchorEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    fn refresh_p_max(&mut self) {
        self.p_max = self
            .entries
            .iter()
            .map(|e| e.performance_mbps)
            .fold(0.0, f64::max);
    }

    /// Outcome-weighted RBF score of `entry` for `query`, in `[0, 1]`.
    pub fn score(&self, query: &[f64; 5], entry: &AnchorEntry) -> Result<f64> {
        if !(self.p_max > 0.0) {
            return Err(Error::Domain("anchor store has no positive performance".into()));
        }
        let kernel = (-squared_distance(query, &entry.kpi) / (2.0 * self.sigma * self.sigma)).exp();
        Ok(kernel * entry.performance_mbps / self.p_max)
    }

    /// The `k` best entries: descending score, then higher performance, then
    /// insertion order.
    pub fn top_k(&self, query: &[f64; 5], k: usize) -> Result<Vec<ScoredAnchor>> {
        if self.entries.is_empty() || k == 0 {
            return Ok(Vec::new());
        }
        let mut scored = self
            .entries
            .iter()
            .enumerate()
            .map(|(index, e)| {
                Ok(ScoredAnchor {
                    index,
                    score: self.score(query, e)?,
                    entry: e.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| b.entry.performance_mbps.total_cmp(&a.entry.performance_mbps))
                .then_with(|| a.index.cmp(&b.index))
        });
        scored.truncate(k);
        Ok(scored)
    }

    /// Insert records. A record matching an existing `(kpi, weights)` within
    /// 1e-6 replaces it only when it performs better.
    pub fn ingest(&mut self, records: impl IntoIterator<Item = AnchorEntry>) -> IngestReport {
        let mut report = IngestReport::default();
        for rec in records {
            if let Err(reason) = rec.check() {
                report.skipped += 1;
                report.events.push(Event::RecordSkipped {
                    reason: format!("{}: {reason}", rec.source),
                });
                continue;
            }
            match self.entries.iter().position(|e| e.same_config(&rec)) {
                Some(i) => {
                    if rec.performance_mbps > self.entries[i].performance_mbps {
                        self.entries[i] = rec;
                        report.replaced += 1;
                    } else {
                        report.kept_existing += 1;
                    }
                }
                None => {
                    self.entries.push(rec);
                    report.added += 1;
                }
            }
        }
        self.refresh_p_max();
        report
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str, sigma: f64) -> Result<Self> {
        let mut store = AnchorStore::new(sigma)?;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            store.entries.push(serde_json::from_str(line)?);
        }
        store.refresh_p_max();
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_jsonl()?;
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(text.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, sigma: f64) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut text = String::new();
        for line in BufReader::new(file).lines() {
            text.push_str(&line.map_err(|e| Error::io(path, e))?);
            text.push('\n');
        }
        Self::from_jsonl(&text, sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(kpi: [f64; 5], perf: f64) -> AnchorEntry {
        AnchorEntry {
            kpi,
            weights: WeightVector::new([1.0, 1.0, 0.3, 0.5, 0.8]).unwrap(),
            performance_mbps: perf,
            source: "test".into(),
        }
    }

    #[test]
    fn score_examples() {
        let mut store = AnchorStore::new(0.5).unwrap();
        store.ingest([entry([0.1; 5], 300.0), entry([0.9; 5], 0.0)]);
        let e0 = store.entries()[0].clone();
        assert_eq!(store.score(&[0.1; 5], &e0).unwrap(), 1.0);
        assert_eq!(store.score(&[0.1; 5], &store.entries()[1]).unwrap(), 0.0);
        let q = [0.6, 0.1, 0.1, 0.1, 0.1]; // distance 0.5
        assert!((store.score(&q, &e0).unwrap() - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn zero_pmax_is_an_error() {
        let mut store = AnchorStore::new(0.5).unwrap();
        store.ingest([entry([0.1; 5], 0.0)]);
        assert!(store.score(&[0.0; 5], &store.entries()[0].clone()).is_err());
        assert!(AnchorStore::new(0.0).is_err());
    }

    #[test]
    fn top_k_ordering_and_ties() {
        let mut store = AnchorStore::new(0.5).unwrap();
        let mut a = entry([0.2; 5], 100.0);
        a.weights = WeightVector::new([1.0, 0.5, 0.3, 0.5, 0.8]).unwrap();
        let b = entry([0.2; 5], 200.0);
        let c = entry([0.8; 5], 250.0);
        store.ingest([a, b, c]);
        let top = store.top_k(&[0.2; 5], 10).unwrap();
        assert_eq!(top.len(), 3);
        assert_eq!(top.iter().map(|s| s.index).collect::<Vec<_>>(), vec![1, 0, 2]);
        // hand-computed: 200/250, 100/250, exp(-5*0.36/0.5)
        assert!((top[0].score - 0.8).abs() < 1e-12);
        assert!((top[1].score - 0.4).abs() < 1e-12);
        assert!((top[2].score - (-3.6f64).exp()).abs() < 1e-12);

        let mut tied = AnchorStore::new(0.5).unwrap();
        let mut x = entry([0.3; 5], 50.0);
        x.weights = WeightVector::splat(0.5).unwrap();
        let mut y = entry([0.3; 5], 50.0);
        y.weights = WeightVector::splat(0.6).unwrap();
        tied.ingest([entry([0.9; 5], 100.0), x, y]);
        let order: Vec<_> = tied.top_k(&[0.3; 5], 2).unwrap().iter().map(|s| s.index).collect();
        assert_eq!(order, vec![1, 2]);
        assert!(AnchorStore::new(0.5).unwrap().top_k(&[0.0; 5], 3).unwrap().is_empty());
    }

    #[test]
    fn ingest_dedups_by_config() {
        let mut store = AnchorStore::new(0.5).unwrap();
        let r = store.ingest([entry([0.1; 5], 300.0)]);
        assert_eq!(r.added, 1);
        let before = store.clone();
        let r = store.ingest([entry([0.1 + 1e-7; 5], 250.0)]);
        assert_eq!(r.kept_existing, 1);
        assert_eq!(store, before);
        let r = store.ingest([entry([0.1; 5], 320.0)]);
        assert_eq!(r.replaced, 1);
        assert_eq!(store.len(), 1);
        assert_eq!(store.p_max(), 320.0);
        let r = store.ingest(Vec::new());
        assert_eq!(r, IngestReport::default());
        let r = store.ingest([entry([f64::NAN; 5], 1.0), entry([0.5; 5], -3.0)]);
        assert_eq!(r.skipped, 2);
        assert_eq!(r.events.len(), 2);
    }

    #[test]
    fn jsonl_round_trip_is_bit_exact() {
        let mut store = AnchorStore::new(0.5).unwrap();
        store.ingest([
            entry([0.123456789012345, 0.2, 1.0 / 3.0, 0.0, 0.7], 342.1),
            entry([0.9, 0.1, 0.2, 0.3, 0.4], 103.3),
        ]);
        let text = store.to_jsonl().unwrap();
        let back = AnchorStore::from_jsonl(&text, 0.5).unwrap();
        assert_eq!(back, store);
        assert_eq!(back.to_jsonl().unwrap(), text);
    }
}
