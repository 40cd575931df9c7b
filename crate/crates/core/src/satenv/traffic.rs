//! Traffic regimes and per-beam demand generators.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;

/// Traffic regime. The first four are the known (training) regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    Urban,
    Maritime,
    Disaster,
    Mixed,
    IotBurst,
    PolarHandover,
    HotCold,
}

impl RegimeLabel {
    pub const ALL: [RegimeLabel; 7] = [
        RegimeLabel::Urban,
        RegimeLabel::Maritime,
        RegimeLabel::Disaster,
        RegimeLabel::Mixed,
        RegimeLabel::IotBurst,
        RegimeLabel::PolarHandover,
        RegimeLabel::HotCold,
    ];
    pub const KNOWN: [RegimeLabel; 4] = [
        RegimeLabel::Urban,
        RegimeLabel::Maritime,
        RegimeLabel::Disaster,
        RegimeLabel::Mixed,
    ];
    pub const NOVEL: [RegimeLabel; 3] = [
        RegimeLabel::IotBurst,
        RegimeLabel::PolarHandover,
        RegimeLabel::HotCold,
    ];

    pub fn is_known(self) -> bool {
        Self::KNOWN.contains(&self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegimeLabel::Urban => "urban",
            RegimeLabel::Maritime => "maritime",
            RegimeLabel::Disaster => "disaster",
            RegimeLabel::Mixed => "mixed",
            RegimeLabel::IotBurst => "iot_burst",
            RegimeLabel::PolarHandover => "polar_handover",
            RegimeLabel::HotCold => "hot_cold",
        }
    }

    fn stream_id(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegimeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegimeLabel::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown regime '{s}'")))
    }
}

/// Ring index of a beam in the hexagonal layout: 0 is the centre cell,
/// ring `r >= 1` holds `6r` cells.
pub fn beam_ring(beam: usize) -> usize {
    let mut ring = 0;
    let mut first_of_next = 1;
    while beam >= first_of_next {
        ring += 1;
        first_of_next += 6 * ring;
    }
    ring
}

/// Centre beams are the inner two rings (7 of 19).
pub fn is_center_beam(beam: usize) -> bool {
    beam_ring(beam) <= 1
}

/// Inclusive-exclusive uniform range in Mbps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..self.hi)
        } else {
            self.lo
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn validate(&self, name: &str, errors: &mut Vec<String>) {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo >= 0.0 && self.hi >= self.lo) {
            errors.push(format!(
                "traffic.{name} must satisfy 0 <= lo <= hi (got [{}, {}])",
                self.lo, self.hi
            ));
        }
    }
}

/// Demand model parameters for all seven regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficConfig {
    pub urban_center: Range,
    pub urban_edge: Range,
    pub maritime: Range,
    pub disaster_affected_beams: usize,
    pub disaster_spike: Range,
    pub disaster_background: Range,
    pub mixed: Range,
    pub iot_base: Range,
    pub iot_burst_prob: f64,
    pub iot_burst_factor: f64,
    pub polar_base: f64,
    pub polar_amplitude: f64,
    pub polar_period_steps: u64,
    pub polar_jitter: f64,
    pub hot_beams: usize,
    pub hot: Range,
    pub cold: Range,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            urban_center: Range::new(40.0, 80.0),
            urban_edge: Range::new(10.0, 30.0),
            maritime: Range::new(5.0, 15.0),
            disaster_affected_beams: 2,
            disaster_spike: Range::new(160.0, 220.0),
            disaster_background: Range::new(15.0, 35.0),
            mixed: Range::new(20.0, 40.0),
            iot_base: Range::new(2.0, 8.0),
            iot_burst_prob: 0.2,
            iot_burst_factor: 4.0,
            polar_base: 30.0,
            polar_amplitude: 20.0,
            polar_period_steps: 400,
            polar_jitter: 3.0,
            hot_beams: 3,
            hot: Range::new(80.0, 120.0),
            cold: Range::new(1.0, 5.0),
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self, num_beams: usize, errors: &mut Vec<String>) {
        for (name, r) in [
            ("urban_center", self.urban_center),
            ("urban_edge", self.urban_edge),
            ("maritime", self.maritime),
            ("disaster_spike", self.disaster_spike),
            ("disaster_background", self.disaster_background),
            ("mixed", self.mixed),
            ("iot_base", self.iot_base),
            ("hot", self.hot),
            ("cold", self.cold),
        ] {
            r.validate(name, errors);
        }
        if !(0.0..=1.0).contains(&self.iot_burst_prob) {
            errors.push("traffic.iot_burst_prob must be in [0, 1]".into());
        }
        if !(self.iot_burst_factor >= 1.0) {
            errors.push("traffic.iot_burst_factor must be >= 1".into());
        }
        if self.polar_period_steps == 0 {
            errors.push("traffic.polar_period_steps must be > 0".into());
        }
        if !(self.polar_amplitude >= 0.0 && self.polar_jitter >= 0.0 && self.polar_base >= 0.0) {
            errors.push("traffic.polar_* parameters must be >= 0".into());
        }
        if self.disaster_affected_beams < 1 || self.disaster_affected_beams > num_beams {
            errors.push(format!(
                "traffic.disaster_affected_beams must be in [1, {num_beams}]"
            ));
        }
        if self.hot_beams > num_beams {
            errors.push(format!("traffic.hot_beams must be <= {num_beams}"));
        }
    }

    /// Deterministic per-beam demand mean of the polar-handover sinusoid.
    /// Rings are phase-shifted by 2*pi/3 each.
    pub fn polar_mean(&self, beam: usize, step: u64) -> f64 {
        let period = self.polar_period_steps as f64;
        let phase = beam_ring(beam) as f64 * 2.0 * std::f64::consts::PI / 3.0;
        let angle = 2.0 * std::f64::consts::PI * (step % self.polar_period_steps) as f64 / period;
        self.polar_base + self.polar_amplitude * (angle + phase).sin()
    }

    /// Beams singled out in the disaster (spike) or hot-cold (hot) regimes.
    /// They depend on the seed only, so the affected area stays put while a
    /// regime is active.
    pub fn special_beams(&self, regime: RegimeLabel, num_beams: usize, seed: u64) -> Vec<usize> {
        let k = match regime {
            RegimeLabel::Disaster => self.disaster_affected_beams,
            RegimeLabel::HotCold => self.hot_beams,
            _ => return Vec::new(),
        }
        .min(num_beams);
        let mut rng = stream(seed, &[0x5EC1, regime.stream_id()]);
        let mut idx = sample(&mut rng, num_beams, k).into_vec();
        idx.sort_unstable();
        idx
    }

    /// Per-beam demand (Mbps) for `regime` at `step`. A pure function of
    /// `(regime, num_beams, seed, step)`.
    pub fn sample_demand(
        &self,
        regime: RegimeLabel,
        num_beams: usize,
        seed: u64,
        step: u64,
    ) -> Vec<f64> {
        let mut rng = stream(seed, &[0xDE3A, regime.stream_id(), step]);
        match regime {
            RegimeLabel::Urban => (0..num_beams)
                .map(|b| {
                    if is_center_beam(b) {
                        self.urban_center.draw(&mut rng)
                    } else {
                        self.urban_edge.draw(&mut rng)
                    }
                })
                .collect(),
            RegimeLabel::Maritime => (0..num_beams).map(|_| self.maritime.draw(&mut rng)).collect(),
            RegimeLabel::Mixed => (0..num_beams).map(|_| self.mixed.draw(&mut rng)).collect(),
            RegimeLabel::Disaster | RegimeLabel::HotCold => {
                let special = self.special_beams(regime, num_beams, seed);
                let (hi, lo) = if regime == RegimeLabel::Disaster {
                    (self.disaster_spike, self.disaster_background)
                } else {
                    (self.hot, self.cold)
                };
                (0..num_beams)
                    .map(|b| {
                        if special.binary_search(&b).is_ok() {
                            hi.draw(&mut rng)
                        } else {
                            lo.draw(&mut rng)
                        }
                    })
                    .collect()
            }
            RegimeLabel::IotBurst => (0..num_beams)
                .map(|_| {
                    let base = self.iot_base.draw(&mut rng);
                    if rng.random_bool(self.iot_burst_prob) {
                        base * self.iot_burst_factor
                    } else {
                        base
                    }
                })
                .collect(),
            RegimeLabel::PolarHandover => (0..num_beams)
                .map(|b| {
                    let jitter = if self.polar_jitter > 0.0 {
                        rng.random_range(-self.polar_jitter..self.polar_jitter)
                    } else {
                        0.0
                    };
                    (self.polar_mean(b, step) + jitter).max(0.0)
                })
                .collect(),
        }
    }
}

/// Cyclic regime schedule: segments are played in order and repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSchedule {
    pub segments: Vec<(RegimeLabel, u64)>,
}

impl RegimeSchedule {
    pub fn constant(regime: RegimeLabel) -> Self {
        RegimeSchedule {
            segments: vec![(regime, 1)],
        }
    }

    /// Every regime in `regimes` for `duration` steps, cycling.
    pub fn cycle(regimes: &[RegimeLabel], duration: u64) -> Self {
        RegimeSchedule {
            segments: regimes.iter().map(|&r| (r, duration)).collect(),
        }
    }

    pub fn validate(&self, errors: &mut Vec<String>) {
        if self.segments.is_empty() {
            errors.push("regime schedule must contain at least one segment".into());
        }
        if self.segments.iter().any(|(_, d)| *d == 0) {
            errors.push("regime schedule durations must be > 0".into());
        }
    }

    pub fn cycle_len(&self) -> u64 {
        self.segments.iter().map(|(_, d)| d).sum()
    }

    pub fn regime_at(&self, step: u64) -> RegimeLabel {
        let mut t = step % self.cycle_len().max(1);
        for &(regime, d) in &self.segments {
            if t < d {
                return regime;
            }
            t -= d;
        }
        self.segments[0].0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_layout() {
        assert_eq!(beam_ring(0), 0);
        assert!((1..=6).all(|b| beam_ring(b) == 1));
        assert!((7..=18).all(|b| beam_ring(b) == 2));
        assert_eq!(beam_ring(19), 3);
        assert_eq!((0..19).filter(|&b| is_center_beam(b)).count(), 7);
    }

    #[test]
    fn regime_round_trip() {
        for r in RegimeLabel::ALL {
            assert_eq!(r.as_str().parse::<RegimeLabel>().unwrap(), r);
            let json = serde_json::to_string(&r).unwrap();
            assert_eq!(json, format!("\"{}\"", r.as_str()));
        }
        assert!("suburban".parse::<RegimeLabel>().is_err());
        assert_eq!(RegimeLabel::KNOWN.len() + RegimeLabel::NOVEL.len(), 7);
    }

    #[test]
    fn regime_ranges_hold_for_many_draws() {
        let cfg = TrafficConfig::default();
        for draw in 0..1200u64 {
            let seed = draw * 7 + 3;
            let step = draw * 13;
            let urban = cfg.sample_demand(RegimeLabel::Urban, 19, seed, step);
            for (b, d) in urban.iter().enumerate() {
                let range = if is_center_beam(b) { (40.0, 80.0) } else { (10.0, 30.0) };
                assert!(*d >= range.0 && *d <= range.1, "urban beam {b}: {d}");
            }
            let maritime = cfg.sample_demand(RegimeLabel::Maritime, 19, seed, step);
            assert!(maritime.iter().all(|d| (5.0..=15.0).contains(d)));
            let disaster = cfg.sample_demand(RegimeLabel::Disaster, 19, seed, step);
            assert!(disaster.iter().cloned().fold(0.0, f64::max) > 150.0);
            let hc = cfg.sample_demand(RegimeLabel::HotCold, 19, seed, step);
            assert_eq!(hc.iter().filter(|d| **d >= 80.0).count(), 3);
            assert_eq!(hc.iter().filter(|d| **d <= 5.0).count(), 16);
            let iot = cfg.sample_demand(RegimeLabel::IotBurst, 19, seed, step);
            assert!(iot.iter().all(|d| (2.0..=32.0).contains(d)));
        }
    }

    #[test]
    fn polar_means_half_period_apart() {
        let cfg = TrafficConfig::default();
        let half = cfg.polar_period_steps / 2;
        for beam in 0..19 {
            for t in [0u64, 37, 100, 250] {
                let a = cfg.polar_mean(beam, t);
                let b = cfg.polar_mean(beam, t + half);
                // sin(x) - sin(x + pi) = 2 sin(x)
                let phase = beam_ring(beam) as f64 * 2.0 * std::f64::consts::PI / 3.0;
                let x = 2.0 * std::f64::consts::PI * t as f64 / cfg.polar_period_steps as f64 + phase;
                assert!((a - b - 2.0 * cfg.polar_amplitude * x.sin()).abs() < 1e-9);
            }
        }
        // centre beam, quarter period: the sinusoid peak against its trough
        let peak = cfg.polar_mean(0, 100);
        let trough = cfg.polar_mean(0, 300);
        assert!((peak - trough - 2.0 * cfg.polar_amplitude).abs() < 1e-9);
    }

    #[test]
    fn demand_is_deterministic() {
        let cfg = TrafficConfig::default();
        for r in RegimeLabel::ALL {
            assert_eq!(
                cfg.sample_demand(r, 19, 42, 1234),
                cfg.sample_demand(r, 19, 42, 1234)
            );
            assert_ne!(
                cfg.sample_demand(r, 19, 42, 1234),
                cfg.sample_demand(r, 19, 43, 1234)
            );
        }
    }

    #[test]
    fn schedule_cycles() {
        let s = RegimeSchedule::cycle(&RegimeLabel::KNOWN, 500);
        assert_eq!(s.cycle_len(), 2000);
        assert_eq!(s.regime_at(0), RegimeLabel::Urban);
        assert_eq!(s.regime_at(499), RegimeLabel::Urban);
        assert_eq!(s.regime_at(500), RegimeLabel::Maritime);
        assert_eq!(s.regime_at(1999), RegimeLabel::Mixed);
        assert_eq!(s.regime_at(2000), RegimeLabel::Urban);
        assert_eq!(RegimeSchedule::constant(RegimeLabel::HotCold).regime_at(99), RegimeLabel::HotCold);
    }
}
