//! Single-weight perturbation probes.
//!
//! Each of the five weights is scaled by `1 + delta` and `1 - delta` in turn
//! (then clamped) while the other four stay at the base profile. Every
//! configuration is trained with the same seeds as the unperturbed
//! baseline, so the rate difference isolates the weight.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anchors::AnchorEntry;
use crate::architects::{FixedArchitect, KpiScaler};
use crate::error::{Error, Result};
use crate::pool::parallel_map;
use crate::ppo::{train, RunSpec};
use crate::reward::{WeightVector, WEIGHT_NAMES};
use crate::satenv::{KpiSnapshot, KpiTracker, RegimeLabel, RegimeSchedule, TrafficConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Plus => 1.0,
            Direction::Minus => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Plus => "+",
            Direction::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub regime: RegimeLabel,
    pub base_weights: WeightVector,
    pub delta: f64,
    pub steps: u64,
    pub rounds: usize,
    /// One seed per round.
    pub seeds: Vec<u64>,
}

impl ProbeSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(0.0..1.0).contains(&self.delta) {
            errors.push(format!("probe delta must be in [0, 1), got {}", self.delta));
        }
        if self.steps == 0 {
            errors.push("probe steps must be >= 1".into());
        }
        if self.rounds == 0 {
            errors.push("probe rounds must be >= 1".into());
        }
        if self.seeds.len() < self.rounds {
            errors.push(format!(
                "probe needs {} seeds, got {}",
                self.rounds,
                self.seeds.len()
            ));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Base weights with one component scaled by `1 +/- delta`, clamped.
    pub fn perturbed(&self, index: usize, dir: Direction) -> Result<WeightVector> {
        let v = self.base_weights.get(index) * (1.0 + dir.sign() * self.delta);
        Ok(self.base_weights.with_component(index, v)?.clamp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub regime: RegimeLabel,
    pub weight_name: String,
    pub weight_index: usize,
    pub direction: Direction,
    pub weights: WeightVector,
    pub delta_rate_mbps: f64,
    pub baseline_rate_mbps: f64,
    pub per_round_rates: Vec<Option<f64>>,
    pub incomplete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongestAxis {
    pub weight_name: String,
    pub direction: Direction,
    pub delta_rate_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeBudget {
    pub trainings: u64,
    pub total_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub schema_version: u32,
    pub spec: ProbeSpec,
    /// Raw KPI centroid of the regime, used to key anchors.
    pub kpi_centroid: [f64; 5],
    pub baseline_rates: Vec<Option<f64>>,
    pub baseline_std_mbps: f64,
    pub results: Vec<ProbeResult>,
    pub strongest: Option<StrongestAxis>,
    pub budget: ProbeBudget,
}

/// Average KPI snapshot of `regime` over `samples` windows.
pub fn regime_kpi_centroid(
    traffic: &TrafficConfig,
    num_beams: usize,
    window: usize,
    regime: RegimeLabel,
    seed: u64,
    samples: usize,
) -> [f64; 5] {
    let mut tracker = KpiTracker::new(window);
    let mut acc = [0.0; 5];
    let total = window + samples.max(1);
    for t in 0..total {
        tracker.push(&traffic.sample_demand(regime, num_beams, seed, t as u64), 0.0);
        if t >= window {
            let k = tracker.snapshot().to_array();
            for i in 0..5 {
                acc[i] += k[i] / samples.max(1) as f64;
            }
        }
    }
    acc
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Run the baseline and all ten perturbations for every round.
/// `template` supplies the environment and PPO settings; its schedule,
/// step count and weights are overridden.
pub fn run_probe(spec: &ProbeSpec, template: &RunSpec, workers: usize) -> Result<ProbeReport> {
    spec.validate()?;
    let mut configs: Vec<(Option<(usize, Direction)>, WeightVector)> = vec![(None, spec.base_weights)];
    for i in 0..5 {
        for dir in [Direction::Plus, Direction::Minus] {
            configs.push((Some((i, dir)), spec.perturbed(i, dir)?));
        }
    }
    let mut jobs = Vec::new();
    for (c, (_, w)) in configs.iter().enumerate() {
        for r in 0..spec.rounds {
            jobs.push((c, r, *w));
        }
    }
    let rates: Vec<Option<f64>> = parallel_map(jobs.clone(), workers, |(_, r, w)| {
        let mut run = template.clone();
        run.schedule = RegimeSchedule::constant(spec.regime);
        run.steps = spec.steps;
        run.initial_weights = w;
        match train(&run, &mut FixedArchitect { weights: w }, spec.seeds[r]) {
            Ok(out) => Some(out.metrics.final_sum_rate_mbps),
            Err(e) => {
                log::warn!("probe round {r} with weights {:?} failed: {e}", w.as_array());
                None
            }
        }
    });
    let rate = |c: usize, r: usize| rates[c * spec.rounds + r];
    let baseline_rates: Vec<Option<f64>> = (0..spec.rounds).map(|r| rate(0, r)).collect();
    let ok_base: Vec<f64> = baseline_rates.iter().flatten().copied().collect();

    let mut results = Vec::new();
    for (c, (key, w)) in configs.iter().enumerate().skip(1) {
        let (index, direction) = key.expect("perturbed config");
        let per_round: Vec<Option<f64>> = (0..spec.rounds).map(|r| rate(c, r)).collect();
        let paired: Vec<(f64, f64)> = per_round
            .iter()
            .zip(&baseline_rates)
            .filter_map(|(p, b)| Some(((*p)?, (*b)?)))
            .collect();
        let pert: Vec<f64> = paired.iter().map(|p| p.0).collect();
        let base: Vec<f64> = paired.iter().map(|p| p.1).collect();
        let incomplete = paired.len() < spec.rounds;
        results.push(ProbeResult {
            regime: spec.regime,
            weight_name: WEIGHT_NAMES[index].to_string(),
            weight_index: index,
            direction,
            weights: *w,
            delta_rate_mbps: if paired.is_empty() { f64::NAN } else { mean(&pert) - mean(&base) },
            baseline_rate_mbps: mean(&base),
            per_round_rates: per_round,
            incomplete,
        });
    }
    let centroid = regime_kpi_centroid(
        &template.traffic,
        template.link.num_beams,
        template.env.kpi_window,
        spec.regime,
        spec.seeds[0],
        200,
    );
    Ok(ProbeReport {
        schema_version: 1,
        spec: spec.clone(),
        kpi_centroid: centroid,
        baseline_std_mbps: std_dev(&ok_base),
        strongest: strongest_axis(&results),
        baseline_rates,
        results,
        budget: ProbeBudget {
            trainings: (configs.len() * spec.rounds) as u64,
            total_steps: (configs.len() * spec.rounds) as u64 * spec.steps,
        },
    })
}

/// Largest positive rate gain. Ties go to the earlier weight, then `+`.
pub fn strongest_axis(results: &[ProbeResult]) -> Option<StrongestAxis> {
    let mut best: Option<&ProbeResult> = None;
    for r in results {
        if !(r.delta_rate_mbps > 0.0) {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                r.delta_rate_mbps > b.delta_rate_mbps
                    || (r.delta_rate_mbps == b.delta_rate_mbps
                        && (r.weight_index, r.direction) < (b.weight_index, b.direction))
            }
        };
        if better {
            best = Some(r);
        }
    }
    best.map(|r| StrongestAxis {
        weight_name: r.weight_name.clone(),
        direction: r.direction,
        delta_rate_mbps: r.delta_rate_mbps,
    })
}

impl ProbeReport {
    /// Baseline and perturbed configurations as anchor records, keyed by the
    /// scaled KPI centroid.
    pub fn anchor_entries(&self, scaler: &KpiScaler) -> Vec<AnchorEntry> {
        let kpi = scaler.transform(&KpiSnapshot::from_array(self.kpi_centroid));
        let regime = self.spec.regime.as_str();
        let base: Vec<f64> = self.baseline_rates.iter().flatten().copied().collect();
        let mut out = Vec::new();
        if !base.is_empty() {
            out.push(AnchorEntry {
                kpi,
                weights: self.spec.base_weights,
                performance_mbps: mean(&base),
                source: format!("probe:{regime}:baseline"),
            });
        }
        for r in &self.results {
            let rates: Vec<f64> = r.per_round_rates.iter().flatten().copied().collect();
            if rates.is_empty() {
                continue;
            }
            out.push(AnchorEntry {
                kpi,
                weights: r.weights,
                performance_mbps: mean(&rates),
                source: format!("probe:{regime}:{}{}", r.weight_name, r.direction.as_str()),
            });
        }
        out
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "regime",
            "weight",
            "direction",
            "delta_rate_mbps",
            "baseline_rate_mbps",
            "incomplete",
        ])?;
        for r in &self.results {
            w.write_record([
                r.regime.as_str(),
                &r.weight_name,
                r.direction.as_str(),
                &r.delta_rate_mbps.to_string(),
                &r.baseline_rate_mbps.to_string(),
                &r.incomplete.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalRow {
    pub regime: RegimeLabel,
    pub weight: Option<String>,
    pub delta_rate_mbps: Option<f64>,
    pub direction: Option<Direction>,
}

/// Strongest axis per probed regime.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CausalMap {
    pub rows: Vec<CausalRow>,
}

impl CausalMap {
    pub fn from_reports(reports: &[ProbeReport]) -> Self {
        CausalMap {
            rows: reports
                .iter()
                .map(|r| CausalRow {
                    regime: r.spec.regime,
                    weight: r.strongest.as_ref().map(|s| s.weight_name.clone()),
                    delta_rate_mbps: r.strongest.as_ref().map(|s| s.delta_rate_mbps),
                    direction: r.strongest.as_ref().map(|s| s.direction),
                })
                .collect(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("regime,weight,delta_rate_mbps,direction\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.regime,
                r.weight.as_deref().unwrap_or("none"),
                r.delta_rate_mbps.map(|d| d.to_string()).unwrap_or_default(),
                r.direction.map(|d| d.as_str()).unwrap_or("")
            ));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// Probe every regime in `regimes` with the same settings.
pub fn causal_map(
    regimes: &[RegimeLabel],
    template_spec: &ProbeSpec,
    template: &RunSpec,
    workers: usize,
) -> Result<(CausalMap, Vec<ProbeReport>)> {
    let mut reports = Vec::new();
    for &regime in regimes {
        let spec = ProbeSpec {
            regime,
            ..template_spec.clone()
        };
        reports.push(run_probe(&spec, template, workers)?);
    }
    Ok((CausalMap::from_reports(&reports), reports))
}
