use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::link::{shannon_rate, LinkConfig};
use super::stats::{gini, jain, ls_slope};
use super::traffic::{RegimeLabel, TrafficConfig};
use crate::error::{Error, Result};
use crate::rng::stream;

/// Environment parameters beyond the link budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub queue_capacity_mbit: f64,
    pub step_duration_s: f64,
    /// A beam is in outage when it is served less than this fraction of its demand.
    pub outage_fraction: f64,
    pub kpi_window: usize,
    /// Demand scale used to normalize the observation.
    pub demand_norm_mbps: f64,
    /// Rigged mode for probe validation: outage, switching, queue and
    /// fairness terms are pinned to 0 so the reward reduces to `w_r * R`.
    pub sum_rate_only: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            queue_capacity_mbit: 100.0,
            step_duration_s: 1.0,
            outage_fraction: 0.5,
            kpi_window: 10,
            demand_norm_mbps: 100.0,
            sum_rate_only: false,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self, errors: &mut Vec<String>) {
        for (name, v) in [
            ("queue_capacity_mbit", self.queue_capacity_mbit),
            ("step_duration_s", self.step_duration_s),
            ("demand_norm_mbps", self.demand_norm_mbps),
        ] {
            if !(v.is_finite() && v > 0.0) {
                errors.push(format!("env.{name} must be finite and > 0 (got {v})"));
            }
        }
        if !(0.0..=1.0).contains(&self.outage_fraction) {
            errors.push("env.outage_fraction must be in [0, 1]".into());
        }
        if self.kpi_window < 2 {
            errors.push("env.kpi_window must be >= 2".into());
        }
    }
}

/// MDP state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub demand_mbps: Vec<f64>,
    pub queue_mbits: Vec<f64>,
    pub snr_linear: Vec<f64>,
    pub prev_alloc: Vec<f64>,
    pub step_index: u64,
}

impl EnvState {
    /// Observation layout: demand / norm, queue fill, ln(snr) / 3, prev
    /// allocation scaled by the beam count.
    pub fn observation(&self, env: &EnvConfig) -> Vec<f64> {
        let n = self.demand_mbps.len();
        let mut obs = Vec::with_capacity(4 * n);
        obs.extend(self.demand_mbps.iter().map(|d| d / env.demand_norm_mbps));
        obs.extend(self.queue_mbits.iter().map(|q| q / env.queue_capacity_mbit));
        obs.extend(self.snr_linear.iter().map(|s| s.max(1e-6).ln() / 3.0));
        obs.extend(self.prev_alloc.iter().map(|a| a * n as f64));
        obs
    }
}

pub fn observation_dim(num_beams: usize) -> usize {
    4 * num_beams
}

/// Raw reward terms; all penalties are non-negative magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    /// Served / demanded, clamped to [0, 1]; 0 when nothing is demanded.
    pub sum_rate_norm: f64,
    /// Number of beams in outage (raw count).
    pub outage_count: f64,
    /// L1 distance between this and the previous allocation.
    pub switching: f64,
    /// Queue overflow summed over beams, in units of one beam's queue capacity.
    pub queue_overflow: f64,
    /// Jain index of the served rates; 1 on an all-zero vector.
    pub fairness: f64,
}

/// Five-feature KPI vector over the trailing window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpiSnapshot {
    pub mean_demand_mbps: f64,
    pub peak_demand_mbps: f64,
    pub gini: f64,
    pub outage_rate: f64,
    /// Least-squares slope of the mean beam demand over the window, Mbps/step.
    pub demand_trend: f64,
}

impl KpiSnapshot {
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.mean_demand_mbps,
            self.peak_demand_mbps,
            self.gini,
            self.outage_rate,
            self.demand_trend,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        KpiSnapshot {
            mean_demand_mbps: a[0],
            peak_demand_mbps: a[1],
            gini: a[2],
            outage_rate: a[3],
            demand_trend: a[4],
        }
    }

    /// KPI of a single demand vector with a given outage rate.
    pub fn of_demand(demand: &[f64], outage_rate: f64) -> Self {
        let mean = demand.iter().sum::<f64>() / demand.len().max(1) as f64;
        KpiSnapshot {
            mean_demand_mbps: mean,
            peak_demand_mbps: demand.iter().cloned().fold(0.0, f64::max),
            gini: gini(demand).unwrap_or(0.0),
            outage_rate,
            demand_trend: 0.0,
        }
    }
}

/// Trailing window of demand vectors and outage rates.
#[derive(Debug, Clone)]
pub struct KpiTracker {
    window: usize,
    demand: VecDeque<Vec<f64>>,
    outage: VecDeque<f64>,
}

impl KpiTracker {
    pub fn new(window: usize) -> Self {
        KpiTracker {
            window: window.max(1),
            demand: VecDeque::new(),
            outage: VecDeque::new(),
        }
    }

    pub fn push(&mut self, demand: &[f64], outage_rate: f64) {
        if self.demand.len() == self.window {
            self.demand.pop_front();
            self.outage.pop_front();
        }
        self.demand.push_back(demand.to_vec());
        self.outage.push_back(outage_rate);
    }

    pub fn snapshot(&self) -> KpiSnapshot {
        let Some(first) = self.demand.front() else {
            return KpiSnapshot::from_array([0.0; 5]);
        };
        let k = self.demand.len() as f64;
        let mut avg = vec![0.0; first.len()];
        for d in &self.demand {
            for (a, x) in avg.iter_mut().zip(d) {
                *a += x / k;
            }
        }
        let means: Vec<f64> = self
            .demand
            .iter()
            .map(|d| d.iter().sum::<f64>() / d.len() as f64)
            .collect();
        let mut kpi = KpiSnapshot::of_demand(&avg, self.outage.iter().sum::<f64>() / k);
        kpi.demand_trend = ls_slope(&means);
        kpi
    }
}

/// Per-step accounting produced by [`evaluate_allocation`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepEval {
    pub served_mbps: Vec<f64>,
    pub next_queue_mbits: Vec<f64>,
    pub terms: RewardTerms,
    pub outage_beams: usize,
}

/// Apply an allocation to a state: serve `min(capacity, demand + queue)` per
/// beam, carry the rest over in the queue and compute the reward terms.
pub fn evaluate_allocation(
    state: &EnvState,
    action: &[f64],
    link: &LinkConfig,
    env: &EnvConfig,
) -> Result<StepEval> {
    let n = state.demand_mbps.len();
    if action.len() != n {
        return Err(Error::Domain(format!(
            "action has {} components, expected {n}",
            action.len()
        )));
    }
    let dt = env.step_duration_s;
    let qcap = env.queue_capacity_mbit;
    let mut served = Vec::with_capacity(n);
    let mut queue = Vec::with_capacity(n);
    let mut overflow = 0.0;
    let mut outage = 0usize;
    for b in 0..n {
        let capacity = shannon_rate(action[b], state.snr_linear[b], link)?;
        let backlog = state.queue_mbits[b] + state.demand_mbps[b] * dt;
        let served_mbit = (capacity * dt).min(backlog);
        let residual = (backlog - served_mbit).max(0.0);
        queue.push(residual.min(qcap));
        overflow += (residual - qcap).max(0.0);
        let rate = served_mbit / dt;
        let demand = state.demand_mbps[b];
        if demand > 0.0 && rate < env.outage_fraction * demand {
            outage += 1;
        }
        served.push(rate);
    }
    let demand_sum: f64 = state.demand_mbps.iter().sum();
    let served_sum: f64 = served.iter().sum();
    let sum_rate_norm = if demand_sum > 0.0 {
        (served_sum / demand_sum).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let switching: f64 = action
        .iter()
        .zip(&state.prev_alloc)
        .map(|(a, p)| (a - p).abs())
        .sum();
    let mut terms = RewardTerms {
        sum_rate_norm,
        outage_count: outage as f64,
        switching,
        queue_overflow: overflow / qcap,
        fairness: jain(&served),
    };
    if env.sum_rate_only {
        terms.outage_count = 0.0;
        terms.switching = 0.0;
        terms.queue_overflow = 0.0;
        terms.fairness = 0.0;
    }
    Ok(StepEval {
        served_mbps: served,
        next_queue_mbits: queue,
        terms,
        outage_beams: outage,
    })
}

/// Project a raw vector onto `{a >= 0, sum a <= 1}` by clipping negatives
/// and L1-rescaling when the sum exceeds one.
pub fn project_allocation(raw: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("action component {i}")));
    }
    let mut a: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = a.iter().sum();
    if s > 1.0 {
        a.iter_mut().for_each(|v| *v /= s);
    }
    Ok(a)
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub terms: RewardTerms,
    pub kpi: KpiSnapshot,
    pub served_mbps: Vec<f64>,
    pub sum_rate_mbps: f64,
    pub outage_beams: usize,
    /// Regime in force while the step was served.
    pub regime: RegimeLabel,
}

/// The multi-beam scheduling environment for one run.
#[derive(Debug, Clone)]
pub struct SatEnv {
    link: LinkConfig,
    env: EnvConfig,
    traffic: TrafficConfig,
    seed: u64,
    regime: RegimeLabel,
    state: EnvState,
    snr_rng: ChaCha8Rng,
    tracker: KpiTracker,
}

impl SatEnv {
    pub fn new(
        link: LinkConfig,
        env: EnvConfig,
        traffic: TrafficConfig,
        regime: RegimeLabel,
        seed: u64,
    ) -> Self {
        let n = link.num_beams;
        let mut snr_rng = stream(seed, &[0x5A7]);
        let snr = link.draw_snr(&mut snr_rng);
        let demand = traffic.sample_demand(regime, n, seed, 0);
        let tracker = KpiTracker::new(env.kpi_window);
        SatEnv {
            state: EnvState {
                demand_mbps: demand,
                queue_mbits: vec![0.0; n],
                snr_linear: snr,
                prev_alloc: vec![0.0; n],
                step_index: 0,
            },
            link,
            env,
            traffic,
            seed,
            regime,
            snr_rng,
            tracker,
        }
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn regime(&self) -> RegimeLabel {
        self.regime
    }

    pub fn num_beams(&self) -> usize {
        self.link.num_beams
    }

    pub fn link(&self) -> &LinkConfig {
        &self.link
    }

    pub fn env_config(&self) -> &EnvConfig {
        &self.env
    }

    pub fn observation(&self) -> Vec<f64> {
        self.state.observation(&self.env)
    }

    pub fn kpi(&self) -> KpiSnapshot {
        self.tracker.snapshot()
    }

    /// Serve the current demand with `action`, then advance to the next
    /// step whose demand is drawn from `next_regime`.
    pub fn step(&mut self, action: &[f64], next_regime: RegimeLabel) -> Result<StepOutcome> {
        if let Some(i) = action.iter().position(|v| v.is_nan()) {
            return Err(Error::NonFinite(format!(
                "action component {i} at step {}",
                self.state.step_index
            )));
        }
        let sum: f64 = action.iter().sum();
        let feasible = action.iter().all(|v| (0.0..=1.0).contains(v)) && sum <= 1.0 + 1e-9;
        let action = if feasible {
            action.to_vec()
        } else {
            project_allocation(action)?
        };
        let action: Vec<f64> = action.iter().map(|v| v.min(1.0)).collect();
        let eval = evaluate_allocation(&self.state, &action, &self.link, &self.env)?;
        let n = self.link.num_beams;
        self.tracker
            .push(&self.state.demand_mbps, eval.outage_beams as f64 / n as f64);
        let served_regime = self.regime;

        let next_step = self.state.step_index + 1;
        self.regime = next_regime;
        self.state = EnvState {
            demand_mbps: self
                .traffic
                .sample_demand(next_regime, n, self.seed, next_step),
            queue_mbits: eval.next_queue_mbits,
            snr_linear: self.link.draw_snr(&mut self.snr_rng),
            prev_alloc: action,
            step_index: next_step,
        };
        let sum_rate_mbps = eval.served_mbps.iter().sum();
        Ok(StepOutcome {
            terms: eval.terms,
            kpi: self.tracker.snapshot(),
            served_mbps: eval.served_mbps,
            sum_rate_mbps,
            outage_beams: eval.outage_beams,
            regime: served_regime,
        })
    }
}
