//! CUSUM change-point detection over KPI streams.
//!
//! Each detector runs the recursion
//!
//! ```text
//! S_t = max(0, S_{t-1} + (x_t - mu0) - delta)
//! ```
//!
//! together with its mirror on `-x`, so shifts in either direction are
//! caught. `mu0` and the reference deviation come from a trailing window and
//! are frozen while either statistic is positive. An alarm fires when a
//! statistic exceeds `threshold_sigmas` window deviations and at least
//! `min_interval_steps` have passed since the previous alarm.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::events::Event;
use crate::satenv::KpiSnapshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CusumConfig {
    pub window: usize,
    pub threshold_sigmas: f64,
    pub slack: f64,
    pub min_interval_steps: u64,
}

impl Default for CusumConfig {
    fn default() -> Self {
        CusumConfig {
            window: 10,
            threshold_sigmas: 1.0,
            slack: 0.0,
            min_interval_steps: 50,
        }
    }
}

impl CusumConfig {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if self.window < 2 {
            errors.push("cusum.window must be >= 2".into());
        }
        if !(self.threshold_sigmas.is_finite() && self.threshold_sigmas > 0.0) {
            errors.push("cusum.threshold_sigmas must be > 0".into());
        }
        if !(self.slack.is_finite() && self.slack >= 0.0) {
            errors.push("cusum.slack must be >= 0".into());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Up,
    Down,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Up => "up",
            Side::Down => "down",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CusumState {
    pub statistic_up: f64,
    pub statistic_down: f64,
    pub mean_est: f64,
    pub std_est: f64,
    pub last_alarm_step: Option<u64>,
}

impl CusumState {
    pub fn statistic(&self) -> f64 {
        self.statistic_up.max(self.statistic_down)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alarm {
    pub step: u64,
    pub side: Side,
    pub statistic: f64,
    pub threshold: f64,
}

/// What happened on one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detection {
    Quiet,
    Alarm(Alarm),
    /// The threshold was crossed inside the minimum interval. The statistics
    /// restart but nothing is signalled.
    Suppressed(Alarm),
}

impl Detection {
    pub fn alarm(&self) -> Option<Alarm> {
        match self {
            Detection::Alarm(a) => Some(*a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CusumDetector {
    cfg: CusumConfig,
    state: CusumState,
    window: VecDeque<f64>,
    suppressed: u64,
}

impl CusumDetector {
    pub fn new(cfg: CusumConfig) -> Self {
        CusumDetector {
            window: VecDeque::with_capacity(cfg.window + 1),
            cfg,
            state: CusumState {
                statistic_up: 0.0,
                statistic_down: 0.0,
                mean_est: 0.0,
                std_est: 0.0,
                last_alarm_step: None,
            },
            suppressed: 0,
        }
    }

    pub fn state(&self) -> &CusumState {
        &self.state
    }

    pub fn suppressed_count(&self) -> u64 {
        self.suppressed
    }

    pub fn is_warm(&self) -> bool {
        self.window.len() >= self.cfg.window
    }

    fn estimate(&mut self) {
        let n = self.window.len() as f64;
        // offset by the first sample so a constant window gives exactly that constant
        let origin = self.window[0];
        let mean_off = self.window.iter().map(|x| x - origin).sum::<f64>() / n;
        let var = self
            .window
            .iter()
            .map(|x| (x - origin - mean_off).powi(2))
            .sum::<f64>()
            / n;
        self.state.mean_est = origin + mean_off;
        self.state.std_est = var.sqrt();
    }

    fn threshold(&self) -> f64 {
        let floor = 1e-9 * self.state.mean_est.abs().max(1.0);
        self.cfg.threshold_sigmas * self.state.std_est.max(floor)
    }

    /// Feed one observation. Non-finite samples are ignored.
    pub fn update(&mut self, x: f64, step: u64) -> Detection {
        if !x.is_finite() {
            log::debug!("cusum: ignoring non-finite sample at step {step}");
            return Detection::Quiet;
        }
        if !self.is_warm() {
            self.window.push_back(x);
            if self.is_warm() {
                self.estimate();
            }
            return Detection::Quiet;
        }
        let mu0 = self.state.mean_est;
        let delta = self.cfg.slack;
        self.state.statistic_up = (self.state.statistic_up + (x - mu0) - delta).max(0.0);
        self.state.statistic_down = (self.state.statistic_down + (mu0 - x) - delta).max(0.0);
        self.window.push_back(x);
        if self.window.len() > self.cfg.window {
            self.window.pop_front();
        }

        let threshold = self.threshold();
        let (side, statistic) = if self.state.statistic_up >= self.state.statistic_down {
            (Side::Up, self.state.statistic_up)
        } else {
            (Side::Down, self.state.statistic_down)
        };
        if statistic > threshold {
            let alarm = Alarm {
                step,
                side,
                statistic,
                threshold,
            };
            let armed = self
                .state
                .last_alarm_step
                .is_none_or(|last| step.saturating_sub(last) >= self.cfg.min_interval_steps);
            self.state.statistic_up = 0.0;
            self.state.statistic_down = 0.0;
            self.estimate();
            if armed {
                self.state.last_alarm_step = Some(step);
                return Detection::Alarm(alarm);
            }
            self.suppressed += 1;
            return Detection::Suppressed(alarm);
        }
        if self.state.statistic_up == 0.0 && self.state.statistic_down == 0.0 {
            self.estimate();
        }
        Detection::Quiet
    }
}

/// KPI features watched for regime changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitoredKpi {
    Gini,
    PeakDemand,
}

impl MonitoredKpi {
    pub fn as_str(self) -> &'static str {
        match self {
            MonitoredKpi::Gini => "gini",
            MonitoredKpi::PeakDemand => "peak_demand",
        }
    }

    fn read(self, kpi: &KpiSnapshot) -> f64 {
        match self {
            MonitoredKpi::Gini => kpi.gini,
            MonitoredKpi::PeakDemand => kpi.peak_demand_mbps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeAlarm {
    pub kpi: MonitoredKpi,
    pub alarm: Alarm,
}

impl RegimeAlarm {
    pub fn to_event(&self) -> Event {
        Event::RegimeAlarm {
            step: self.alarm.step,
            kpi: self.kpi.as_str().to_string(),
            side: self.alarm.side.as_str().to_string(),
            statistic: self.alarm.statistic,
            threshold: self.alarm.threshold,
        }
    }
}

/// One detector per monitored KPI; the regime-change signal is the OR of
/// their alarms, itself rate-limited to the same minimum interval.
#[derive(Debug, Clone)]
pub struct RegimeDetector {
    detectors: Vec<(MonitoredKpi, CusumDetector)>,
    min_interval: u64,
    last_signal: Option<u64>,
}

impl RegimeDetector {
    pub fn new(cfg: &CusumConfig) -> Self {
        RegimeDetector {
            detectors: [MonitoredKpi::Gini, MonitoredKpi::PeakDemand]
                .into_iter()
                .map(|k| (k, CusumDetector::new(cfg.clone())))
                .collect(),
            min_interval: cfg.min_interval_steps,
            last_signal: None,
        }
    }

    pub fn update(&mut self, kpi: &KpiSnapshot, step: u64) -> Option<RegimeAlarm> {
        let mut first = None;
        for (which, det) in &mut self.detectors {
            if let Detection::Alarm(alarm) = det.update(which.read(kpi), step) {
                first.get_or_insert(RegimeAlarm { kpi: *which, alarm });
            }
        }
        let signal = first?;
        if self
            .last_signal
            .is_some_and(|last| step.saturating_sub(last) < self.min_interval)
        {
            return None;
        }
        self.last_signal = Some(step);
        Some(signal)
    }
}
