//! Reward architects: components that map a KPI snapshot to a reward weight
//! vector on the slow timescale.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::events::Event;
use crate::reward::WeightVector;
use crate::satenv::{KpiSnapshot, RegimeLabel};

mod guard;
mod llm;
mod mlp;
mod oscillation;

pub use guard::{CooldownGuard, ThrottleInterpolate};
pub use llm::{parse_weight_reply, LlmArchitect, ARCHITECT_PROMPT};
pub use mlp::{
    mlp_train, synthetic_dataset, KpiScaler, MlpArchitect, MlpArchitectModel, MlpTrainConfig,
    MlpTrainReport, TrainingSample,
};
pub use oscillation::{OscillatingArchitect, OscillationModel, SimulatedLlmTransport};

/// Changes smaller than this (L-infinity) are not counted as switches.
pub const SWITCH_TOLERANCE: f64 = 0.01;

/// What an architect may know about the run when asked for weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchitectContext {
    pub step: u64,
    pub current: WeightVector,
    /// Ground-truth regime label. Only the oracle architect reads it.
    pub regime: RegimeLabel,
}

pub trait Architect: Send {
    fn name(&self) -> String;

    /// Weight vector for the observed KPIs. Called at the first step and on
    /// every regime alarm.
    fn propose(&mut self, kpi: &KpiSnapshot, ctx: &ArchitectContext) -> Result<WeightVector>;

    /// Per-step hook for components that move weights between alarms.
    fn tick(&mut self, _step: u64, _current: &WeightVector) -> Option<WeightVector> {
        None
    }

    fn drain_events(&mut self) -> Vec<Event> {
        Vec::new()
    }
}

impl<A: Architect + ?Sized> Architect for Box<A> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn propose(&mut self, kpi: &KpiSnapshot, ctx: &ArchitectContext) -> Result<WeightVector> {
        (**self).propose(kpi, ctx)
    }
    fn tick(&mut self, step: u64, current: &WeightVector) -> Option<WeightVector> {
        (**self).tick(step, current)
    }
    fn drain_events(&mut self) -> Vec<Event> {
        (**self).drain_events()
    }
}

/// Expert weight profiles for the four known regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpertProfiles {
    pub urban: WeightVector,
    pub maritime: WeightVector,
    pub disaster: WeightVector,
    pub mixed: WeightVector,
}

impl Default for ExpertProfiles {
    fn default() -> Self {
        let w = |a| WeightVector::new(a).expect("static profile");
        ExpertProfiles {
            urban: w([1.2, 1.0, 0.3, 0.5, 0.5]),
            maritime: w([0.8, 0.6, 0.2, 0.3, 1.2]),
            disaster: w([0.6, 2.0, 0.2, 1.0, 0.8]),
            mixed: w([1.0, 1.0, 0.3, 0.5, 0.8]),
        }
    }
}

impl ExpertProfiles {
    /// Profile for a known regime; novel regimes map to the mixed profile.
    pub fn for_regime(&self, regime: RegimeLabel) -> WeightVector {
        match regime {
            RegimeLabel::Urban => self.urban,
            RegimeLabel::Maritime => self.maritime,
            RegimeLabel::Disaster => self.disaster,
            _ => self.mixed,
        }
    }

    pub fn as_map(&self) -> BTreeMap<RegimeLabel, WeightVector> {
        RegimeLabel::KNOWN
            .iter()
            .map(|&r| (r, self.for_regime(r)))
            .collect()
    }
}

/// Returns the same weights forever.
#[derive(Debug, Clone)]
pub struct FixedArchitect {
    pub weights: WeightVector,
}

impl Architect for FixedArchitect {
    fn name(&self) -> String {
        "fixed".into()
    }

    fn propose(&mut self, _kpi: &KpiSnapshot, _ctx: &ArchitectContext) -> Result<WeightVector> {
        Ok(self.weights)
    }
}

/// Threshold rules used by the rule-based architect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleThresholds {
    pub disaster_peak_mbps: f64,
    pub urban_mean_mbps: f64,
    pub urban_gini: f64,
    pub maritime_mean_mbps: f64,
    pub maritime_gini: f64,
}

impl Default for RuleThresholds {
    fn default() -> Self {
        RuleThresholds {
            disaster_peak_mbps: 120.0,
            urban_mean_mbps: 40.0,
            urban_gini: 0.3,
            maritime_mean_mbps: 20.0,
            maritime_gini: 0.2,
        }
    }
}

impl RuleThresholds {
    /// First matching rule wins: disaster, urban, maritime, then mixed.
    pub fn classify(&self, kpi: &KpiSnapshot) -> RegimeLabel {
        if kpi.peak_demand_mbps > self.disaster_peak_mbps {
            RegimeLabel::Disaster
        } else if kpi.mean_demand_mbps > self.urban_mean_mbps && kpi.gini > self.urban_gini {
            RegimeLabel::Urban
        } else if kpi.mean_demand_mbps < self.maritime_mean_mbps && kpi.gini < self.maritime_gini {
            RegimeLabel::Maritime
        } else {
            RegimeLabel::Mixed
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RuleArchitect {
    pub thresholds: RuleThresholds,
    pub profiles: ExpertProfiles,
}

impl RuleArchitect {
    pub fn classify(&self, kpi: &KpiSnapshot) -> RegimeLabel {
        self.thresholds.classify(kpi)
    }
}

impl Architect for RuleArchitect {
    fn name(&self) -> String {
        "rule".into()
    }

    fn propose(&mut self, kpi: &KpiSnapshot, _ctx: &ArchitectContext) -> Result<WeightVector> {
        Ok(self.profiles.for_regime(self.classify(kpi)))
    }
}

/// Looks up the true regime in a per-regime table. Used for the
/// constant-vs-switching studies, where classification error would confound
/// the comparison.
#[derive(Debug, Clone)]
pub struct OracleArchitect {
    pub table: BTreeMap<RegimeLabel, WeightVector>,
    pub fallback: WeightVector,
}

impl OracleArchitect {
    pub fn from_profiles(profiles: &ExpertProfiles) -> Self {
        OracleArchitect {
            table: profiles.as_map(),
            fallback: profiles.mixed,
        }
    }
}

impl Architect for OracleArchitect {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn propose(&mut self, _kpi: &KpiSnapshot, ctx: &ArchitectContext) -> Result<WeightVector> {
        Ok(*self.table.get(&ctx.regime).unwrap_or(&self.fallback))
    }
}

/// Number of applied changes larger than [`SWITCH_TOLERANCE`].
pub fn count_switches(trajectory: &[WeightVector]) -> usize {
    trajectory
        .windows(2)
        .filter(|w| w[0].linf_distance(&w[1]) > SWITCH_TOLERANCE)
        .count()
}
