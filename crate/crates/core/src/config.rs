//! Root configuration: loading with defaults, validation and unknown-key
//! warnings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::architects::{ExpertProfiles, MlpTrainConfig, OscillationModel, RuleThresholds};
use crate::detect::CusumConfig;
use crate::error::{Error, Result};
use crate::intent::SatisfactionConfig;
use crate::llm::LlmClientConfig;
use crate::ppo::{PpoConfig, RunSpec};
use crate::reward::WeightVector;
use crate::satenv::{EnvConfig, LinkConfig, RegimeLabel, RegimeSchedule, TrafficConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpSettings {
    /// Load a trained model from here instead of training one.
    pub model_path: Option<PathBuf>,
    pub samples_per_regime: usize,
    pub label_noise: f64,
    pub train: MlpTrainConfig,
    pub seed: u64,
}

impl Default for MlpSettings {
    fn default() -> Self {
        MlpSettings {
            model_path: None,
            samples_per_regime: 500,
            label_noise: 0.05,
            train: MlpTrainConfig::default(),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchitectSettings {
    pub profiles: ExpertProfiles,
    pub thresholds: RuleThresholds,
    /// Weights of the fixed architect; the mixed profile when absent.
    pub fixed_weights: Option<WeightVector>,
    pub cooldown_steps: u64,
    pub throttle_interval: u64,
    pub oscillation: OscillationModel,
    pub mlp: MlpSettings,
    pub llm: LlmClientConfig,
    pub anchor_top_k: usize,
    pub relative_clamp: f64,
}

impl Default for ArchitectSettings {
    fn default() -> Self {
        ArchitectSettings {
            profiles: ExpertProfiles::default(),
            thresholds: RuleThresholds::default(),
            fixed_weights: None,
            cooldown_steps: 50,
            throttle_interval: 1000,
            oscillation: OscillationModel::default(),
            mlp: MlpSettings::default(),
            llm: LlmClientConfig::default(),
            anchor_top_k: 5,
            relative_clamp: 0.3,
        }
    }
}

impl ArchitectSettings {
    pub fn fixed(&self) -> WeightVector {
        self.fixed_weights.unwrap_or(self.profiles.mixed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeSettings {
    pub delta: f64,
    pub steps: u64,
    pub rounds: usize,
    pub regimes: Vec<RegimeLabel>,
    /// Base weights; the expert profile of the regime when absent.
    pub base_weights: Option<WeightVector>,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            delta: 0.2,
            steps: 50_000,
            rounds: 3,
            regimes: RegimeLabel::NOVEL.to_vec(),
            base_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorSettings {
    pub path: Option<PathBuf>,
    pub sigma: f64,
}

impl Default for AnchorSettings {
    fn default() -> Self {
        AnchorSettings {
            path: None,
            sigma: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntentSettings {
    pub schedule_path: Option<PathBuf>,
    pub satisfaction: SatisfactionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RootConfig {
    pub link: LinkConfig,
    pub env: EnvConfig,
    pub traffic: TrafficConfig,
    pub cusum: CusumConfig,
    pub ppo: PpoConfig,
    pub seeds: Vec<u64>,
    pub steps: u64,
    /// Steps per regime when presets cycle through regimes.
    pub cycle_steps: u64,
    /// Explicit `(regime, duration)` schedule overriding the preset's cycle.
    pub regime_schedule: Option<Vec<(RegimeLabel, u64)>>,
    pub trace_every: u64,
    pub architect: ArchitectSettings,
    pub probe: ProbeSettings,
    pub anchors: AnchorSettings,
    pub intent: IntentSettings,
    pub output_dir: PathBuf,
    /// Parallel training runs; 0 uses every available core.
    pub workers: usize,
}

impl Default for RootConfig {
    fn default() -> Self {
        RootConfig {
            link: LinkConfig::default(),
            env: EnvConfig::default(),
            traffic: TrafficConfig::default(),
            cusum: CusumConfig::default(),
            ppo: PpoConfig::default(),
            seeds: vec![42, 123, 456],
            steps: 50_000,
            cycle_steps: 2_000,
            regime_schedule: None,
            trace_every: 10,
            architect: ArchitectSettings::default(),
            probe: ProbeSettings::default(),
            anchors: AnchorSettings::default(),
            intent: IntentSettings::default(),
            output_dir: PathBuf::from("runs"),
            workers: 0,
        }
    }
}

impl RootConfig {
    /// Every violation, not just the first.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        self.link.validate(&mut errors);
        self.env.validate(&mut errors);
        self.traffic.validate(self.link.num_beams, &mut errors);
        self.cusum.validate(&mut errors);
        self.ppo.validate(&mut errors);
        if self.seeds.is_empty() {
            errors.push("seeds must not be empty".into());
        }
        if self.steps == 0 {
            errors.push("steps must be > 0".into());
        }
        if self.cycle_steps == 0 {
            errors.push("cycle_steps must be > 0".into());
        }
        if self.trace_every == 0 {
            errors.push("trace_every must be > 0".into());
        }
        if let Some(s) = &self.regime_schedule {
            RegimeSchedule { segments: s.clone() }.validate(&mut errors);
        }
        let a = &self.architect;
        a.oscillation.validate(&mut errors);
        a.llm.validate(&mut errors);
        if a.throttle_interval == 0 {
            errors.push("architect.throttle_interval must be > 0".into());
        }
        if !(a.relative_clamp.is_finite() && a.relative_clamp >= 0.0) {
            errors.push("architect.relative_clamp must be >= 0".into());
        }
        if a.anchor_top_k == 0 {
            errors.push("architect.anchor_top_k must be >= 1".into());
        }
        let m = &a.mlp;
        if m.samples_per_regime < 1 {
            errors.push("architect.mlp.samples_per_regime must be >= 1".into());
        }
        if !(m.label_noise.is_finite() && m.label_noise >= 0.0) {
            errors.push("architect.mlp.label_noise must be >= 0".into());
        }
        if !(m.train.lr.is_finite() && m.train.lr > 0.0) {
            errors.push("architect.mlp.train.lr must be > 0".into());
        }
        if !(0.0..1.0).contains(&m.train.momentum) {
            errors.push("architect.mlp.train.momentum must be in [0, 1)".into());
        }
        if m.train.batch_size == 0 {
            errors.push("architect.mlp.train.batch_size must be >= 1".into());
        }
        if !(m.train.holdout_fraction > 0.0 && m.train.holdout_fraction < 1.0) {
            errors.push("architect.mlp.train.holdout_fraction must be in (0, 1)".into());
        }
        let p = &self.probe;
        if !(0.0..1.0).contains(&p.delta) {
            errors.push(format!("probe.delta must be in [0, 1), got {}", p.delta));
        }
        if p.steps == 0 {
            errors.push("probe.steps must be > 0".into());
        }
        if p.rounds == 0 {
            errors.push("probe.rounds must be >= 1".into());
        }
        if p.regimes.is_empty() {
            errors.push("probe.regimes must not be empty".into());
        }
        if !(self.anchors.sigma.is_finite() && self.anchors.sigma > 0.0) {
            errors.push("anchors.sigma must be > 0".into());
        }
        self.intent.satisfaction.validate(&mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Parse a JSON document. Missing fields take defaults; unknown keys are
    /// returned as warnings.
    pub fn from_json_str(text: &str) -> Result<(Self, Vec<String>)> {
        let value: Value = if text.trim().is_empty() {
            Value::Object(Default::default())
        } else {
            serde_json::from_str(text)?
        };
        let defaults = serde_json::to_value(RootConfig::default())?;
        let mut warnings = Vec::new();
        unknown_keys(&value, &defaults, "", &mut warnings);
        let cfg: RootConfig = serde_json::from_value(value)
            .map_err(|e| Error::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok((cfg, warnings))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (cfg, warnings) = Self::from_json_str(&text)?;
        for w in warnings {
            log::warn!("{}: {w}", path.display());
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn worker_count(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }

    /// Run template for `schedule`.
    pub fn run_spec(&self, schedule: RegimeSchedule, steps: u64) -> RunSpec {
        RunSpec {
            link: self.link.clone(),
            env: self.env.clone(),
            traffic: self.traffic.clone(),
            schedule,
            cusum: self.cusum.clone(),
            ppo: self.ppo.clone(),
            steps,
            initial_weights: self.architect.fixed(),
            trace_every: self.trace_every,
        }
    }
}

fn unknown_keys(value: &Value, known: &Value, path: &str, out: &mut Vec<String>) {
    let (Value::Object(obj), Value::Object(known_obj)) = (value, known) else {
        return;
    };
    for (k, v) in obj {
        let here = if path.is_empty() {
            k.clone()
        } else {
            format!("{path}.{k}")
        };
        match known_obj.get(k) {
            Some(kv) => unknown_keys(v, kv, &here, out),
            None => out.push(format!("unknown key '{here}' ignored")),
        }
    }
}
