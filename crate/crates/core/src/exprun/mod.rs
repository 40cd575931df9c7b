//! Experiment presets: fan runs out over architects and seeds, aggregate
//! per-seed results and write reports, traces and plot data.

mod plot;
mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use plot::{emit_plots, line_chart, read_trace, Series};
pub use stats::{oscillation_stats, ComponentStats, MeanStd, OscillationStats};

use crate::anchors::{AnchorEntry, AnchorStore};
use crate::architects::{
    mlp_train, synthetic_dataset, Architect, CooldownGuard, FixedArchitect, KpiScaler,
    LlmArchitect, MlpArchitect, MlpArchitectModel, MlpTrainReport, OracleArchitect,
    RuleArchitect, SimulatedLlmTransport, ThrottleInterpolate,
};
use crate::config::RootConfig;
use crate::error::{Error, Result};
use crate::events::{write_jsonl, Event};
use crate::intent::{
    default_schedule, load_schedule, parse_intent_llm, parse_intent_rule, resolve_schedule,
    score_phases, IntentArchitect, IntentPhase, IntentScore,
};
use crate::llm::{ChatTransport, HttpTransport};
use crate::pool::parallel_map;
use crate::ppo::{train, RunMetrics, RunOutput, TracePoint};
use crate::probe::{causal_map, regime_kpi_centroid, CausalMap, ProbeReport, ProbeSpec};
use crate::reward::WeightVector;
use crate::rng::derive_seed;
use crate::satenv::{RegimeLabel, RegimeSchedule};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    CompareKnown,
    GeneralizeNovel,
    Ablation,
    Dilemma,
    PathC,
    ProbeAll,
    RagEval,
    IntentPhases,
}

impl PresetName {
    pub const ALL: [PresetName; 8] = [
        PresetName::CompareKnown,
        PresetName::GeneralizeNovel,
        PresetName::Ablation,
        PresetName::Dilemma,
        PresetName::PathC,
        PresetName::ProbeAll,
        PresetName::RagEval,
        PresetName::IntentPhases,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::CompareKnown => "compare_known",
            PresetName::GeneralizeNovel => "generalize_novel",
            PresetName::Ablation => "ablation",
            PresetName::Dilemma => "dilemma",
            PresetName::PathC => "path_c",
            PresetName::ProbeAll => "probe_all",
            PresetName::RagEval => "rag_eval",
            PresetName::IntentPhases => "intent_phases",
        }
    }

    fn regimes(self) -> &'static [RegimeLabel] {
        match self {
            PresetName::GeneralizeNovel | PresetName::ProbeAll | PresetName::RagEval => &RegimeLabel::NOVEL,
            _ => &RegimeLabel::KNOWN,
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().replace('-', "_");
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown preset '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: PresetName,
    pub seeds: Vec<u64>,
    pub steps: u64,
    pub regime_schedule: Vec<(RegimeLabel, u64)>,
}

impl ExperimentPreset {
    /// Seeds, steps and schedule from `cfg`. Without an explicit schedule the
    /// preset cycles through its regime family every `cfg.cycle_steps`.
    pub fn from_config(name: PresetName, cfg: &RootConfig) -> Self {
        let regime_schedule = cfg.regime_schedule.clone().unwrap_or_else(|| {
            name.regimes().iter().map(|&r| (r, cfg.cycle_steps)).collect()
        });
        ExperimentPreset {
            name,
            seeds: cfg.seeds.clone(),
            steps: cfg.steps,
            regime_schedule,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.seeds.is_empty() {
            errors.push("preset seeds must not be empty".to_string());
        }
        if self.steps == 0 {
            errors.push("preset steps must be > 0".into());
        }
        self.schedule().validate(&mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn schedule(&self) -> RegimeSchedule {
        RegimeSchedule {
            segments: self.regime_schedule.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArchitectKind {
    Fixed,
    Rule,
    /// Per-regime expert profile looked up from the true regime.
    Oracle,
    Mlp,
    /// Chat-model architect: the configured endpoint, or the simulated
    /// oscillating model when none is configured.
    Llm { anchors: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentParser {
    Rule,
    Llm,
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub label: String,
    pub architect: ArchitectKind,
    pub cooldown: Option<u64>,
    pub throttle: Option<u64>,
    pub intent: Option<IntentParser>,
}

impl ArmSpec {
    fn new(label: &str, architect: ArchitectKind) -> Self {
        ArmSpec {
            label: label.into(),
            architect,
            cooldown: None,
            throttle: None,
            intent: None,
        }
    }

    fn cooldown(mut self, steps: u64) -> Self {
        self.cooldown = (steps > 0).then_some(steps);
        self
    }
}

/// The rows each preset compares.
pub fn arms_for(name: PresetName, cfg: &RootConfig) -> Vec<ArmSpec> {
    let cd = cfg.architect.cooldown_steps;
    let llm = ArchitectKind::Llm { anchors: false };
    let architects = || {
        vec![
            ArmSpec::new("fixed", ArchitectKind::Fixed),
            ArmSpec::new("rule", ArchitectKind::Rule).cooldown(cd),
            ArmSpec::new("mlp", ArchitectKind::Mlp).cooldown(cd),
            ArmSpec::new("ft_llm", llm).cooldown(cd),
        ]
    };
    match name {
        PresetName::CompareKnown | PresetName::GeneralizeNovel => architects(),
        PresetName::Ablation => vec![
            ArmSpec::new("mlp", ArchitectKind::Mlp).cooldown(cd),
            ArmSpec::new("mlp_no_cooldown", ArchitectKind::Mlp),
            ArmSpec::new("rule", ArchitectKind::Rule).cooldown(cd),
            ArmSpec::new("fixed", ArchitectKind::Fixed),
            ArmSpec::new("ft_llm", llm).cooldown(cd),
        ],
        PresetName::Dilemma => vec![
            ArmSpec::new("constant", ArchitectKind::Fixed),
            ArmSpec::new("switching", ArchitectKind::Oracle).cooldown(cd),
        ],
        PresetName::PathC => vec![
            ArmSpec::new("constant", ArchitectKind::Fixed),
            ArmSpec::new("switching", ArchitectKind::Oracle).cooldown(cd),
            ArmSpec {
                throttle: Some(cfg.architect.throttle_interval),
                ..ArmSpec::new("throttled", ArchitectKind::Oracle).cooldown(cd)
            },
        ],
        PresetName::RagEval => vec![
            ArmSpec::new("ft_llm", llm).cooldown(cd),
            ArmSpec::new("ft_llm_anchored", ArchitectKind::Llm { anchors: true }).cooldown(cd),
        ],
        PresetName::IntentPhases => {
            let mut arms = vec![
                ArmSpec::new("mlp", ArchitectKind::Mlp).cooldown(cd),
                ArmSpec {
                    intent: Some(IntentParser::Rule),
                    ..ArmSpec::new("intent_rule", ArchitectKind::Mlp).cooldown(cd)
                },
            ];
            if cfg.architect.llm.is_configured() {
                arms.push(ArmSpec {
                    intent: Some(IntentParser::Llm),
                    ..ArmSpec::new("intent_llm", ArchitectKind::Mlp).cooldown(cd)
                });
            }
            arms
        }
        PresetName::ProbeAll => Vec::new(),
    }
}

/// Models and stores shared by all runs of a preset.
pub struct Resources {
    pub mlp: Option<MlpArchitectModel>,
    pub mlp_training: Option<MlpTrainReport>,
    pub anchors: Option<AnchorStore>,
    pub rule_phases: Vec<IntentPhase>,
    pub llm_phases: Vec<IntentPhase>,
    pub events: Vec<Event>,
}

/// Train (or load) the MLP architect on the synthetic known-regime dataset.
pub fn prepare_mlp(cfg: &RootConfig) -> Result<(MlpArchitectModel, Option<MlpTrainReport>)> {
    let m = &cfg.architect.mlp;
    if let Some(path) = &m.model_path {
        return Ok((MlpArchitectModel::load(path)?, None));
    }
    let data = synthetic_dataset(
        &cfg.traffic,
        cfg.link.num_beams,
        cfg.env.kpi_window,
        &cfg.architect.profiles,
        m.samples_per_regime,
        m.label_noise,
        m.seed,
    )?;
    let (model, report) = mlp_train(&data, &m.train, m.seed)?;
    log::info!(
        "mlp architect trained: val mse {:.5} -> {:.5}",
        report.initial_val_mse,
        report.best_val_mse
    );
    Ok((model, Some(report)))
}

/// Expert profiles keyed by their regime's KPI centroid. Used when no
/// probe-derived store is available; every entry gets the same performance.
pub fn profile_anchor_store(cfg: &RootConfig) -> Result<AnchorStore> {
    let mut store = AnchorStore::new(cfg.anchors.sigma)?;
    let scaler = KpiScaler::default();
    let seed = cfg.seeds.first().copied().unwrap_or(0);
    let entries: Vec<AnchorEntry> = RegimeLabel::KNOWN
        .iter()
        .map(|&r| {
            let c = regime_kpi_centroid(&cfg.traffic, cfg.link.num_beams, cfg.env.kpi_window, r, seed, 200);
            AnchorEntry {
                kpi: scaler.transform(&crate::satenv::KpiSnapshot::from_array(c)),
                weights: cfg.architect.profiles.for_regime(r),
                performance_mbps: 1.0,
                source: format!("profile:{r}"),
            }
        })
        .collect();
    store.ingest(entries);
    Ok(store)
}

pub fn prepare_resources(cfg: &RootConfig, preset: &ExperimentPreset, arms: &[ArmSpec]) -> Result<Resources> {
    let mut res = Resources {
        mlp: None,
        mlp_training: None,
        anchors: None,
        rule_phases: Vec::new(),
        llm_phases: Vec::new(),
        events: Vec::new(),
    };
    if arms.iter().any(|a| a.architect == ArchitectKind::Mlp) {
        let (m, r) = prepare_mlp(cfg)?;
        res.mlp = Some(m);
        res.mlp_training = r;
    }
    if arms.iter().any(|a| a.architect == ArchitectKind::Llm { anchors: true }) {
        res.anchors = Some(match &cfg.anchors.path {
            Some(p) if p.is_file() => AnchorStore::load(p, cfg.anchors.sigma)?,
            _ => {
                log::warn!("no anchor store found; seeding anchors from the expert profiles");
                profile_anchor_store(cfg)?
            }
        });
    }
    if arms.iter().any(|a| a.intent.is_some()) {
        let schedule = match &cfg.intent.schedule_path {
            Some(p) => load_schedule(p)?,
            None => default_schedule(preset.steps),
        };
        res.rule_phases = resolve_schedule(&schedule, parse_intent_rule)?;
        if arms.iter().any(|a| a.intent == Some(IntentParser::Llm)) {
            let transport = HttpTransport::from_config(&cfg.architect.llm)?;
            let mut events = Vec::new();
            res.llm_phases = resolve_schedule(&schedule, |text| {
                let (p, ev) = parse_intent_llm(text, &transport, &cfg.architect.llm);
                events.extend(ev);
                p
            })?;
            res.events = events;
        }
    }
    Ok(res)
}

pub fn llm_backend(cfg: &RootConfig) -> &'static str {
    if cfg.architect.llm.is_configured() {
        "http"
    } else {
        "simulated"
    }
}

/// Assemble the architect stack of `arm` for one seed.
pub fn build_architect(arm: &ArmSpec, cfg: &RootConfig, res: &Resources, seed: u64) -> Result<Box<dyn Architect>> {
    let a = &cfg.architect;
    let mut arch: Box<dyn Architect> = match arm.architect {
        ArchitectKind::Fixed => Box::new(FixedArchitect { weights: a.fixed() }),
        ArchitectKind::Rule => Box::new(RuleArchitect {
            thresholds: a.thresholds.clone(),
            profiles: a.profiles.clone(),
        }),
        ArchitectKind::Oracle => Box::new(OracleArchitect::from_profiles(&a.profiles)),
        ArchitectKind::Mlp => Box::new(MlpArchitect::new(
            res.mlp.clone().ok_or_else(|| Error::Domain("mlp model not prepared".into()))?,
        )),
        ArchitectKind::Llm { anchors } => {
            let transport: Box<dyn ChatTransport> = if a.llm.is_configured() {
                Box::new(HttpTransport::from_config(&a.llm)?)
            } else {
                Box::new(SimulatedLlmTransport::new(a.oscillation.clone(), derive_seed(seed, &[0x11A])))
            };
            let mut llm = LlmArchitect::new(transport, a.llm.clone());
            if anchors {
                let store = res
                    .anchors
                    .clone()
                    .ok_or_else(|| Error::Domain("anchor store not prepared".into()))?;
                llm = llm
                    .with_anchors(store, KpiScaler::default(), a.anchor_top_k)
                    .with_relative_clamp(a.relative_clamp);
            }
            Box::new(llm)
        }
    };
    if let Some(n) = arm.throttle {
        arch = Box::new(ThrottleInterpolate::new(arch, n));
    }
    if let Some(c) = arm.cooldown {
        arch = Box::new(CooldownGuard::new(arch, c));
    }
    match arm.intent {
        Some(IntentParser::Rule) => arch = Box::new(IntentArchitect::new(arch, res.rule_phases.clone())),
        Some(IntentParser::Llm) => arch = Box::new(IntentArchitect::new(arch, res.llm_phases.clone())),
        None => {}
    }
    Ok(arch)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    /// Mean over the whole training trajectory.
    pub rate_mbps: MeanStd,
    /// Mean of the per-regime means.
    pub per_regime_rate_mbps: MeanStd,
    /// Mean over the final 10% of steps.
    pub final_rate_mbps: MeanStd,
    pub reward: MeanStd,
    pub outage_rate: MeanStd,
    pub fairness: MeanStd,
    pub switches: MeanStd,
    pub alarms: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRow {
    pub arm: String,
    pub architect: String,
    pub seeds_ok: usize,
    pub missing_seeds: Vec<u64>,
    /// Absent when every seed failed.
    pub stats: Option<ArmStats>,
    pub mean_satisfaction: Option<MeanStd>,
    pub mean_satisfaction_excl_phase0: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub arm: String,
    pub seed: u64,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
    /// Spread of the applied weight vectors.
    pub weight_stats: Option<OscillationStats>,
    pub intent: Option<IntentScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSection {
    pub causal_map: CausalMap,
    pub reports: Vec<ProbeReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub preset: ExperimentPreset,
    /// Full configuration; `output_dir` and `workers` are blanked so reports
    /// do not depend on where or how parallel they were produced.
    pub config: RootConfig,
    pub arms: Vec<ArmSpec>,
    pub llm_backend: String,
    pub mlp_training: Option<MlpTrainReport>,
    pub rows: Vec<ArmRow>,
    pub runs: Vec<RunRecord>,
    pub probe: Option<ProbeSection>,
    pub events: Vec<Event>,
}

impl ExperimentReport {
    pub fn row(&self, arm: &str) -> Option<&ArmRow> {
        self.rows.iter().find(|r| r.arm == arm)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Results of one preset execution, including the raw run outputs.
pub struct PresetOutcome {
    pub report: ExperimentReport,
    pub outputs: Vec<(String, u64, Option<RunOutput>)>,
}

fn aggregate(arm: &ArmSpec, runs: &[RunRecord], seeds: &[u64]) -> ArmRow {
    let ok: Vec<&RunMetrics> = runs.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let col = |f: fn(&RunMetrics) -> f64| MeanStd::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
    let stats = (!ok.is_empty()).then(|| ArmStats {
        rate_mbps: col(|m| m.mean_sum_rate_mbps).expect("non-empty"),
        per_regime_rate_mbps: col(|m| {
            let v: Vec<f64> = m.per_regime.values().map(|r| r.mean_sum_rate_mbps).collect();
            v.iter().sum::<f64>() / v.len().max(1) as f64
        })
        .expect("non-empty"),
        final_rate_mbps: col(|m| m.final_sum_rate_mbps).expect("non-empty"),
        reward: col(|m| m.mean_reward).expect("non-empty"),
        outage_rate: col(|m| m.mean_outage_rate).expect("non-empty"),
        fairness: col(|m| m.mean_fairness).expect("non-empty"),
        switches: col(|m| m.switch_count as f64).expect("non-empty"),
        alarms: col(|m| m.alarm_count as f64).expect("non-empty"),
    });
    let sat = |f: fn(&IntentScore) -> Option<f64>| {
        MeanStd::of(&runs.iter().filter_map(|r| r.intent.as_ref().and_then(f)).collect::<Vec<_>>())
    };
    ArmRow {
        arm: arm.label.clone(),
        architect: ok.first().map(|m| m.architect.clone()).unwrap_or_default(),
        seeds_ok: ok.len(),
        missing_seeds: seeds
            .iter()
            .zip(runs)
            .filter(|(_, r)| r.metrics.is_none())
            .map(|(s, _)| *s)
            .collect(),
        stats,
        mean_satisfaction: sat(|s| s.mean_satisfaction),
        mean_satisfaction_excl_phase0: sat(|s| s.mean_satisfaction_excl_phase0),
    }
}

/// Execute `preset` without touching the filesystem (beyond reading the
/// configured model, store and schedule files).
pub fn execute_preset(cfg: &RootConfig, preset: &ExperimentPreset) -> Result<PresetOutcome> {
    cfg.validate()?;
    preset.validate()?;
    let mut recorded = cfg.clone();
    recorded.output_dir = PathBuf::new();
    recorded.workers = 0;
    let mut report = ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        preset: preset.clone(),
        config: recorded,
        arms: arms_for(preset.name, cfg),
        llm_backend: llm_backend(cfg).into(),
        mlp_training: None,
        rows: Vec::new(),
        runs: Vec::new(),
        probe: None,
        events: Vec::new(),
    };
    if preset.name == PresetName::ProbeAll {
        report.probe = Some(run_probe_section(cfg, preset)?);
        return Ok(PresetOutcome {
            report,
            outputs: Vec::new(),
        });
    }

    let res = prepare_resources(cfg, preset, &report.arms)?;
    report.mlp_training = res.mlp_training.clone();
    report.events = res.events.clone();
    let spec = cfg.run_spec(preset.schedule(), preset.steps);
    let jobs: Vec<(usize, u64)> = (0..report.arms.len())
        .flat_map(|a| preset.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let arms = report.arms.clone();
    let results: Vec<Result<RunOutput>> = parallel_map(jobs.clone(), cfg.worker_count(), |(a, seed)| {
        let mut arch = build_architect(&arms[a], cfg, &res, seed)?;
        train(&spec, &mut arch, seed)
    });

    let mut outputs = Vec::new();
    for ((a, seed), result) in jobs.into_iter().zip(results) {
        let arm = &arms[a];
        let record = match &result {
            Ok(out) => {
                let traj: Vec<WeightVector> = out.weight_history.iter().map(|(_, w)| *w).collect();
                let phases = match arm.intent {
                    Some(IntentParser::Rule) => Some(&res.rule_phases),
                    Some(IntentParser::Llm) => Some(&res.llm_phases),
                    None => None,
                };
                RunRecord {
                    arm: arm.label.clone(),
                    seed,
                    metrics: Some(out.metrics.clone()),
                    error: None,
                    weight_stats: oscillation_stats(&traj).ok(),
                    intent: phases.map(|p| {
                        score_phases(p, &out.trace, preset.steps, &cfg.intent.satisfaction)
                    }),
                }
            }
            Err(e) => {
                log::error!("{} seed {seed} failed: {e}", arm.label);
                RunRecord {
                    arm: arm.label.clone(),
                    seed,
                    metrics: None,
                    error: Some(e.to_string()),
                    weight_stats: None,
                    intent: None,
                }
            }
        };
        report.runs.push(record);
        outputs.push((arm.label.clone(), seed, result.ok()));
    }
    for arm in &arms {
        let runs: Vec<RunRecord> = report.runs.iter().filter(|r| r.arm == arm.label).cloned().collect();
        report.rows.push(aggregate(arm, &runs, &preset.seeds));
    }
    Ok(PresetOutcome { report, outputs })
}

fn probe_template_spec(cfg: &RootConfig, steps: u64) -> Result<ProbeSpec> {
    let rounds = cfg.probe.rounds;
    if cfg.seeds.len() < rounds {
        return Err(Error::Config(vec![format!(
            "probe needs one seed per round: {rounds} rounds, {} seeds",
            cfg.seeds.len()
        )]));
    }
    Ok(ProbeSpec {
        regime: RegimeLabel::Mixed,
        base_weights: cfg.architect.profiles.mixed,
        delta: cfg.probe.delta,
        steps,
        rounds,
        seeds: cfg.seeds[..rounds].to_vec(),
    })
}

fn run_probe_section(cfg: &RootConfig, preset: &ExperimentPreset) -> Result<ProbeSection> {
    let template = probe_template_spec(cfg, preset.steps)?;
    let regimes: Vec<RegimeLabel> = preset.regime_schedule.iter().map(|(r, _)| *r).collect();
    let run_spec = cfg.run_spec(RegimeSchedule::constant(RegimeLabel::Mixed), preset.steps);
    let mut reports = Vec::new();
    for regime in regimes {
        let spec = ProbeSpec {
            regime,
            base_weights: cfg
                .probe
                .base_weights
                .unwrap_or_else(|| cfg.architect.profiles.for_regime(regime)),
            ..template.clone()
        };
        let (_, mut r) = causal_map(&[regime], &spec, &run_spec, cfg.worker_count())?;
        reports.append(&mut r);
    }
    Ok(ProbeSection {
        causal_map: CausalMap::from_reports(&reports),
        reports,
    })
}

/// Probe preset over `regimes` using the probe settings of `cfg`.
pub fn probe_preset(cfg: &RootConfig, regimes: &[RegimeLabel]) -> ExperimentPreset {
    ExperimentPreset {
        name: PresetName::ProbeAll,
        seeds: cfg.seeds.clone(),
        steps: cfg.probe.steps,
        regime_schedule: regimes.iter().map(|&r| (r, cfg.probe.steps)).collect(),
    }
}

fn write_trace(path: &Path, trace: &[TracePoint]) -> Result<()> {
    let mut out = Vec::new();
    for p in trace {
        serde_json::to_writer(&mut out, p)?;
        out.push(b'\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn write_weights(path: &Path, history: &[(u64, WeightVector)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "w_r", "w_o", "w_s", "w_q", "w_f"])?;
    for (step, v) in history {
        let mut rec = vec![step.to_string()];
        rec.extend(v.as_array().iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_summary_csv(path: &Path, rows: &[ArmRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "arm",
        "seeds_ok",
        "rate_mean",
        "rate_std",
        "per_regime_rate_mean",
        "final_rate_mean",
        "outage_mean",
        "fairness_mean",
        "switches_mean",
        "satisfaction_mean",
    ])?;
    let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let s = r.stats.as_ref();
        w.write_record([
            r.arm.clone(),
            r.seeds_ok.to_string(),
            f(s.map(|s| s.rate_mbps.mean)),
            f(s.map(|s| s.rate_mbps.std)),
            f(s.map(|s| s.per_regime_rate_mbps.mean)),
            f(s.map(|s| s.final_rate_mbps.mean)),
            f(s.map(|s| s.outage_rate.mean)),
            f(s.map(|s| s.fairness.mean)),
            f(s.map(|s| s.switches.mean)),
            f(r.mean_satisfaction.map(|m| m.mean)),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write `metrics.json`, `summary.csv` and per-run traces under `dir`.
pub fn write_outcome(outcome: &PresetOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let metrics = dir.join("metrics.json");
    std::fs::write(&metrics, outcome.report.to_json()?).map_err(|e| Error::io(&metrics, e))?;
    write_summary_csv(&dir.join("summary.csv"), &outcome.report.rows)?;
    for (arm, seed, out) in &outcome.outputs {
        let Some(out) = out else { continue };
        let run_dir = dir.join("runs").join(format!("{arm}_seed{seed}"));
        std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
        write_trace(&run_dir.join("trace.jsonl"), &out.trace)?;
        write_jsonl(&run_dir.join("events.jsonl"), &out.events)?;
        write_weights(&run_dir.join("weights.csv"), &out.weight_history)?;
        if let Some(policy) = &out.policy {
            policy.save(&run_dir.join("policy.json"))?;
        }
    }
    if let Some(p) = &outcome.report.probe {
        for r in &p.reports {
            r.write_json(&dir.join(format!("probe_{}.json", r.spec.regime)))?;
            r.write_csv(&dir.join(format!("probe_{}.csv", r.spec.regime)))?;
        }
        p.causal_map.write_json(&dir.join("causal_map.json"))?;
        p.causal_map.write_csv(&dir.join("causal_map.csv"))?;
    }
    if !outcome.report.events.is_empty() {
        write_jsonl(&dir.join("events.jsonl"), &outcome.report.events)?;
    }
    Ok(())
}

/// Execute and write a preset into `<output_dir>/<preset name>`.
pub fn run_preset(cfg: &RootConfig, preset: &ExperimentPreset) -> Result<ExperimentReport> {
    let outcome = execute_preset(cfg, preset)?;
    let dir = cfg.output_dir.join(preset.name.as_str());
    write_outcome(&outcome, &dir)?;
    log::info!("wrote {}", dir.join("metrics.json").display());
    Ok(outcome.report)
}

/// Per-arm sequence of architect outputs over a shared list of KPI
/// snapshots, without any training. Used to compare output consistency.
pub fn architect_outputs(
    architect: &mut dyn Architect,
    kpis: &[crate::satenv::KpiSnapshot],
    start: WeightVector,
) -> Result<Vec<WeightVector>> {
    let mut current = start;
    let mut out = Vec::with_capacity(kpis.len());
    for (i, k) in kpis.iter().enumerate() {
        let ctx = crate::architects::ArchitectContext {
            step: i as u64,
            current,
            regime: RegimeLabel::Mixed,
        };
        current = architect.propose(k, &ctx)?;
        out.push(current);
    }
    Ok(out)
}

/// Mean rate per arm label, for quick comparisons.
pub fn rates_by_arm(report: &ExperimentReport) -> BTreeMap<String, Option<f64>> {
    report
        .rows
        .iter()
        .map(|r| (r.arm.clone(), r.stats.as_ref().map(|s| s.rate_mbps.mean)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> RootConfig {
        let mut cfg = RootConfig::default();
        cfg.seeds = vec![1, 2];
        cfg.steps = 300;
        cfg.cycle_steps = 100;
        cfg.ppo.hidden = vec![8];
        cfg.ppo.rollout_len = 64;
        cfg.ppo.epochs_per_update = 1;
        cfg.architect.mlp.samples_per_regime = 20;
        cfg.architect.mlp.train.epochs = 5;
        cfg.workers = 2;
        cfg
    }

    #[test]
    fn preset_names_round_trip() {
        for p in PresetName::ALL {
            assert_eq!(p.as_str().parse::<PresetName>().unwrap(), p);
        }
        assert_eq!("path-c".parse::<PresetName>().unwrap(), PresetName::PathC);
        assert!("nope".parse::<PresetName>().is_err());
    }

    #[test]
    fn compare_fixed_row_has_no_switches() {
        let cfg = tiny_config();
        let preset = ExperimentPreset::from_config(PresetName::CompareKnown, &cfg);
        assert_eq!(preset.regime_schedule.len(), 4);
        let out = execute_preset(&cfg, &preset).unwrap();
        let r = &out.report;
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.runs.len(), 8);
        let fixed = r.row("fixed").unwrap();
        assert_eq!(fixed.stats.as_ref().unwrap().switches.mean, 0.0);
        assert_eq!(fixed.seeds_ok, 2);
        assert_eq!(r.llm_backend, "simulated");
        assert!(r.mlp_training.is_some());
    }

    #[test]
    fn path_c_rows_and_reproducibility() {
        let cfg = tiny_config();
        let preset = ExperimentPreset::from_config(PresetName::PathC, &cfg);
        let a = execute_preset(&cfg, &preset).unwrap();
        let labels: Vec<_> = a.report.rows.iter().map(|r| r.arm.as_str()).collect();
        assert_eq!(labels, ["constant", "switching", "throttled"]);
        let mut serial = cfg.clone();
        serial.workers = 1;
        let b = execute_preset(&serial, &preset).unwrap();
        let mut ra = a.report.clone();
        ra.config.workers = 0;
        let mut rb = b.report.clone();
        rb.config.workers = 0;
        assert_eq!(ra.to_json().unwrap(), rb.to_json().unwrap());
    }

    #[test]
    fn written_outcome_is_plottable() {
        let cfg = tiny_config();
        let mut preset = ExperimentPreset::from_config(PresetName::Dilemma, &cfg);
        preset.seeds = vec![3];
        let out = execute_preset(&cfg, &preset).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outcome(&out, dir.path()).unwrap();
        let loaded = ExperimentReport::load(&dir.path().join("metrics.json")).unwrap();
        assert_eq!(loaded, out.report);
        let runs = vec![
            dir.path().join("runs/constant_seed3"),
            dir.path().join("runs/switching_seed3"),
        ];
        let files = emit_plots(&runs, &dir.path().join("plots")).unwrap();
        assert_eq!(files.len(), 14);
        let svg = std::fs::read_to_string(dir.path().join("plots/sum_rate_mbps.svg")).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
