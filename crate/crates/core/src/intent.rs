//! Strategic intent layer: operator commands become objective profiles whose
//! bias multiplies the tactical architect's weights.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::architects::{Architect, ArchitectContext};
use crate::error::{Error, Result};
use crate::events::Event;
use crate::llm::{render, ChatMessage, ChatRequest, ChatTransport, LlmClientConfig};
use crate::ppo::TracePoint;
use crate::reward::WeightVector;
use crate::satenv::KpiSnapshot;

pub const INTENT_PROMPT: &str = include_str!("../prompts/intent.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Throughput,
    Emergency,
    Fairness,
    Energy,
    Mixed,
}

impl ProfileName {
    pub const ALL: [ProfileName; 5] = [
        ProfileName::Throughput,
        ProfileName::Emergency,
        ProfileName::Fairness,
        ProfileName::Energy,
        ProfileName::Mixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProfileName::Throughput => "throughput",
            ProfileName::Emergency => "emergency",
            ProfileName::Fairness => "fairness",
            ProfileName::Energy => "energy",
            ProfileName::Mixed => "mixed",
        }
    }

    fn keywords(self) -> &'static [&'static str] {
        match self {
            ProfileName::Throughput => &["throughput", "rate"],
            ProfileName::Emergency => &["emergency", "disaster", "outage"],
            ProfileName::Fairness => &["fair", "equal"],
            ProfileName::Energy => &["energy", "power", "switch"],
            ProfileName::Mixed => &[],
        }
    }
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProfileName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        ProfileName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown objective profile '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveProfile {
    pub name: ProfileName,
    pub weight_bias: WeightVector,
    pub description: String,
}

impl ObjectiveProfile {
    /// Built-in bias for each profile.
    pub fn standard(name: ProfileName) -> Self {
        let (bias, description) = match name {
            ProfileName::Throughput => ([1.5, 1.0, 1.0, 1.0, 1.0], "maximize aggregate rate"),
            ProfileName::Emergency => ([1.0, 2.0, 1.0, 1.0, 1.5], "protect coverage, minimize outages"),
            ProfileName::Fairness => ([1.0, 1.0, 1.0, 1.0, 2.0], "equalize service across beams"),
            ProfileName::Energy => ([1.0, 1.0, 2.0, 1.0, 1.0], "avoid unnecessary reconfiguration"),
            ProfileName::Mixed => ([1.0; 5], "no clear preference"),
        };
        ObjectiveProfile {
            name,
            weight_bias: WeightVector::new(bias).expect("static bias"),
            description: description.into(),
        }
    }

    /// Tactical weights with this profile's bias applied, then clamped.
    pub fn apply(&self, tactical: &WeightVector) -> WeightVector {
        tactical.hadamard(&self.weight_bias).clamp()
    }
}

/// Keyword parser. The profile of the first word that starts with one of
/// its keywords wins; no match gives the mixed profile.
pub fn parse_intent_rule(text: &str) -> ObjectiveProfile {
    let lower = text.to_lowercase();
    let hit = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .find_map(|word| {
            ProfileName::ALL
                .into_iter()
                .find(|p| p.keywords().iter().any(|k| word.starts_with(k)))
        });
    ObjectiveProfile::standard(hit.unwrap_or(ProfileName::Mixed))
}

fn parse_llm_reply(reply: &str) -> std::result::Result<ObjectiveProfile, String> {
    let trimmed = reply.trim();
    let value: Value = serde_json::from_str(trimmed)
        .ok()
        .or_else(|| {
            let start = trimmed.find('{')?;
            let end = trimmed.rfind('}')?;
            serde_json::from_str(trimmed.get(start..=end)?).ok()
        })
        .ok_or_else(|| format!("no JSON object in reply: {trimmed:.80}"))?;
    let name: ProfileName = value
        .get("profile")
        .and_then(Value::as_str)
        .ok_or("missing 'profile'")?
        .parse()
        .map_err(|e: Error| e.to_string())?;
    let mut profile = ObjectiveProfile::standard(name);
    if let Some(bias) = value.get("bias") {
        let nums: Vec<f64> = bias
            .as_array()
            .ok_or("'bias' is not an array")?
            .iter()
            .map(Value::as_f64)
            .collect::<Option<_>>()
            .ok_or("'bias' has non-numeric entries")?;
        let arr = <[f64; 5]>::try_from(nums.as_slice())
            .map_err(|_| format!("expected 5 bias values, got {}", nums.len()))?;
        if arr.iter().any(|b| *b <= 0.0) {
            return Err(format!("bias values must be positive: {arr:?}"));
        }
        profile.weight_bias = WeightVector::clamped(arr).map_err(|e| e.to_string())?;
    }
    Ok(profile)
}

/// Ask a chat model for the profile. Any transport or parse failure falls
/// back to [`parse_intent_rule`] and is reported as an event.
pub fn parse_intent_llm(
    text: &str,
    transport: &dyn ChatTransport,
    cfg: &LlmClientConfig,
) -> (ObjectiveProfile, Vec<Event>) {
    let request = ChatRequest {
        model: cfg.model.clone(),
        messages: vec![ChatMessage::user(render(INTENT_PROMPT, &[("command", text)]))],
        temperature: cfg.temperature,
    };
    let mut reasons = Vec::new();
    for _ in 0..=cfg.max_retries {
        match transport.complete(&request) {
            Ok(reply) => match parse_llm_reply(&reply) {
                Ok(p) => return (p, Vec::new()),
                Err(e) => reasons.push(e),
            },
            Err(e) => reasons.push(e.to_string()),
        }
    }
    let event = Event::IntentFallback {
        command: text.to_string(),
        reason: reasons.join("; "),
    };
    (parse_intent_rule(text), vec![event])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentCommand {
    pub start_step: u64,
    pub command: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentPhase {
    pub command_text: String,
    pub start_step: u64,
    pub profile: ObjectiveProfile,
}

/// The four-phase operator scenario over `steps` steps.
pub fn default_schedule(steps: u64) -> Vec<IntentCommand> {
    let q = steps / 4;
    ["maximize throughput", "emergency response", "fairness priority", "energy saving"]
        .iter()
        .enumerate()
        .map(|(i, c)| IntentCommand {
            start_step: q * i as u64,
            command: c.to_string(),
        })
        .collect()
}

pub fn validate_schedule(schedule: &[IntentCommand]) -> Result<()> {
    let mut errors = Vec::new();
    if schedule.is_empty() {
        errors.push("intent schedule is empty".to_string());
    }
    for pair in schedule.windows(2) {
        if pair[1].start_step <= pair[0].start_step {
            errors.push(format!(
                "intent start_step {} does not follow {}",
                pair[1].start_step, pair[0].start_step
            ));
        }
    }
    for c in schedule {
        if c.command.trim().is_empty() {
            errors.push(format!("empty command at step {}", c.start_step));
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(errors))
    }
}

pub fn load_schedule(path: &Path) -> Result<Vec<IntentCommand>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let schedule: Vec<IntentCommand> = serde_json::from_str(&text)?;
    validate_schedule(&schedule)?;
    Ok(schedule)
}

/// Translate a schedule with `parser`.
pub fn resolve_schedule(
    schedule: &[IntentCommand],
    mut parser: impl FnMut(&str) -> ObjectiveProfile,
) -> Result<Vec<IntentPhase>> {
    validate_schedule(schedule)?;
    Ok(schedule
        .iter()
        .map(|c| IntentPhase {
            command_text: c.command.clone(),
            start_step: c.start_step,
            profile: parser(&c.command),
        })
        .collect())
}

/// Normalization constants for satisfaction scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SatisfactionConfig {
    pub reference_rate_mbps: f64,
    /// Per-step allocation change (L1) that scores zero energy satisfaction.
    pub max_switching: f64,
}

impl Default for SatisfactionConfig {
    fn default() -> Self {
        SatisfactionConfig {
            reference_rate_mbps: 1000.0,
            max_switching: 2.0,
        }
    }
}

impl SatisfactionConfig {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if !(self.reference_rate_mbps > 0.0) {
            errors.push("satisfaction.reference_rate_mbps must be > 0".into());
        }
        if !(self.max_switching > 0.0) {
            errors.push("satisfaction.max_switching must be > 0".into());
        }
    }
}

/// Aggregates over one phase window.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseMetrics {
    pub samples: u64,
    pub mean_rate_mbps: f64,
    pub mean_outage_rate: f64,
    pub mean_fairness: f64,
    pub mean_switching: f64,
}

impl PhaseMetrics {
    /// Averages of the trace points with `start <= step < end`.
    pub fn from_trace(trace: &[TracePoint], start: u64, end: u64) -> Self {
        let pts: Vec<&TracePoint> = trace.iter().filter(|p| p.step >= start && p.step < end).collect();
        let n = pts.len().max(1) as f64;
        let avg = |f: fn(&TracePoint) -> f64| pts.iter().map(|p| f(p)).sum::<f64>() / n;
        PhaseMetrics {
            samples: pts.len() as u64,
            mean_rate_mbps: avg(|p| p.sum_rate_mbps),
            mean_outage_rate: avg(|p| p.outage_rate),
            mean_fairness: avg(|p| p.fairness),
            mean_switching: avg(|p| p.switching),
        }
    }
}

/// How well a phase met its profile, in `[0, 1]`.
pub fn satisfaction(name: ProfileName, m: &PhaseMetrics, cfg: &SatisfactionConfig) -> Result<f64> {
    if m.samples == 0 {
        return Err(Error::Empty("phase window"));
    }
    let throughput = m.mean_rate_mbps / cfg.reference_rate_mbps;
    let emergency = 1.0 - m.mean_outage_rate;
    let fairness = m.mean_fairness;
    let energy = 1.0 - m.mean_switching / cfg.max_switching;
    let s = match name {
        ProfileName::Throughput => throughput,
        ProfileName::Emergency => emergency,
        ProfileName::Fairness => fairness,
        ProfileName::Energy => energy,
        ProfileName::Mixed => {
            (throughput.clamp(0.0, 1.0)
                + emergency.clamp(0.0, 1.0)
                + fairness.clamp(0.0, 1.0)
                + energy.clamp(0.0, 1.0))
                / 4.0
        }
    };
    if !s.is_finite() {
        return Err(Error::NonFinite("satisfaction".into()));
    }
    Ok(s.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub command: String,
    pub profile: ProfileName,
    pub start_step: u64,
    pub end_step: u64,
    pub metrics: PhaseMetrics,
    pub satisfaction: Option<f64>,
}

/// Per-phase metrics and satisfaction of one run, plus the mean satisfaction
/// with and without the cold-start first phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentScore {
    pub phases: Vec<PhaseReport>,
    pub mean_satisfaction: Option<f64>,
    pub mean_satisfaction_excl_phase0: Option<f64>,
}

pub fn score_phases(
    phases: &[IntentPhase],
    trace: &[TracePoint],
    total_steps: u64,
    cfg: &SatisfactionConfig,
) -> IntentScore {
    let reports: Vec<PhaseReport> = phases
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let end = phases.get(i + 1).map_or(total_steps, |n| n.start_step);
            let metrics = PhaseMetrics::from_trace(trace, p.start_step, end);
            PhaseReport {
                command: p.command_text.clone(),
                profile: p.profile.name,
                start_step: p.start_step,
                end_step: end,
                satisfaction: satisfaction(p.profile.name, &metrics, cfg).ok(),
                metrics,
            }
        })
        .collect();
    let mean_of = |skip: usize| {
        let v: Vec<f64> = reports.iter().skip(skip).filter_map(|r| r.satisfaction).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    IntentScore {
        mean_satisfaction: mean_of(0),
        mean_satisfaction_excl_phase0: mean_of(1),
        phases: reports,
    }
}

/// Applies the active phase's bias on top of a tactical architect.
pub struct IntentArchitect<A> {
    inner: A,
    phases: Vec<IntentPhase>,
    tactical: Option<WeightVector>,
    active: Option<usize>,
    events: Vec<Event>,
}

impl<A: Architect> IntentArchitect<A> {
    pub fn new(inner: A, phases: Vec<IntentPhase>) -> Self {
        IntentArchitect {
            inner,
            phases,
            tactical: None,
            active: None,
            events: Vec::new(),
        }
    }

    fn phase_at(&self, step: u64) -> Option<usize> {
        self.phases.iter().rposition(|p| p.start_step <= step)
    }

    fn biased(&self, w: &WeightVector) -> WeightVector {
        match self.active {
            Some(i) => self.phases[i].profile.apply(w),
            None => *w,
        }
    }

    /// Returns true when the active phase changed.
    fn enter(&mut self, step: u64) -> bool {
        let idx = self.phase_at(step);
        if idx == self.active {
            return false;
        }
        self.active = idx;
        if let Some(i) = idx {
            let p = &self.phases[i];
            self.events.push(Event::IntentPhase {
                step,
                command: p.command_text.clone(),
                profile: p.profile.name.to_string(),
            });
        }
        true
    }
}

impl<A: Architect> Architect for IntentArchitect<A> {
    fn name(&self) -> String {
        format!("intent+{}", self.inner.name())
    }

    fn propose(&mut self, kpi: &KpiSnapshot, ctx: &ArchitectContext) -> Result<WeightVector> {
        let w = self.inner.propose(kpi, ctx)?;
        self.tactical = Some(w);
        self.enter(ctx.step);
        Ok(self.biased(&w))
    }

    fn tick(&mut self, step: u64, current: &WeightVector) -> Option<WeightVector> {
        let inner = self.inner.tick(step, current);
        if let Some(w) = inner {
            self.tactical = Some(w);
        }
        let changed = self.enter(step);
        if inner.is_some() || changed {
            self.tactical.map(|w| self.biased(&w))
        } else {
            None
        }
    }

    fn drain_events(&mut self) -> Vec<Event> {
        let mut ev = self.inner.drain_events();
        ev.append(&mut self.events);
        ev
    }
}
