//! Run event log, persisted as JSON lines.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::WeightVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    RegimeAlarm {
        step: u64,
        kpi: String,
        side: String,
        statistic: f64,
        threshold: f64,
    },
    WeightSwitch {
        step: u64,
        from: WeightVector,
        to: WeightVector,
    },
    ProposalSuppressed {
        step: u64,
        proposed: WeightVector,
        reason: String,
    },
    TargetDeferred {
        step: u64,
        proposed: WeightVector,
    },
    UnnormalizedInput {
        step: u64,
        feature: usize,
        value: f64,
    },
    LlmTimeout {
        step: u64,
        attempt: u32,
        detail: String,
    },
    LlmTransportError {
        step: u64,
        attempt: u32,
        detail: String,
    },
    LlmMalformed {
        step: u64,
        attempt: u32,
        detail: String,
    },
    LlmOutOfRange {
        step: u64,
        attempt: u32,
        values: Vec<f64>,
    },
    LlmFallback {
        step: u64,
        reason: String,
    },
    IntentPhase {
        step: u64,
        command: String,
        profile: String,
    },
    IntentFallback {
        command: String,
        reason: String,
    },
    RecordSkipped {
        reason: String,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::RegimeAlarm { .. } => "regime_alarm",
            Event::WeightSwitch { .. } => "weight_switch",
            Event::ProposalSuppressed { .. } => "proposal_suppressed",
            Event::TargetDeferred { .. } => "target_deferred",
            Event::UnnormalizedInput { .. } => "unnormalized_input",
            Event::LlmTimeout { .. } => "llm_timeout",
            Event::LlmTransportError { .. } => "llm_transport_error",
            Event::LlmMalformed { .. } => "llm_malformed",
            Event::LlmOutOfRange { .. } => "llm_out_of_range",
            Event::LlmFallback { .. } => "llm_fallback",
            Event::IntentPhase { .. } => "intent_phase",
            Event::IntentFallback { .. } => "intent_fallback",
            Event::RecordSkipped { .. } => "record_skipped",
        }
    }
}

pub fn write_jsonl(path: &Path, events: &[Event]) -> Result<()> {
    let mut out = Vec::new();
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}
