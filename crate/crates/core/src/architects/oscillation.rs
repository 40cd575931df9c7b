//! Simulated fine-tuned LLM architect.
//!
//! The model alternates between two modes that differ mainly in the outage
//! weight, flipping mode with a fixed probability on every call and adding a
//! multiplicative jitter. This reproduces the bimodal, high-variance
//! proposals of an ungrounded language-model architect without running one.

use std::sync::Mutex;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Architect, ArchitectContext};
use crate::error::{Error, Result};
use crate::llm::{ChatRequest, ChatTransport, TransportError};
use crate::reward::WeightVector;
use crate::rng::stream;
use crate::satenv::KpiSnapshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OscillationModel {
    pub mode_low: WeightVector,
    pub mode_high: WeightVector,
    pub switch_prob: f64,
    /// Standard deviation of the multiplicative jitter.
    pub jitter_std: f64,
}

impl Default for OscillationModel {
    fn default() -> Self {
        OscillationModel {
            mode_low: WeightVector::new([1.0, 0.01, 0.3, 0.5, 0.8]).expect("static"),
            mode_high: WeightVector::new([1.0, 0.5, 0.3, 0.5, 0.8]).expect("static"),
            switch_prob: 0.4,
            jitter_std: 0.4,
        }
    }
}

impl OscillationModel {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if !(0.0..=1.0).contains(&self.switch_prob) {
            errors.push("oscillation.switch_prob must be in [0, 1]".into());
        }
        if !(self.jitter_std.is_finite() && self.jitter_std >= 0.0) {
            errors.push("oscillation.jitter_std must be >= 0".into());
        }
    }

    /// Draw the next proposal, possibly flipping `in_high`.
    pub fn sample<R: Rng + ?Sized>(&self, in_high: &mut bool, rng: &mut R) -> Result<WeightVector> {
        if rng.random_bool(self.switch_prob) {
            *in_high = !*in_high;
        }
        let mode = if *in_high { self.mode_high } else { self.mode_low };
        let jitter = Normal::new(0.0, self.jitter_std)
            .map_err(|e| Error::Domain(format!("oscillation jitter: {e}")))?;
        let values = mode
            .as_array()
            .map(|v| (v * (1.0 + jitter.sample(rng))).max(0.0));
        WeightVector::clamped(values)
    }
}

pub struct OscillatingArchitect {
    model: OscillationModel,
    in_high: bool,
    rng: ChaCha8Rng,
}

impl OscillatingArchitect {
    pub fn new(model: OscillationModel, seed: u64) -> Self {
        OscillatingArchitect {
            model,
            in_high: false,
            rng: stream(seed, &[0x05C1]),
        }
    }
}

impl Architect for OscillatingArchitect {
    fn name(&self) -> String {
        "oscillating".into()
    }

    fn propose(&mut self, _kpi: &KpiSnapshot, _ctx: &ArchitectContext) -> Result<WeightVector> {
        self.model.sample(&mut self.in_high, &mut self.rng)
    }
}

/// Chat transport answering every request with an oscillation-model sample
/// formatted as a JSON array. Lets the LLM code paths run offline.
pub struct SimulatedLlmTransport {
    model: OscillationModel,
    state: Mutex<(bool, ChaCha8Rng)>,
}

impl SimulatedLlmTransport {
    pub fn new(model: OscillationModel, seed: u64) -> Self {
        SimulatedLlmTransport {
            model,
            state: Mutex::new((false, stream(seed, &[0x511A]))),
        }
    }
}

impl ChatTransport for SimulatedLlmTransport {
    fn complete(&self, _request: &ChatRequest) -> std::result::Result<String, TransportError> {
        let mut guard = self.state.lock().map_err(|e| TransportError::Http(e.to_string()))?;
        let (in_high, rng) = &mut *guard;
        let w = self
            .model
            .sample(in_high, rng)
            .map_err(|e| TransportError::Http(e.to_string()))?;
        serde_json::to_string(&w).map_err(|e| TransportError::Malformed(e.to_string()))
    }
}
