//! Architect backed by a chat model, optionally grounded with anchors.

use serde_json::Value;

use super::{Architect, ArchitectContext, KpiScaler};
use crate::anchors::AnchorStore;
use crate::error::Result;
use crate::events::Event;
use crate::llm::{render, ChatMessage, ChatRequest, ChatTransport, LlmClientConfig, TransportError};
use crate::reward::{relative_clamp, WeightVector, WEIGHT_MAX, WEIGHT_MIN};
use crate::satenv::KpiSnapshot;

pub const ARCHITECT_PROMPT: &str = include_str!("../../prompts/architect.txt");

/// Pull five numbers out of a model reply. Accepts a bare JSON array, an
/// object with a `weights` array, or the first `[...]` span in free text.
pub fn parse_weight_reply(text: &str) -> std::result::Result<[f64; 5], String> {
    let from_value = |v: &Value| -> Option<Vec<f64>> {
        let arr = match v {
            Value::Array(a) => a,
            Value::Object(o) => o.get("weights")?.as_array()?,
            _ => return None,
        };
        arr.iter().map(Value::as_f64).collect()
    };
    let trimmed = text.trim();
    let values = serde_json::from_str::<Value>(trimmed)
        .ok()
        .and_then(|v| from_value(&v))
        .or_else(|| {
            let start = trimmed.find('[')?;
            let end = start + trimmed[start..].find(']')?;
            serde_json::from_str::<Value>(&trimmed[start..=end])
                .ok()
                .and_then(|v| from_value(&v))
        })
        .ok_or_else(|| format!("no weight array in reply: {trimmed:.80}"))?;
    <[f64; 5]>::try_from(values.as_slice())
        .map_err(|_| format!("expected 5 weights, got {}", values.len()))
}

pub struct LlmArchitect {
    transport: Box<dyn ChatTransport>,
    cfg: LlmClientConfig,
    anchors: Option<AnchorStore>,
    scaler: KpiScaler,
    top_k: usize,
    relative_pct: Option<f64>,
    events: Vec<Event>,
}

impl LlmArchitect {
    pub fn new(transport: Box<dyn ChatTransport>, cfg: LlmClientConfig) -> Self {
        LlmArchitect {
            transport,
            cfg,
            anchors: None,
            scaler: KpiScaler::default(),
            top_k: 5,
            relative_pct: None,
            events: Vec::new(),
        }
    }

    /// Ground prompts with the `k` best anchors for the current KPIs.
    pub fn with_anchors(mut self, store: AnchorStore, scaler: KpiScaler, k: usize) -> Self {
        self.anchors = Some(store);
        self.scaler = scaler;
        self.top_k = k;
        self
    }

    /// Limit every accepted proposal to `pct` relative change per component.
    pub fn with_relative_clamp(mut self, pct: f64) -> Self {
        self.relative_pct = Some(pct);
        self
    }

    fn anchor_block(&self, kpi: &KpiSnapshot) -> Result<String> {
        let Some(store) = &self.anchors else {
            return Ok("none".into());
        };
        let hits = store.top_k(&self.scaler.transform(kpi), self.top_k)?;
        if hits.is_empty() {
            return Ok("none".into());
        }
        Ok(hits
            .iter()
            .map(|h| {
                format!(
                    "- weights {} achieved {:.1} Mbps (similarity {:.3})",
                    serde_json::to_string(&h.entry.weights).unwrap_or_default(),
                    h.entry.performance_mbps,
                    h.score
                )
            })
            .collect::<Vec<_>>()
            .join("\n"))
    }

    pub fn build_request(&self, kpi: &KpiSnapshot, current: &WeightVector) -> Result<ChatRequest> {
        let kpi_text = format!(
            "mean demand {:.2} Mbps, peak demand {:.2} Mbps, gini {:.3}, outage rate {:.3}, demand trend {:+.3} Mbps/step",
            kpi.mean_demand_mbps, kpi.peak_demand_mbps, kpi.gini, kpi.outage_rate, kpi.demand_trend
        );
        let prompt = render(
            ARCHITECT_PROMPT,
            &[
                ("kpi", &kpi_text),
                ("current", &serde_json::to_string(current)?),
                ("anchors", &self.anchor_block(kpi)?),
            ],
        );
        Ok(ChatRequest {
            model: self.cfg.model.clone(),
            messages: vec![ChatMessage::user(prompt)],
            temperature: self.cfg.temperature,
        })
    }
}

impl Architect for LlmArchitect {
    fn name(&self) -> String {
        if self.anchors.is_some() {
            "llm+anchors".into()
        } else {
            "llm".into()
        }
    }

    fn propose(&mut self, kpi: &KpiSnapshot, ctx: &ArchitectContext) -> Result<WeightVector> {
        let request = self.build_request(kpi, &ctx.current)?;
        let step = ctx.step;
        for attempt in 0..=self.cfg.max_retries {
            let reply = match self.transport.complete(&request) {
                Ok(r) => r,
                Err(TransportError::Timeout(detail)) => {
                    self.events.push(Event::LlmTimeout { step, attempt, detail });
                    continue;
                }
                Err(e) => {
                    self.events.push(Event::LlmTransportError {
                        step,
                        attempt,
                        detail: e.to_string(),
                    });
                    continue;
                }
            };
            let values = match parse_weight_reply(&reply) {
                Ok(v) => v,
                Err(detail) => {
                    self.events.push(Event::LlmMalformed { step, attempt, detail });
                    continue;
                }
            };
            let weights = match WeightVector::new(values) {
                Ok(w) => w,
                Err(_) => {
                    // negative or non-finite: unusable
                    self.events.push(Event::LlmOutOfRange {
                        step,
                        attempt,
                        values: values.to_vec(),
                    });
                    continue;
                }
            };
            if values.iter().any(|v| !(WEIGHT_MIN..=WEIGHT_MAX).contains(v)) {
                self.events.push(Event::LlmOutOfRange {
                    step,
                    attempt,
                    values: values.to_vec(),
                });
            }
            return Ok(match self.relative_pct {
                Some(pct) => relative_clamp(&weights, &ctx.current, pct),
                None => weights.clamp(),
            });
        }
        self.events.push(Event::LlmFallback {
            step,
            reason: format!("no usable reply after {} attempts", self.cfg.max_retries + 1),
        });
        Ok(ctx.current)
    }

    fn drain_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }
}
