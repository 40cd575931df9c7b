//! The two-timescale training loop.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{PpoAgent, PpoConfig, PolicyNet, ReturnScaler, Rollout, UpdateStats};
use crate::architects::{Architect, ArchitectContext, SWITCH_TOLERANCE};
use crate::detect::{CusumConfig, RegimeDetector};
use crate::error::{Error, Result};
use crate::events::Event;
use crate::reward::{compose, WeightVector};
use crate::rng::{derive_seed, stream};
use crate::satenv::{
    observation_dim, EnvConfig, KpiSnapshot, LinkConfig, RegimeLabel, RegimeSchedule, SatEnv,
    StepOutcome, TrafficConfig,
};

/// Everything needed to run one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub link: LinkConfig,
    pub env: EnvConfig,
    pub traffic: TrafficConfig,
    pub schedule: RegimeSchedule,
    pub cusum: CusumConfig,
    pub ppo: PpoConfig,
    pub steps: u64,
    /// Weights in force before the architect's first answer.
    pub initial_weights: WeightVector,
    /// Stride of the JSONL time series.
    pub trace_every: u64,
}

impl RunSpec {
    pub fn new(schedule: RegimeSchedule, steps: u64, initial_weights: WeightVector) -> Self {
        RunSpec {
            link: LinkConfig::default(),
            env: EnvConfig::default(),
            traffic: TrafficConfig::default(),
            schedule,
            cusum: CusumConfig::default(),
            ppo: PpoConfig::default(),
            steps,
            initial_weights,
            trace_every: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        self.link.validate(&mut errors);
        self.env.validate(&mut errors);
        self.traffic.validate(self.link.num_beams, &mut errors);
        self.schedule.validate(&mut errors);
        self.cusum.validate(&mut errors);
        self.ppo.validate(&mut errors);
        if self.steps == 0 {
            errors.push("steps must be > 0".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegimeMetrics {
    pub steps: u64,
    pub mean_sum_rate_mbps: f64,
    pub mean_outage_rate: f64,
    pub mean_fairness: f64,
}

/// Aggregates of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub architect: String,
    pub seed: u64,
    pub steps: u64,
    pub mean_sum_rate_mbps: f64,
    /// Mean over the final 10% of steps.
    pub final_sum_rate_mbps: f64,
    pub mean_reward: f64,
    pub final_reward: f64,
    pub mean_outage_rate: f64,
    pub mean_fairness: f64,
    pub switch_count: u64,
    pub alarm_count: u64,
    pub updates: u64,
    pub per_regime: BTreeMap<String, RegimeMetrics>,
    pub final_weights: Option<WeightVector>,
    pub last_update: Option<UpdateStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: u64,
    pub regime: RegimeLabel,
    pub sum_rate_mbps: f64,
    pub reward: f64,
    pub outage_rate: f64,
    pub fairness: f64,
    /// L1 change of the allocation vector against the previous step.
    pub switching: f64,
    pub weights: WeightVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub trace: Vec<TracePoint>,
    pub events: Vec<Event>,
    /// Every weight vector the architect put in force, with its step.
    pub weight_history: Vec<(u64, WeightVector)>,
    pub policy: Option<PolicyNet>,
}

#[derive(Default)]
struct Accumulator {
    n: u64,
    rate: f64,
    reward: f64,
    outage: f64,
    fairness: f64,
    tail_n: u64,
    tail_rate: f64,
    tail_reward: f64,
    per_regime: BTreeMap<String, (u64, f64, f64, f64)>,
}

impl Accumulator {
    fn record(&mut self, out: &StepOutcome, reward: f64, num_beams: usize, tail: bool) {
        let outage = out.outage_beams as f64 / num_beams as f64;
        self.n += 1;
        self.rate += out.sum_rate_mbps;
        self.reward += reward;
        self.outage += outage;
        self.fairness += out.terms.fairness;
        if tail {
            self.tail_n += 1;
            self.tail_rate += out.sum_rate_mbps;
            self.tail_reward += reward;
        }
        let e = self
            .per_regime
            .entry(out.regime.as_str().to_string())
            .or_default();
        e.0 += 1;
        e.1 += out.sum_rate_mbps;
        e.2 += outage;
        e.3 += out.terms.fairness;
    }

    fn finish(&self, metrics: &mut RunMetrics) {
        let n = self.n.max(1) as f64;
        let tn = self.tail_n.max(1) as f64;
        metrics.steps = self.n;
        metrics.mean_sum_rate_mbps = self.rate / n;
        metrics.mean_reward = self.reward / n;
        metrics.mean_outage_rate = self.outage / n;
        metrics.mean_fairness = self.fairness / n;
        metrics.final_sum_rate_mbps = self.tail_rate / tn;
        metrics.final_reward = self.tail_reward / tn;
        metrics.per_regime = self
            .per_regime
            .iter()
            .map(|(k, &(c, r, o, f))| {
                let c_f = c as f64;
                (
                    k.clone(),
                    RegimeMetrics {
                        steps: c,
                        mean_sum_rate_mbps: r / c_f,
                        mean_outage_rate: o / c_f,
                        mean_fairness: f / c_f,
                    },
                )
            })
            .collect();
    }
}

enum Actor {
    Ppo(Box<PpoAgent>),
    UniformRandom(rand_chacha::ChaCha8Rng),
}

struct Loop {
    seed: u64,
    env: SatEnv,
    weights: WeightVector,
    acc: Accumulator,
    metrics: RunMetrics,
    trace: Vec<TracePoint>,
    events: Vec<Event>,
    history: Vec<(u64, WeightVector)>,
}

impl Loop {
    fn apply(&mut self, step: u64, next: WeightVector) {
        if next.linf_distance(&self.weights) > SWITCH_TOLERANCE {
            self.metrics.switch_count += 1;
            self.events.push(Event::WeightSwitch {
                step,
                from: self.weights,
                to: next,
            });
        }
        if next != self.weights {
            self.history.push((step, next));
        }
        self.weights = next;
    }

    fn partial(&mut self) -> RunMetrics {
        let mut m = self.metrics.clone();
        self.acc.finish(&mut m);
        m.final_weights = Some(self.weights);
        m
    }
}

fn run(spec: &RunSpec, architect: &mut dyn Architect, seed: u64, mut actor: Actor) -> Result<RunOutput> {
    spec.validate()?;
    let n = spec.link.num_beams;
    let env = SatEnv::new(
        spec.link.clone(),
        spec.env.clone(),
        spec.traffic.clone(),
        spec.schedule.regime_at(0),
        derive_seed(seed, &[0xE7]),
    );
    let mut lp = Loop {
        seed,
        env,
        weights: spec.initial_weights,
        acc: Accumulator::default(),
        metrics: RunMetrics {
            architect: architect.name(),
            seed,
            ..RunMetrics::default()
        },
        trace: Vec::new(),
        events: Vec::new(),
        history: vec![(0, spec.initial_weights)],
    };
    let mut detector = RegimeDetector::new(&spec.cusum);
    let mut rollout = Rollout::default();
    let mut scaler = ReturnScaler::new(spec.ppo.gamma);
    let mut act_rng = stream(seed, &[0xAC7]);
    let tail_start = spec.steps - spec.steps / 10;

    // initial query on the first demand snapshot; not counted as a switch
    let first_kpi = KpiSnapshot::of_demand(&lp.env.state().demand_mbps, 0.0);
    let ctx = ArchitectContext {
        step: 0,
        current: lp.weights,
        regime: lp.env.regime(),
    };
    match architect.propose(&first_kpi, &ctx) {
        Ok(w) => {
            lp.weights = w;
            lp.history = vec![(0, w)];
        }
        Err(e) => return Err(fail(&mut lp, 0, e)),
    }
    lp.events.extend(architect.drain_events());

    for step in 0..spec.steps {
        let obs = lp.env.observation();
        let sample = match &mut actor {
            Actor::Ppo(agent) => match agent.policy.act(&obs, &mut act_rng, true) {
                Ok(s) => Some(s),
                Err(e) => return Err(fail(&mut lp, step, e)),
            },
            Actor::UniformRandom(_) => None,
        };
        let alloc = match (&sample, &mut actor) {
            (Some(s), _) => s.alloc.clone(),
            (None, Actor::UniformRandom(rng)) => uniform_simplex_prefix(rng, n),
            (None, Actor::Ppo(_)) => unreachable!("ppo always samples"),
        };
        let out = match lp.env.step(&alloc, spec.schedule.regime_at(step + 1)) {
            Ok(o) => o,
            Err(e) => return Err(fail(&mut lp, step, e)),
        };
        let reward = compose(&lp.weights, &out.terms);
        lp.acc.record(&out, reward, n, step >= tail_start);
        if step % spec.trace_every.max(1) == 0 {
            lp.trace.push(TracePoint {
                step,
                regime: out.regime,
                sum_rate_mbps: out.sum_rate_mbps,
                reward,
                outage_rate: out.outage_beams as f64 / n as f64,
                fairness: out.terms.fairness,
                switching: out.terms.switching,
                weights: lp.weights,
            });
        }

        if let (Some(s), Actor::Ppo(agent)) = (&sample, &mut actor) {
            let r = if spec.ppo.scale_rewards {
                scaler.scale(reward)
            } else {
                reward
            };
            rollout.push(&obs, s, r);
            if rollout.len() >= spec.ppo.rollout_len {
                let boot = match agent.policy.value(&lp.env.observation()) {
                    Ok(v) => v,
                    Err(e) => return Err(fail(&mut lp, step, e)),
                };
                match agent.update(&rollout, boot) {
                    Ok(stats) => {
                        lp.metrics.updates += 1;
                        lp.metrics.last_update = Some(stats);
                    }
                    Err(e) => return Err(fail(&mut lp, step, e)),
                }
                rollout.clear();
            }
        }

        // slow loop
        if let Some(w) = architect.tick(step + 1, &lp.weights) {
            lp.apply(step + 1, w);
        }
        if let Some(alarm) = detector.update(&out.kpi, step) {
            lp.metrics.alarm_count += 1;
            lp.events.push(alarm.to_event());
            let ctx = ArchitectContext {
                step: step + 1,
                current: lp.weights,
                regime: lp.env.regime(),
            };
            match architect.propose(&out.kpi, &ctx) {
                Ok(w) => lp.apply(step + 1, w),
                Err(e) => return Err(fail(&mut lp, step, e)),
            }
        }
        lp.events.extend(architect.drain_events());
    }

    let metrics = lp.partial();
    let policy = match actor {
        Actor::Ppo(agent) => Some(agent.policy),
        Actor::UniformRandom(_) => None,
    };
    log::info!(
        "run {} seed {}: mean rate {:.1} Mbps, {} switches",
        metrics.architect,
        lp.seed,
        metrics.mean_sum_rate_mbps,
        metrics.switch_count
    );
    Ok(RunOutput {
        metrics,
        trace: lp.trace,
        events: lp.events,
        weight_history: lp.history,
        policy,
    })
}

fn fail(lp: &mut Loop, step: u64, source: Error) -> Error {
    Error::RunFailed {
        step,
        source: Box::new(source),
        partial: Box::new(lp.partial()),
    }
}

/// Uniform point on the `(n+1)`-simplex, slack share dropped.
fn uniform_simplex_prefix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..=n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e[..n].iter().map(|v| v / s).collect()
}

/// Train a fresh PPO agent under `architect` for `spec.steps` steps.
pub fn train(spec: &RunSpec, architect: &mut dyn Architect, seed: u64) -> Result<RunOutput> {
    let mut init_rng = stream(seed, &[0x9011]);
    let policy = PolicyNet::new(
        observation_dim(spec.link.num_beams),
        &spec.ppo.hidden,
        spec.link.num_beams,
        spec.ppo.init_temperature,
        &mut init_rng,
    )?;
    let agent = PpoAgent::new(policy, spec.ppo.clone(), stream(seed, &[0x0BD]));
    run(spec, architect, seed, Actor::Ppo(Box::new(agent)))
}

/// Same loop with uniformly random allocations and no learning.
pub fn random_baseline(spec: &RunSpec, architect: &mut dyn Architect, seed: u64) -> Result<RunOutput> {
    run(spec, architect, seed, Actor::UniformRandom(stream(seed, &[0x2A4D])))
}
