//! PPO agent for the fast timescale.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{clip_global_norm, Adam};

mod gae;
mod policy;
mod train;

pub use gae::{gae, normalize, ReturnScaler};
pub use policy::{
    gumbel_log_prob, ActionSample, LossCoefficients, LossStats, MiniBatch, PolicyGrads, PolicyNet,
    LOG_TEMP_MAX, LOG_TEMP_MIN,
};
pub use train::{
    random_baseline, train, RegimeMetrics, RunMetrics, RunOutput, RunSpec, TracePoint,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub lr: f64,
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub rollout_len: usize,
    pub minibatch_size: usize,
    pub epochs_per_update: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub init_temperature: f64,
    pub scale_rewards: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            lr: 3e-4,
            clip_epsilon: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            rollout_len: 2048,
            minibatch_size: 64,
            epochs_per_update: 10,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            hidden: vec![256, 256, 128],
            init_temperature: 0.3,
            scale_rewards: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self, errors: &mut Vec<String>) {
        let pos = [
            ("lr", self.lr),
            ("clip_epsilon", self.clip_epsilon),
            ("max_grad_norm", self.max_grad_norm),
            ("init_temperature", self.init_temperature),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                errors.push(format!("ppo.{name} must be > 0"));
            }
        }
        for (name, v) in [("gamma", self.gamma), ("gae_lambda", self.gae_lambda)] {
            if !(0.0..=1.0).contains(&v) {
                errors.push(format!("ppo.{name} must be in [0, 1]"));
            }
        }
        for (name, v) in [("entropy_coef", self.entropy_coef), ("value_coef", self.value_coef)] {
            if !(v.is_finite() && v >= 0.0) {
                errors.push(format!("ppo.{name} must be >= 0"));
            }
        }
        if self.rollout_len == 0 || self.minibatch_size == 0 || self.epochs_per_update == 0 {
            errors.push("ppo.rollout_len, minibatch_size and epochs_per_update must be > 0".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            errors.push("ppo.hidden must list positive layer widths".into());
        }
    }

    pub fn coefficients(&self) -> LossCoefficients {
        LossCoefficients {
            clip_epsilon: self.clip_epsilon,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }
}

/// Transitions collected since the last update.
#[derive(Debug, Clone, Default)]
pub struct Rollout {
    obs: Vec<f64>,
    z: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
}

impl Rollout {
    pub fn push(&mut self, obs: &[f64], sample: &ActionSample, reward: f64) {
        self.obs.extend_from_slice(obs);
        self.z.extend_from_slice(&sample.z);
        self.log_probs.push(sample.log_prob);
        self.values.push(sample.value);
        self.rewards.push(reward);
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn clear(&mut self) {
        self.obs.clear();
        self.z.clear();
        self.log_probs.clear();
        self.values.clear();
        self.rewards.clear();
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub loss: LossStats,
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Policy plus optimizer state.
pub struct PpoAgent {
    pub policy: PolicyNet,
    pub cfg: PpoConfig,
    opt: Adam,
    rng: ChaCha8Rng,
}

impl PpoAgent {
    pub fn new(policy: PolicyNet, cfg: PpoConfig, rng: ChaCha8Rng) -> Self {
        let opt = Adam::new(cfg.lr, &policy.segment_lens());
        PpoAgent {
            policy,
            cfg,
            opt,
            rng,
        }
    }

    /// Several epochs of minibatch clipped-surrogate descent on `rollout`.
    pub fn update(&mut self, rollout: &Rollout, bootstrap_value: f64) -> Result<UpdateStats> {
        let n = rollout.len();
        if n == 0 {
            return Err(Error::Empty("rollout"));
        }
        let d = self.policy.obs_dim();
        let k = self.policy.num_logits();
        let mut adv = gae(
            &rollout.rewards,
            &rollout.values,
            bootstrap_value,
            self.cfg.gamma,
            self.cfg.gae_lambda,
        )?;
        let returns: Vec<f64> = adv.iter().zip(&rollout.values).map(|(a, v)| a + v).collect();
        normalize(&mut adv);
        let obs = Array2::from_shape_vec((n, d), rollout.obs.clone())
            .map_err(|e| Error::Domain(e.to_string()))?;
        let z = Array2::from_shape_vec((n, k), rollout.z.clone())
            .map_err(|e| Error::Domain(e.to_string()))?;

        let coef = self.cfg.coefficients();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut acc = UpdateStats::default();
        for _ in 0..self.cfg.epochs_per_update {
            idx.shuffle(&mut self.rng);
            for chunk in idx.chunks(self.cfg.minibatch_size) {
                let batch = MiniBatch {
                    obs: obs.select(ndarray::Axis(0), chunk),
                    z: z.select(ndarray::Axis(0), chunk),
                    old_log_prob: chunk.iter().map(|&i| rollout.log_probs[i]).collect(),
                    advantages: chunk.iter().map(|&i| adv[i]).collect(),
                    returns: chunk.iter().map(|&i| returns[i]).collect(),
                };
                let (stats, mut grads) = self.policy.loss_and_grad(&batch, &coef);
                if !stats.total.is_finite() {
                    return Err(Error::Diverged(format!("ppo loss {}", stats.total)));
                }
                let norm = clip_global_norm(&mut grads.segments_mut(), self.cfg.max_grad_norm);
                if !norm.is_finite() {
                    return Err(Error::Diverged("ppo gradient norm".into()));
                }
                let g = &grads;
                self.opt.step(
                    &mut self.policy.params_mut(),
                    &[&g.trunk, &g.policy, &g.value, &g.log_temp],
                );
                self.policy.clamp_temperatures();
                acc.loss = stats;
                acc.grad_norm = norm;
                acc.minibatches += 1;
            }
        }
        Ok(acc)
    }
}
