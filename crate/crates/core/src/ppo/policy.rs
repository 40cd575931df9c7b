//! Actor-critic network over the bandwidth simplex.
//!
//! A shared ReLU trunk feeds a logit head with one output per beam plus one
//! slack output, and a scalar value head. Exploration adds Gumbel noise with
//! a learnable per-logit temperature to the logits; the allocation is the
//! softmax of the perturbed logits with the slack share dropped, so every
//! sampled action is feasible by construction. Log-probabilities are taken
//! on the perturbed logits:
//!
//! ```text
//! z_j = mu_j + tau_j * g_j,   g_j ~ Gumbel(0, 1)
//! log p(z) = sum_j ( -ln tau_j - u_j - exp(-u_j) ),   u_j = (z_j - mu_j) / tau_j
//! ```

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
pub const LOG_TEMP_MIN: f64 = -3.912_023_005_428_146; // ln 0.02
pub const LOG_TEMP_MAX: f64 = std::f64::consts::LN_2;

/// One sampled action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSample {
    /// Per-beam bandwidth fractions, summing to at most 1.
    pub alloc: Vec<f64>,
    /// Perturbed logits, the quantity the log-probability refers to.
    pub z: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

/// Training batch for [`PolicyNet::loss_and_grad`].
#[derive(Debug, Clone)]
pub struct MiniBatch {
    pub obs: Array2<f64>,
    pub z: Array2<f64>,
    pub old_log_prob: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Gradients laid out like the network's parameter segments.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrads {
    pub trunk: Vec<f64>,
    pub policy: Vec<f64>,
    pub value: Vec<f64>,
    pub log_temp: Vec<f64>,
}

impl PolicyGrads {
    pub fn segments_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.trunk, &mut self.policy, &mut self.value, &mut self.log_temp]
    }

    pub fn flatten(&self) -> Vec<f64> {
        [&self.trunk[..], &self.policy, &self.value, &self.log_temp].concat()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    trunk: Mlp,
    policy_head: Mlp,
    value_head: Mlp,
    log_temp: Vec<f64>,
}

fn softmax_prefix(z: &[f64], n: usize) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e[..n].iter().map(|v| v / s).collect()
}

/// Log-density of one Gumbel-perturbed logit vector.
pub fn gumbel_log_prob(z: &[f64], mu: &[f64], log_temp: &[f64]) -> f64 {
    z.iter()
        .zip(mu)
        .zip(log_temp)
        .map(|((z, m), s)| {
            let u = (z - m) * (-s).exp();
            -s - u - (-u).exp()
        })
        .sum()
}

impl PolicyNet {
    /// `hidden` are the trunk widths; the logit head has `num_beams + 1`
    /// outputs.
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: &[usize],
        num_beams: usize,
        init_temperature: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::Domain("policy trunk needs at least one hidden layer".into()));
        }
        if !(init_temperature.is_finite() && init_temperature > 0.0) {
            return Err(Error::Domain("initial temperature must be > 0".into()));
        }
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        let trunk = Mlp::new(&sizes, Activation::Relu, Activation::Relu, rng);
        let feat = *hidden.last().expect("non-empty");
        let mut policy_head = Mlp::new(&[feat, num_beams + 1], Activation::Identity, Activation::Identity, rng);
        policy_head.scale_output_layer(0.01);
        let value_head = Mlp::new(&[feat, 1], Activation::Identity, Activation::Identity, rng);
        Ok(PolicyNet {
            trunk,
            policy_head,
            value_head,
            log_temp: vec![init_temperature.ln().clamp(LOG_TEMP_MIN, LOG_TEMP_MAX); num_beams + 1],
        })
    }

    pub fn num_beams(&self) -> usize {
        self.log_temp.len() - 1
    }

    pub fn num_logits(&self) -> usize {
        self.log_temp.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn temperatures(&self) -> Vec<f64> {
        self.log_temp.iter().map(|s| s.exp()).collect()
    }

    pub fn segment_lens(&self) -> [usize; 4] {
        [
            self.trunk.num_params(),
            self.policy_head.num_params(),
            self.value_head.num_params(),
            self.log_temp.len(),
        ]
    }

    pub fn params_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.trunk.params_mut(),
            self.policy_head.params_mut(),
            self.value_head.params_mut(),
            &mut self.log_temp,
        ]
    }

    pub fn flat_params(&self) -> Vec<f64> {
        [
            self.trunk.params(),
            self.policy_head.params(),
            self.value_head.params(),
            &self.log_temp,
        ]
        .concat()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut off = 0;
        for seg in self.params_mut() {
            let n = seg.len();
            seg.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    pub fn zero_grads(&self) -> PolicyGrads {
        let [t, p, v, l] = self.segment_lens();
        PolicyGrads {
            trunk: vec![0.0; t],
            policy: vec![0.0; p],
            value: vec![0.0; v],
            log_temp: vec![0.0; l],
        }
    }

    pub fn clamp_temperatures(&mut self) {
        for s in &mut self.log_temp {
            *s = s.clamp(LOG_TEMP_MIN, LOG_TEMP_MAX);
        }
    }

    /// Logits and state value for one observation.
    pub fn evaluate(&self, obs: &[f64]) -> Result<(Vec<f64>, f64)> {
        if obs.len() != self.obs_dim() {
            return Err(Error::Domain(format!(
                "observation has {} values, policy expects {}",
                obs.len(),
                self.obs_dim()
            )));
        }
        let h = self.trunk.forward_one(obs);
        let mu = self.policy_head.forward_one(&h);
        let v = self.value_head.forward_one(&h)[0];
        if mu.iter().any(|m| !m.is_finite()) || !v.is_finite() {
            return Err(Error::NonFinite("policy output".into()));
        }
        Ok((mu, v))
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.evaluate(obs)?.1)
    }

    /// Sample an allocation, or take the noise-free one when
    /// `stochastic` is false.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R, stochastic: bool) -> Result<ActionSample> {
        let (mu, value) = self.evaluate(obs)?;
        let z: Vec<f64> = if stochastic {
            mu.iter()
                .zip(&self.log_temp)
                .map(|(m, s)| {
                    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
                    m + s.exp() * -(-u.ln()).ln()
                })
                .collect()
        } else {
            mu.clone()
        };
        Ok(ActionSample {
            alloc: softmax_prefix(&z, self.num_beams()),
            log_prob: gumbel_log_prob(&z, &mu, &self.log_temp),
            z,
            value,
        })
    }

    /// Differential entropy of the perturbation, independent of the state.
    pub fn entropy(&self) -> f64 {
        self.log_temp.iter().map(|s| s + 1.0 + EULER_GAMMA).sum()
    }

    /// Clipped-surrogate loss and its gradient:
    ///
    /// `L = -mean(min(rho A, clip(rho) A)) + c_v mean((V - G)^2) - c_e H`
    pub fn loss_and_grad(&self, batch: &MiniBatch, coef: &LossCoefficients) -> (LossStats, PolicyGrads) {
        let b = batch.obs.nrows();
        let k = self.num_logits();
        let bf = b as f64;
        let trunk_cache = self.trunk.forward_cached(batch.obs.view());
        let feat = trunk_cache.output();
        let pol_cache = self.policy_head.forward_cached(feat.view());
        let val_cache = self.value_head.forward_cached(feat.view());
        let mu = pol_cache.output();
        let v = val_cache.output();

        let inv_temp: Vec<f64> = self.log_temp.iter().map(|s| (-s).exp()).collect();
        let mut d_mu = Array2::<f64>::zeros((b, k));
        let mut d_v = Array2::<f64>::zeros((b, 1));
        let mut grads = self.zero_grads();
        let mut stats = LossStats::default();
        let (lo, hi) = (1.0 - coef.clip_epsilon, 1.0 + coef.clip_epsilon);

        for i in 0..b {
            let mut logp = 0.0;
            for j in 0..k {
                let u = (batch.z[[i, j]] - mu[[i, j]]) * inv_temp[j];
                logp += -self.log_temp[j] - u - (-u).exp();
            }
            let ratio = (logp - batch.old_log_prob[i]).exp();
            let a = batch.advantages[i];
            let surr1 = ratio * a;
            let surr2 = ratio.clamp(lo, hi) * a;
            stats.policy -= surr1.min(surr2) / bf;
            stats.approx_kl += (batch.old_log_prob[i] - logp) / bf;
            if (ratio - 1.0).abs() > coef.clip_epsilon {
                stats.clip_fraction += 1.0 / bf;
            }
            // d(-min)/d logp, zero when the clipped branch is the minimum
            let coef_logp = if surr1 <= surr2 { -surr1 / bf } else { 0.0 };
            if coef_logp != 0.0 {
                for j in 0..k {
                    let u = (batch.z[[i, j]] - mu[[i, j]]) * inv_temp[j];
                    let e = (-u).exp();
                    d_mu[[i, j]] = coef_logp * (1.0 - e) * inv_temp[j];
                    grads.log_temp[j] += coef_logp * (-1.0 + u * (1.0 - e));
                }
            }
            let err = v[[i, 0]] - batch.returns[i];
            stats.value += err * err / bf;
            d_v[[i, 0]] = 2.0 * coef.value_coef * err / bf;
        }
        stats.entropy = self.entropy();
        for g in &mut grads.log_temp {
            *g -= coef.entropy_coef;
        }
        stats.total = stats.policy + coef.value_coef * stats.value - coef.entropy_coef * stats.entropy;

        let d_feat_p = self.policy_head.backward(&pol_cache, d_mu.view(), &mut grads.policy);
        let d_feat_v = self.value_head.backward(&val_cache, d_v.view(), &mut grads.value);
        let d_feat = d_feat_p + d_feat_v;
        self.trunk.backward(&trunk_cache, d_feat.view(), &mut grads.trunk);
        (stats, grads)
    }

    /// Loss only, for finite-difference checks.
    pub fn loss(&self, batch: &MiniBatch, coef: &LossCoefficients) -> f64 {
        let feat = self.trunk.forward(batch.obs.view());
        let mu = self.policy_head.forward(feat.view());
        let v = self.value_head.forward(feat.view());
        let b = batch.obs.nrows() as f64;
        let mut total = 0.0;
        for i in 0..batch.obs.nrows() {
            let z = batch.z.row(i).to_vec();
            let m = mu.row(i).to_vec();
            let ratio = (gumbel_log_prob(&z, &m, &self.log_temp) - batch.old_log_prob[i]).exp();
            let a = batch.advantages[i];
            let clipped = ratio.clamp(1.0 - coef.clip_epsilon, 1.0 + coef.clip_epsilon) * a;
            total -= (ratio * a).min(clipped) / b;
            total += coef.value_coef * (v[[i, 0]] - batch.returns[i]).powi(2) / b;
        }
        total - coef.entropy_coef * self.entropy()
    }

    pub fn batch_values(&self, obs: ArrayView2<'_, f64>) -> Vec<f64> {
        let feat = self.trunk.forward(obs);
        self.value_head.forward(feat.view()).column(0).to_vec()
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
