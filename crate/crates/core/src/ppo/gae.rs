//! Generalized advantage estimation and reward scaling.

use crate::error::{Error, Result};

/// GAE over a continuing trajectory. `bootstrap` is the value estimate of
/// the state after the last reward.
///
/// ```text
/// delta_t = r_t + gamma V_{t+1} - V_t
/// A_t     = delta_t + gamma lambda A_{t+1}
/// ```
pub fn gae(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    if rewards.len() != values.len() {
        return Err(Error::Domain(format!(
            "gae: {} rewards but {} values",
            rewards.len(),
            values.len()
        )));
    }
    let mut adv = vec![0.0; rewards.len()];
    let mut next_value = bootstrap;
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
        next_value = values[t];
    }
    Ok(adv)
}

/// Shift and scale to zero mean and unit standard deviation.
pub fn normalize(values: &mut [f64]) {
    let n = values.len();
    if n < 2 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt().max(1e-8);
    values.iter_mut().for_each(|v| *v = (*v - mean) / std);
}

/// Divides rewards by the running standard deviation of the discounted
/// return, keeping value targets O(1) whatever the weight scale.
#[derive(Debug, Clone)]
pub struct ReturnScaler {
    gamma: f64,
    ret: f64,
    count: f64,
    mean: f64,
    m2: f64,
}

impl ReturnScaler {
    pub fn new(gamma: f64) -> Self {
        ReturnScaler {
            gamma,
            ret: 0.0,
            count: 0.0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    pub fn scale(&mut self, reward: f64) -> f64 {
        self.ret = self.gamma * self.ret + reward;
        self.count += 1.0;
        let d = self.ret - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (self.ret - self.mean);
        let std = if self.count > 1.0 {
            (self.m2 / (self.count - 1.0)).sqrt()
        } else {
            0.0
        };
        if std > 1e-8 {
            reward / std
        } else {
            reward
        }
    }
}
