//! Supervised KPI-to-weights regressor (5-64-64-5, softplus output).

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Architect, ArchitectContext, ExpertProfiles};
use crate::error::{Error, Result};
use crate::events::Event;
use crate::nn::{Activation, Mlp, SgdMomentum};
use crate::reward::WeightVector;
use crate::rng::stream;
use crate::satenv::{KpiSnapshot, KpiTracker, RegimeLabel, TrafficConfig};

/// Min-max scaling of the five KPI features into roughly `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiScaler {
    pub lo: [f64; 5],
    pub hi: [f64; 5],
}

impl Default for KpiScaler {
    fn default() -> Self {
        KpiScaler {
            lo: [0.0, 0.0, 0.0, 0.0, -5.0],
            hi: [120.0, 250.0, 1.0, 1.0, 5.0],
        }
    }
}

impl KpiScaler {
    pub fn fit(samples: &[[f64; 5]]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("scaler samples"));
        }
        let mut lo = [f64::INFINITY; 5];
        let mut hi = [f64::NEG_INFINITY; 5];
        for s in samples {
            for i in 0..5 {
                lo[i] = lo[i].min(s[i]);
                hi[i] = hi[i].max(s[i]);
            }
        }
        for i in 0..5 {
            if hi[i] - lo[i] < 1e-9 {
                hi[i] = lo[i] + 1.0;
            }
        }
        Ok(KpiScaler { lo, hi })
    }

    pub fn transform(&self, kpi: &KpiSnapshot) -> [f64; 5] {
        let a = kpi.to_array();
        std::array::from_fn(|i| (a[i] - self.lo[i]) / (self.hi[i] - self.lo[i]))
    }
}

/// A trained network together with the scaler it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitectModel {
    pub scaler: KpiScaler,
    pub net: Mlp,
}

impl MlpArchitectModel {
    pub fn untrained(seed: u64) -> Self {
        let mut rng = stream(seed, &[0x3197]);
        MlpArchitectModel {
            scaler: KpiScaler::default(),
            net: Mlp::new(&[5, 64, 64, 5], Activation::Relu, Activation::Softplus, &mut rng),
        }
    }

    /// Raw network output, clamped into the weight bounds.
    pub fn predict(&self, kpi: &KpiSnapshot) -> Result<WeightVector> {
        let x = self.scaler.transform(kpi);
        let y = self.net.forward_one(&x);
        let arr: [f64; 5] = y
            .try_into()
            .map_err(|_| Error::Domain("mlp architect must output 5 values".into()))?;
        if arr.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mlp architect output".into()));
        }
        WeightVector::clamped(arr)
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

pub struct MlpArchitect {
    pub model: MlpArchitectModel,
    events: Vec<Event>,
}

impl MlpArchitect {
    pub fn new(model: MlpArchitectModel) -> Self {
        MlpArchitect {
            model,
            events: Vec::new(),
        }
    }
}

impl Architect for MlpArchitect {
    fn name(&self) -> String {
        "mlp".into()
    }

    fn propose(&mut self, kpi: &KpiSnapshot, ctx: &ArchitectContext) -> Result<WeightVector> {
        for (feature, v) in self.model.scaler.transform(kpi).into_iter().enumerate() {
            if v.abs() > 10.0 {
                self.events.push(Event::UnnormalizedInput {
                    step: ctx.step,
                    feature,
                    value: v,
                });
            }
        }
        self.model.predict(kpi)
    }

    fn drain_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub kpi: KpiSnapshot,
    pub regime: RegimeLabel,
    pub target: WeightVector,
}

/// Labelled KPI windows drawn from the known regimes. Targets are the
/// expert profile of the regime plus Gaussian noise, clamped.
pub fn synthetic_dataset(
    traffic: &TrafficConfig,
    num_beams: usize,
    kpi_window: usize,
    profiles: &ExpertProfiles,
    per_regime: usize,
    label_noise: f64,
    seed: u64,
) -> Result<Vec<TrainingSample>> {
    let noise = Normal::new(0.0, label_noise.max(0.0))
        .map_err(|e| Error::Domain(format!("label noise: {e}")))?;
    let mut rng = stream(seed, &[0xDA7A]);
    let mut out = Vec::with_capacity(per_regime * RegimeLabel::KNOWN.len());
    for (ri, &regime) in RegimeLabel::KNOWN.iter().enumerate() {
        for i in 0..per_regime {
            // each sample gets its own beam layout and step offset
            let episode_seed = crate::rng::derive_seed(seed, &[ri as u64, i as u64]);
            let offset: u64 = rng.random_range(0..10_000);
            let mut tracker = KpiTracker::new(kpi_window);
            let outage: f64 = rng.random_range(0.0..0.3);
            for t in 0..kpi_window as u64 {
                let d = traffic.sample_demand(regime, num_beams, episode_seed, offset + t);
                tracker.push(&d, outage);
            }
            let base = profiles.for_regime(regime).as_array();
            let target = WeightVector::clamped(base.map(|b| (b + noise.sample(&mut rng)).max(0.0)))?;
            out.push(TrainingSample {
                kpi: tracker.snapshot(),
                regime,
                target,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub holdout_fraction: f64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        MlpTrainConfig {
            epochs: 300,
            lr: 1e-3,
            momentum: 0.9,
            batch_size: 32,
            holdout_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpTrainReport {
    pub initial_val_mse: f64,
    pub best_val_mse: f64,
    pub best_epoch: usize,
    pub train_size: usize,
    pub val_size: usize,
}

fn to_matrices(samples: &[&TrainingSample], scaler: &KpiScaler) -> (Array2<f64>, Array2<f64>) {
    let n = samples.len();
    let mut x = Array2::zeros((n, 5));
    let mut y = Array2::zeros((n, 5));
    for (i, s) in samples.iter().enumerate() {
        let xs = scaler.transform(&s.kpi);
        let ys = s.target.as_array();
        for j in 0..5 {
            x[[i, j]] = xs[j];
            y[[i, j]] = ys[j];
        }
    }
    (x, y)
}

fn mse(net: &Mlp, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let out = net.forward(x.view());
    (&out - y).mapv(|d| d * d).mean().unwrap_or(f64::NAN)
}

/// SGD-with-momentum training on MSE. Keeps the parameters with the best
/// holdout loss.
pub fn mlp_train(
    dataset: &[TrainingSample],
    cfg: &MlpTrainConfig,
    seed: u64,
) -> Result<(MlpArchitectModel, MlpTrainReport)> {
    if dataset.len() < 2 {
        return Err(Error::Empty("mlp training set"));
    }
    let mut rng = stream(seed, &[0x7EA1]);
    let mut refs: Vec<&TrainingSample> = dataset.iter().collect();
    refs.shuffle(&mut rng);
    let n_val = ((dataset.len() as f64 * cfg.holdout_fraction).round() as usize).clamp(1, dataset.len() - 1);
    let (val, train) = refs.split_at(n_val);
    let scaler = KpiScaler::fit(&train.iter().map(|s| s.kpi.to_array()).collect::<Vec<_>>())?;
    let (xv, yv) = to_matrices(val, &scaler);
    let (xt, yt) = to_matrices(train, &scaler);

    let mut model = MlpArchitectModel::untrained(seed);
    model.scaler = scaler;
    let initial = mse(&model.net, &xv, &yv);
    let mut best = (initial, 0usize, model.net.clone());
    let mut opt = SgdMomentum::new(cfg.lr, cfg.momentum, model.net.num_params());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grads = vec![0.0; model.net.num_params()];
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let xb = xt.select(ndarray::Axis(0), chunk);
            let yb = yt.select(ndarray::Axis(0), chunk);
            let cache = model.net.forward_cached(xb.view());
            let scale = 2.0 / (chunk.len() * 5) as f64;
            let d_out = (cache.output() - &yb).mapv(|d| d * scale);
            grads.iter_mut().for_each(|g| *g = 0.0);
            model.net.backward(&cache, d_out.view(), &mut grads);
            opt.step(model.net.params_mut(), &grads);
        }
        let v = mse(&model.net, &xv, &yv);
        if !v.is_finite() {
            return Err(Error::Diverged(format!("mlp validation loss at epoch {epoch}")));
        }
        if v < best.0 {
            best = (v, epoch, model.net.clone());
        }
    }
    model.net = best.2;
    Ok((
        model,
        MlpTrainReport {
            initial_val_mse: initial,
            best_val_mse: best.0,
            best_epoch: best.1,
            train_size: train.len(),
            val_size: val.len(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_reduces_validation_loss() {
        let data = synthetic_dataset(
            &TrafficConfig::default(),
            19,
            10,
            &ExpertProfiles::default(),
            100,
            0.05,
            1,
        )
        .unwrap();
        let cfg = MlpTrainConfig {
            epochs: 40,
            ..MlpTrainConfig::default()
        };
        let (model, report) = mlp_train(&data, &cfg, 1).unwrap();
        assert!(report.best_val_mse < report.initial_val_mse);
        assert_eq!(report.val_size, 40);
        let w = model.predict(&data[0].kpi).unwrap();
        assert!(w.is_clamp_valid());
    }

    #[test]
    fn model_json_round_trip() {
        let m = MlpArchitectModel::untrained(3);
        let text = serde_json::to_string(&m).unwrap();
        let back: MlpArchitectModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn wild_input_is_flagged() {
        let mut a = MlpArchitect::new(MlpArchitectModel::untrained(0));
        let ctx = ArchitectContext {
            step: 7,
            current: WeightVector::splat(1.0).unwrap(),
            regime: RegimeLabel::Mixed,
        };
        let w = a.propose(&KpiSnapshot::from_array([5000.0, 10.0, 0.1, 0.0, 0.0]), &ctx).unwrap();
        assert!(w.is_clamp_valid());
        assert!(matches!(
            a.drain_events()[..],
            [Event::UnnormalizedInput { step: 7, feature: 0, .. }]
        ));
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(matches!(
            mlp_train(&[], &MlpTrainConfig::default(), 0),
            Err(Error::Empty(_))
        ));
    }
}
