use serde::{Deserialize, Serialize};

use crate::architects::count_switches;
use crate::error::{Error, Result};
use crate::reward::{WeightVector, WEIGHT_NAMES};

/// Sample mean and standard deviation (n - 1 denominator; 0 for one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(MeanStd { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub name: String,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// `std / mean`; absent when the mean is not positive.
    pub cv: Option<f64>,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationStats {
    pub samples: usize,
    pub components: Vec<ComponentStats>,
    pub switches: u64,
}

impl OscillationStats {
    pub fn cv(&self, index: usize) -> Option<f64> {
        self.components[index].cv
    }
}

/// Per-weight spread of an architect's output sequence.
pub fn oscillation_stats(trajectory: &[WeightVector]) -> Result<OscillationStats> {
    if trajectory.is_empty() {
        return Err(Error::Empty("weight trajectory"));
    }
    let n = trajectory.len() as f64;
    let components = (0..5)
        .map(|i| {
            let xs: Vec<f64> = trajectory.iter().map(|w| w.get(i)).collect();
            let mean = xs.iter().sum::<f64>() / n;
            let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            ComponentStats {
                name: WEIGHT_NAMES[i].to_string(),
                mean,
                std,
                cv: (mean > 0.0).then(|| std / mean),
                min: xs.iter().copied().fold(f64::INFINITY, f64::min),
                max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    Ok(OscillationStats {
        samples: trajectory.len(),
        components,
        switches: count_switches(trajectory) as u64,
    })
}
