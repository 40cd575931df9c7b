//! Ka-band downlink budget and Shannon rate.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BOLTZMANN_DBW: f64 = -228.6;
const SPEED_OF_LIGHT_KM_S: f64 = 299_792.458;

/// Physical link parameters shared by all beams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    pub num_beams: usize,
    pub altitude_km: f64,
    pub total_bandwidth_mhz: f64,
    pub carrier_ghz: f64,
    pub eirp_dbw: f64,
    pub rx_gain_dbi: f64,
    pub noise_temp_k: f64,
    pub atmospheric_loss_db: f64,
    /// Mean of the per-step log-normal rain attenuation, dB.
    pub rain_fade_mean_db: f64,
    /// Standard deviation of the rain attenuation, dB.
    pub rain_fade_std_db: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            num_beams: 19,
            altitude_km: 600.0,
            total_bandwidth_mhz: 500.0,
            carrier_ghz: 20.0,
            eirp_dbw: 35.0,
            rx_gain_dbi: 33.0,
            noise_temp_k: 500.0,
            atmospheric_loss_db: 0.5,
            rain_fade_mean_db: 2.0,
            rain_fade_std_db: 1.5,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if self.num_beams < 1 {
            errors.push("link.num_beams must be >= 1".into());
        }
        let positive = [
            ("altitude_km", self.altitude_km),
            ("total_bandwidth_mhz", self.total_bandwidth_mhz),
            ("carrier_ghz", self.carrier_ghz),
            ("noise_temp_k", self.noise_temp_k),
            ("rain_fade_mean_db", self.rain_fade_mean_db),
            ("rain_fade_std_db", self.rain_fade_std_db),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                errors.push(format!("link.{name} must be finite and > 0 (got {v})"));
            }
        }
        for (name, v) in [
            ("eirp_dbw", self.eirp_dbw),
            ("rx_gain_dbi", self.rx_gain_dbi),
            ("atmospheric_loss_db", self.atmospheric_loss_db),
        ] {
            if !v.is_finite() {
                errors.push(format!("link.{name} must be finite (got {v})"));
            }
        }
    }

    /// Free-space path loss at nadir, dB.
    pub fn free_space_loss_db(&self) -> f64 {
        let wavelength_km = SPEED_OF_LIGHT_KM_S / (self.carrier_ghz * 1e9);
        20.0 * (4.0 * std::f64::consts::PI * self.altitude_km / wavelength_km).log10()
    }

    /// Noise power over the full system bandwidth, dBW.
    pub fn noise_power_dbw(&self) -> f64 {
        BOLTZMANN_DBW
            + 10.0 * self.noise_temp_k.log10()
            + 10.0 * (self.total_bandwidth_mhz * 1e6).log10()
    }

    /// Clear-sky SNR before rain attenuation, dB.
    pub fn clear_sky_snr_db(&self) -> f64 {
        self.eirp_dbw + self.rx_gain_dbi
            - self.free_space_loss_db()
            - self.atmospheric_loss_db
            - self.noise_power_dbw()
    }

    /// Per-beam SNR for one step: clear-sky SNR minus an independent
    /// log-normal rain attenuation per beam.
    pub fn draw_snr<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let fade = rain_fade(self.rain_fade_mean_db, self.rain_fade_std_db);
        let base = self.clear_sky_snr_db();
        (0..self.num_beams)
            .map(|_| db_to_linear(base - fade.sample(rng)))
            .collect()
    }
}

fn rain_fade(mean: f64, std: f64) -> LogNormal<f64> {
    // moment-matched underlying normal
    let sigma2 = (1.0 + (std * std) / (mean * mean)).ln();
    let mu = mean.ln() - sigma2 / 2.0;
    LogNormal::new(mu, sigma2.sqrt()).expect("validated rain fade parameters")
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Achievable rate of a beam, Mbps: `alloc * B_tot * log2(1 + snr)`.
pub fn shannon_rate(alloc: f64, snr: f64, cfg: &LinkConfig) -> Result<f64> {
    if !(0.0..=1.0).contains(&alloc) {
        return Err(Error::Domain(format!("allocation {alloc} outside [0, 1]")));
    }
    if !(snr >= 0.0) || !snr.is_finite() {
        return Err(Error::Domain(format!("snr {snr} must be finite and >= 0")));
    }
    Ok(alloc * cfg.total_bandwidth_mhz * (1.0 + snr).log2())
}
