//! Adaptive-reward beam scheduling for multi-beam LEO satellites.
//!
//! The crate is organized around the two timescales of the scheduler:
//!
//! * [`satenv`] and [`ppo`] form the fast loop: a PPO agent allocates the
//!   shared bandwidth pool across 19 spot beams every step, rewarded by the
//!   weighted objective in [`reward`].
//! * [`detect`] and [`architects`] form the slow loop: CUSUM detectors watch
//!   the traffic KPIs and, on a regime alarm, an architect proposes a new
//!   reward weight vector.
//!
//! [`intent`] adds a strategic layer that turns operator commands into
//! multiplicative weight biases. [`probe`] and [`anchors`] implement
//! single-weight perturbation studies and the performance-grounded anchor
//! store used to ground LLM weight proposals. [`exprun`] wires everything
//! into reproducible experiment presets.

pub mod error;
pub mod rng;
pub mod reward;
pub mod satenv;
pub mod events;
pub mod detect;
pub mod nn;
pub mod anchors;
pub mod llm;
pub mod architects;
pub mod ppo;
pub mod pool;
pub mod probe;
pub mod intent;
pub mod config;
pub mod exprun;

pub use error::{Error, Result};
pub use reward::{compose, relative_clamp, WeightVector};
pub use satenv::{KpiSnapshot, RegimeLabel, RewardTerms};
