//! The 19-beam LEO scheduling environment.

mod env;
mod link;
mod stats;
mod traffic;

pub use env::{
    evaluate_allocation, observation_dim, project_allocation, EnvConfig, EnvState, KpiSnapshot,
    KpiTracker, RewardTerms, SatEnv, StepEval, StepOutcome,
};
pub use link::{db_to_linear, shannon_rate, LinkConfig};
pub use stats::{gini, jain, ls_slope};
pub use traffic::{beam_ring, is_center_beam, Range, RegimeLabel, RegimeSchedule, TrafficConfig};
