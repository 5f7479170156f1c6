//! WiFi RSS fingerprint localization with a sequential importance sampling
//! particle filter.
//!
//! - [`rfmap`]: the fingerprint radio map and nearest-landmark prediction
//! - [`pf`]: particles, likelihood weighting, ESS-triggered multinomial
//!   resampling and the mean-position estimate
//! - [`sim`]: synthetic maps, simulated observations and the stationary
//!   robot experiment
//! - [`grid_oracle`]: a dense-grid Bayes posterior for cross-checking the
//!   filter

pub mod grid_oracle;
pub mod pf;
pub mod rfmap;
pub mod sim;

pub use grid_oracle::{grid_posterior, posterior_mean, GridPosterior, OracleError};
pub use pf::{
    filter_rng, likelihood, log_likelihood, multinomial_indices, step, Estimate, FilterConfig, FilterError,
    FilterRng, OdometryDelta, Particle, ParticleFilter, ParticleSet, StepReport,
};
pub use rfmap::{load_map, save_map, FingerprintMap, Landmark, MapError, Point2, RssVector};
pub use sim::{
    generate_synthetic_map, position_error, run_batch, run_trial, simulate_measurement, BatchSummary, RadioModel,
    ScenarioConfig, SimError, TrialFailure, TrialResult,
};
