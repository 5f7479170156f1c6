//! Synthetic scenarios and the stationary-robot experiment runner.
//!
//! Maps are synthesized with a log-distance path-loss model on a regular,
//! corner-anchored landmark grid. A trial scatters particles over the area
//! and runs a fixed number of filter steps against a robot that does not
//! move; a batch repeats that with per-trial seeds `seed + trial_index`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pf::{filter_rng, FilterConfig, FilterError, FilterRng, OdometryDelta, ParticleFilter, ParticleSet};
use crate::rfmap::{load_map, FingerprintMap, Landmark, MapError, Point2, RssVector};

/// Robot position used in the stationary experiment, meters.
pub const DEFAULT_ROBOT: Point2 = Point2::new(2.4, 3.6);
pub const DEFAULT_ITERATIONS: usize = 50;
pub const DEFAULT_TRIALS: usize = 10;
pub const DEFAULT_GRID_SPACING: f64 = 1.0;
pub const DEFAULT_AREA: f64 = 10.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid radio model: {0}")]
    InvalidRadioModel(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("scenario file {path}: {reason}")]
    ScenarioFile { path: String, reason: String },
    #[error("all {} trials failed; first failure: {}", .0.len(), .0[0])]
    AllTrialsFailed(Vec<TrialFailure>),
}

/// Log-distance path-loss model:
/// `rss(d) = p0 - 10 n log10(max(d, d0) / d0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioModel {
    #[serde(rename = "p0_dbm")]
    pub p0: f64,
    #[serde(rename = "d0_m")]
    pub d0: f64,
    pub path_loss_exponent: f64,
    /// Nominal shadowing spread of the environment, dBm.
    #[serde(rename = "shadowing_sigma_dbm")]
    pub shadowing_sigma: f64,
}

impl Default for RadioModel {
    fn default() -> Self {
        Self {
            p0: -40.0,
            d0: 1.0,
            path_loss_exponent: 2.2,
            shadowing_sigma: 0.0,
        }
    }
}

impl RadioModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return Err(SimError::InvalidRadioModel(format!("d0 must be > 0, got {}", self.d0)));
        }
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 0.0) {
            return Err(SimError::InvalidRadioModel(format!(
                "path_loss_exponent must be > 0, got {}",
                self.path_loss_exponent
            )));
        }
        if !(self.shadowing_sigma.is_finite() && self.shadowing_sigma >= 0.0) {
            return Err(SimError::InvalidRadioModel(format!(
                "shadowing_sigma must be >= 0, got {}",
                self.shadowing_sigma
            )));
        }
        if !self.p0.is_finite() {
            return Err(SimError::InvalidRadioModel("p0 must be finite".into()));
        }
        Ok(())
    }

    /// Noiseless RSS at distance `d` meters. Distances below `d0` are
    /// floored to `d0`.
    pub fn rss_at(&self, d: f64) -> f64 {
        self.p0 - 10.0 * self.path_loss_exponent * (d.max(self.d0) / self.d0).log10()
    }

    pub fn fingerprint(&self, ap_positions: &[Point2], at: Point2) -> RssVector {
        RssVector::new(ap_positions.iter().map(|ap| self.rss_at(ap.distance(&at))).collect())
    }
}

/// Access points at the four corners and the center of the area.
pub fn default_ap_positions(area_length: f64, area_width: f64) -> Vec<Point2> {
    vec![
        Point2::new(0.0, 0.0),
        Point2::new(area_length, 0.0),
        Point2::new(0.0, area_width),
        Point2::new(area_length, area_width),
        Point2::new(area_length / 2.0, area_width / 2.0),
    ]
}

fn grid_coords(extent: f64, spacing: f64) -> Vec<f64> {
    let steps = ((extent / spacing) + 1e-9).floor() as usize;
    (0..=steps).map(|k| (k as f64 * spacing).min(extent)).collect()
}

/// Builds a map with landmarks on a corner-anchored grid of the given
/// spacing, ordered row by row (y outer, x inner). Stored fingerprints are
/// noiseless path-loss values; access points are named `ap0..apK-1`.
pub fn generate_synthetic_map(
    area_length: f64,
    area_width: f64,
    ap_positions: &[Point2],
    grid_spacing: f64,
    model: &RadioModel,
) -> Result<FingerprintMap, SimError> {
    model.validate()?;
    if !(area_length.is_finite() && area_length > 0.0 && area_width.is_finite() && area_width > 0.0) {
        return Err(SimError::InvalidGeometry(format!(
            "area must be positive, got {area_length} x {area_width}"
        )));
    }
    if ap_positions.is_empty() {
        return Err(SimError::InvalidGeometry("at least one access point is required".into()));
    }
    if let Some(ap) = ap_positions.iter().find(|p| !p.is_finite()) {
        return Err(SimError::InvalidGeometry(format!("non-finite access point position {ap:?}")));
    }
    if !(grid_spacing.is_finite() && grid_spacing > 0.0 && grid_spacing <= area_length.min(area_width)) {
        return Err(SimError::InvalidGeometry(format!(
            "grid spacing must be in (0, {}], got {grid_spacing}",
            area_length.min(area_width)
        )));
    }
    let xs = grid_coords(area_length, grid_spacing);
    let ys = grid_coords(area_width, grid_spacing);
    let mut landmarks = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            let position = Point2::new(x, y);
            landmarks.push(Landmark {
                id: landmarks.len(),
                position,
                rss: model.fingerprint(ap_positions, position),
            });
        }
    }
    let ap_ids = (0..ap_positions.len()).map(|j| format!("ap{j}")).collect();
    Ok(FingerprintMap::new(area_length, area_width, ap_ids, landmarks)?)
}

/// Path-loss RSS at the robot plus i.i.d. zero-mean Gaussian noise per AP.
pub fn simulate_measurement(
    model: &RadioModel,
    ap_positions: &[Point2],
    robot: Point2,
    noise_sigma: f64,
    rng: &mut impl Rng,
) -> RssVector {
    let clean = model.fingerprint(ap_positions, robot);
    if noise_sigma <= 0.0 {
        return clean;
    }
    let noise = Normal::new(0.0, noise_sigma).expect("finite positive sigma");
    RssVector::new(clean.into_inner().into_iter().map(|v| v + noise.sample(rng)).collect())
}

/// Euclidean distance between estimate and truth, meters.
pub fn position_error(estimate: Point2, truth: Point2) -> f64 {
    estimate.distance(&truth)
}

/// Everything needed to run the stationary experiment.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub map: FingerprintMap,
    /// AP positions used to simulate observations; one per map access point.
    pub ap_positions: Vec<Point2>,
    pub radio: RadioModel,
    pub robot_position: Point2,
    pub iterations: usize,
    pub trials: usize,
    /// `filter.seed` is the batch base seed.
    pub filter: FilterConfig,
    pub observation_noise_sigma: f64,
    /// Draw one observation per trial and reuse it every step.
    pub fixed_observation: bool,
}

impl ScenarioConfig {
    /// 10 x 10 m area, APs at the corners and center, 1 m landmark grid,
    /// robot at (2.4, 3.6), 50 iterations, 10 trials, noiseless observations.
    pub fn default_with_particles(n_particles: usize) -> Self {
        let radio = RadioModel::default();
        let ap_positions = default_ap_positions(DEFAULT_AREA, DEFAULT_AREA);
        let map = generate_synthetic_map(DEFAULT_AREA, DEFAULT_AREA, &ap_positions, DEFAULT_GRID_SPACING, &radio)
            .expect("default scenario map is valid");
        Self {
            map,
            ap_positions,
            radio,
            robot_position: DEFAULT_ROBOT,
            iterations: DEFAULT_ITERATIONS,
            trials: DEFAULT_TRIALS,
            filter: FilterConfig {
                n_particles,
                ..FilterConfig::default()
            },
            observation_noise_sigma: radio.shadowing_sigma,
            fixed_observation: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.filter.validate()?;
        self.radio.validate()?;
        let p = self.robot_position;
        if !p.is_finite() || p.x < 0.0 || p.y < 0.0 || p.x > self.map.area_length() || p.y > self.map.area_width() {
            return Err(SimError::InvalidScenario(format!(
                "robot position ({}, {}) lies outside the {} x {} area",
                p.x,
                p.y,
                self.map.area_length(),
                self.map.area_width()
            )));
        }
        if self.iterations < 1 {
            return Err(SimError::InvalidScenario("iterations must be at least 1".into()));
        }
        if self.trials < 1 {
            return Err(SimError::InvalidScenario("trials must be at least 1".into()));
        }
        if self.ap_positions.len() != self.map.ap_count() {
            return Err(SimError::InvalidScenario(format!(
                "{} AP positions given but the map has {} access points",
                self.ap_positions.len(),
                self.map.ap_count()
            )));
        }
        if !(self.observation_noise_sigma.is_finite() && self.observation_noise_sigma >= 0.0) {
            return Err(SimError::InvalidScenario(format!(
                "observation noise sigma must be >= 0, got {}",
                self.observation_noise_sigma
            )));
        }
        Ok(())
    }

    /// Seed of trial `index`: base seed plus index, wrapping.
    pub fn trial_seed(&self, index: usize) -> u64 {
        self.filter.seed.wrapping_add(index as u64)
    }
}

/// One row of the results table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub trial_index: usize,
    pub estimate: Point2,
    pub error_m: f64,
    pub iterations_run: usize,
    pub resample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("trial {trial_index} failed at iteration {iteration}: {error}")]
pub struct TrialFailure {
    pub trial_index: usize,
    pub iteration: usize,
    pub error: FilterError,
}

/// Trial result together with the final particle cloud.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub result: TrialResult,
    pub particles: ParticleSet,
}

fn measurement_rng(trial_seed: u64) -> FilterRng {
    let mut rng = filter_rng(trial_seed);
    rng.set_stream(1);
    rng
}

/// Runs one stationary trial and keeps the final particles.
pub fn run_trial_detailed(
    scenario: &ScenarioConfig,
    trial_index: usize,
    trial_seed: u64,
) -> Result<TrialRun, TrialFailure> {
    let fail = |iteration, error| TrialFailure {
        trial_index,
        iteration,
        error,
    };
    let config = FilterConfig {
        seed: trial_seed,
        ..scenario.filter
    };
    let mut filter = ParticleFilter::new(config, scenario.map.area_length(), scenario.map.area_width())
        .map_err(|e| fail(0, e))?;
    let mut obs_rng = measurement_rng(trial_seed);
    let mut observe = || {
        simulate_measurement(
            &scenario.radio,
            &scenario.ap_positions,
            scenario.robot_position,
            scenario.observation_noise_sigma,
            &mut obs_rng,
        )
    };
    let fixed = scenario.fixed_observation.then(&mut observe);

    let mut last = None;
    for it in 0..scenario.iterations {
        let observed = match &fixed {
            Some(o) => o.clone(),
            None => observe(),
        };
        let report = filter
            .step(&scenario.map, OdometryDelta::STATIONARY, &observed)
            .map_err(|e| fail(it, e))?;
        last = Some(report.estimate.position);
    }
    let estimate = last.ok_or_else(|| fail(0, FilterError::Empty))?;
    Ok(TrialRun {
        result: TrialResult {
            trial_index,
            estimate,
            error_m: position_error(estimate, scenario.robot_position),
            iterations_run: filter.steps(),
            resample_count: filter.resample_count(),
        },
        particles: filter.particles().clone(),
    })
}

/// Runs one stationary trial: scatter, then `iterations` steps with zero
/// odometry and a simulated observation each step.
pub fn run_trial(
    scenario: &ScenarioConfig,
    trial_index: usize,
    trial_seed: u64,
) -> Result<TrialResult, TrialFailure> {
    run_trial_detailed(scenario, trial_index, trial_seed).map(|run| run.result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub results: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
    pub mean_error_m: f64,
    pub min_error_m: f64,
    pub max_error_m: f64,
}

impl BatchSummary {
    /// Aggregates successful trials. Returns `None` when `results` is empty.
    pub fn from_results(results: Vec<TrialResult>, failures: Vec<TrialFailure>) -> Option<Self> {
        if results.is_empty() {
            return None;
        }
        let errors = results.iter().map(|r| r.error_m);
        let mean_error_m = errors.clone().sum::<f64>() / results.len() as f64;
        let min_error_m = errors.clone().fold(f64::INFINITY, f64::min);
        let max_error_m = errors.fold(f64::NEG_INFINITY, f64::max);
        Some(Self {
            results,
            failures,
            mean_error_m,
            min_error_m,
            max_error_m,
        })
    }
}

/// Runs every trial (in parallel) and aggregates the successes.
pub fn run_batch(scenario: &ScenarioConfig) -> Result<BatchSummary, SimError> {
    scenario.validate()?;
    let outcomes: Vec<_> = (0..scenario.trials)
        .into_par_iter()
        .map(|i| run_trial(scenario, i, scenario.trial_seed(i)))
        .collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }
    BatchSummary::from_results(results, failures.clone()).ok_or(SimError::AllTrialsFailed(failures))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointFile {
    x_m: f64,
    y_m: f64,
}

impl From<PointFile> for Point2 {
    fn from(p: PointFile) -> Self {
        Point2::new(p.x_m, p.y_m)
    }
}

impl From<Point2> for PointFile {
    fn from(p: Point2) -> Self {
        PointFile { x_m: p.x, y_m: p.y }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SyntheticMapFile {
    area_length_m: f64,
    area_width_m: f64,
    grid_spacing_m: f64,
}

impl Default for SyntheticMapFile {
    fn default() -> Self {
        Self {
            area_length_m: DEFAULT_AREA,
            area_width_m: DEFAULT_AREA,
            grid_spacing_m: DEFAULT_GRID_SPACING,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FilterFile {
    n_particles: usize,
    sigma_dbm: f64,
    jitter_m: f64,
    resample_fraction: f64,
    seed: u64,
}

impl Default for FilterFile {
    fn default() -> Self {
        let c = FilterConfig::default();
        Self {
            n_particles: c.n_particles,
            sigma_dbm: c.sigma,
            jitter_m: c.jitter,
            resample_fraction: c.resample_fraction,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ObservationFile {
    noise_sigma_dbm: Option<f64>,
    fixed: bool,
}

/// On-disk scenario description. Every field is optional and falls back to
/// the default scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ScenarioFile {
    /// Map JSON, relative to the scenario file. When absent a map is
    /// synthesized from `synthetic` and `radio`.
    map_path: Option<PathBuf>,
    synthetic: SyntheticMapFile,
    ap_positions: Option<Vec<PointFile>>,
    radio: RadioModel,
    robot: PointFile,
    iterations: usize,
    trials: usize,
    filter: FilterFile,
    observation: ObservationFile,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            map_path: None,
            synthetic: SyntheticMapFile::default(),
            ap_positions: None,
            radio: RadioModel::default(),
            robot: DEFAULT_ROBOT.into(),
            iterations: DEFAULT_ITERATIONS,
            trials: DEFAULT_TRIALS,
            filter: FilterFile::default(),
            observation: ObservationFile::default(),
        }
    }
}

/// Parses a scenario JSON document. Relative `map_path` values resolve
/// against `base_dir`.
pub fn scenario_from_json(text: &str, base_dir: &Path) -> Result<ScenarioConfig, SimError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| SimError::ScenarioFile {
        path: base_dir.display().to_string(),
        reason: e.to_string(),
    })?;
    let (length, width) = match &file.map_path {
        Some(_) => (None, None),
        None => (Some(file.synthetic.area_length_m), Some(file.synthetic.area_width_m)),
    };
    let ap_positions: Vec<Point2> = match file.ap_positions {
        Some(aps) => aps.into_iter().map(Point2::from).collect(),
        None => default_ap_positions(
            length.unwrap_or(DEFAULT_AREA),
            width.unwrap_or(DEFAULT_AREA),
        ),
    };
    let map = match &file.map_path {
        Some(p) => load_map(base_dir.join(p))?,
        None => generate_synthetic_map(
            file.synthetic.area_length_m,
            file.synthetic.area_width_m,
            &ap_positions,
            file.synthetic.grid_spacing_m,
            &file.radio,
        )?,
    };
    let scenario = ScenarioConfig {
        map,
        ap_positions,
        radio: file.radio,
        robot_position: file.robot.into(),
        iterations: file.iterations,
        trials: file.trials,
        filter: FilterConfig {
            n_particles: file.filter.n_particles,
            sigma: file.filter.sigma_dbm,
            jitter: file.filter.jitter_m,
            resample_fraction: file.filter.resample_fraction,
            seed: file.filter.seed,
        },
        observation_noise_sigma: file.observation.noise_sigma_dbm.unwrap_or(file.radio.shadowing_sigma),
        fixed_observation: file.observation.fixed,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, SimError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SimError::ScenarioFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    scenario_from_json(&text, base)
}
