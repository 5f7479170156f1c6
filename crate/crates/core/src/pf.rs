//! Sequential importance sampling particle filter over a fingerprint map.
//!
//! The filter is a bootstrap SIS filter: particles are proposed from the
//! motion model (odometry plus uniform jitter), so the importance-weight
//! recursion reduces to `weight <- weight * likelihood`. Each particle's
//! predicted observation is the fingerprint of its nearest landmark, and the
//! likelihood is a product of independent Gaussians over the access-point
//! channels. When the effective sample size drops to `N_p * resample_fraction`
//! or below, the set is resampled multinomially and weights reset to `1/N_p`.
//!
//! All randomness flows through a caller-supplied [`FilterRng`] (ChaCha8), so
//! a fixed seed replays a run bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rfmap::{FingerprintMap, Point2, RssVector};

/// Generator used by every random draw in the filter. ChaCha with 8 rounds,
/// seeded through `SeedableRng::seed_from_u64`.
pub type FilterRng = ChaCha8Rng;

/// Builds the filter generator for `seed`.
pub fn filter_rng(seed: u64) -> FilterRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Tolerance under which a set's weight sum counts as normalized.
pub const NORMALIZED_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("invalid filter config: {0}")]
    InvalidConfig(String),
    #[error("observation has {observed} RSS entries but the map has {expected} access points")]
    DimensionMismatch { expected: usize, observed: usize },
    #[error("degenerate filter state: every particle weight is zero (likelihood underflow); reinitialize or widen sigma")]
    Degenerate,
    #[error("particle weights are not normalized")]
    NotNormalized,
    #[error("particle set is empty")]
    Empty,
    #[error("non-finite particle weight at index {0}")]
    NonFiniteWeight(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Number of particles, N_p.
    pub n_particles: usize,
    /// Likelihood spread per access-point channel, dBm.
    pub sigma: f64,
    /// Half-width of the uniform position noise added each predict, meters.
    pub jitter: f64,
    /// Resample when ESS <= n_particles * resample_fraction.
    pub resample_fraction: f64,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n_particles: 1000,
            sigma: 4.0,
            jitter: 0.05,
            resample_fraction: 0.5,
            seed: 0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if self.n_particles < 1 {
            return Err(FilterError::InvalidConfig("n_particles must be at least 1".into()));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(FilterError::InvalidConfig(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(FilterError::InvalidConfig(format!("jitter must be >= 0, got {}", self.jitter)));
        }
        if !(self.resample_fraction > 0.0 && self.resample_fraction <= 1.0) {
            return Err(FilterError::InvalidConfig(format!(
                "resample_fraction must be in (0, 1], got {}",
                self.resample_fraction
            )));
        }
        Ok(())
    }
}

/// Robot displacement between two filter steps, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OdometryDelta {
    pub dx: f64,
    pub dy: f64,
}

impl OdometryDelta {
    pub const STATIONARY: OdometryDelta = OdometryDelta { dx: 0.0, dy: 0.0 };

    pub const fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub position: Point2,
    pub weight: f64,
}

/// Position estimate produced by the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub position: Point2,
}

/// Weighted particle cloud. The particle count never changes once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    particles: Vec<Particle>,
    normalized: bool,
}

impl ParticleSet {
    /// Wraps existing particles. The normalized flag is set when the weights
    /// sum to one within [`NORMALIZED_TOLERANCE`].
    pub fn new(particles: Vec<Particle>) -> Self {
        let sum = compensated_sum(particles.iter().map(|p| p.weight));
        let normalized = !particles.is_empty() && (sum - 1.0).abs() <= NORMALIZED_TOLERANCE;
        Self { particles, normalized }
    }

    pub fn from_parts(positions: &[Point2], weights: &[f64]) -> Self {
        assert_eq!(positions.len(), weights.len(), "positions and weights differ in length");
        Self::new(
            positions
                .iter()
                .zip(weights)
                .map(|(&position, &weight)| Particle { position, weight })
                .collect(),
        )
    }

    /// Draws `n_particles` positions uniformly over
    /// `[0, area_length] x [0, area_width]`, each with weight `1/N_p`.
    pub fn init_uniform(
        config: &FilterConfig,
        area_length: f64,
        area_width: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, FilterError> {
        config.validate()?;
        if !(area_length > 0.0 && area_width > 0.0) {
            return Err(FilterError::InvalidConfig(format!(
                "area must be positive, got {area_length} x {area_width}"
            )));
        }
        let n = config.n_particles;
        let w = 1.0 / n as f64;
        let particles = (0..n)
            .map(|_| {
                let x = area_length * rng.random::<f64>();
                let y = area_width * rng.random::<f64>();
                Particle {
                    position: Point2::new(x, y),
                    weight: w,
                }
            })
            .collect();
        Ok(Self {
            particles,
            normalized: true,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn positions(&self) -> impl Iterator<Item = Point2> + '_ {
        self.particles.iter().map(|p| p.position)
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.particles.iter().map(|p| p.weight)
    }

    /// Moves every particle by the odometry delta plus independent uniform
    /// noise in `[-jitter, jitter]` per axis. Weights are untouched.
    pub fn predict(&mut self, odo: OdometryDelta, jitter: f64, rng: &mut impl Rng) {
        for p in &mut self.particles {
            let (ux, uy) = if jitter > 0.0 {
                (rng.random_range(-jitter..=jitter), rng.random_range(-jitter..=jitter))
            } else {
                (0.0, 0.0)
            };
            p.position.x += odo.dx + ux;
            p.position.y += odo.dy + uy;
        }
    }

    /// Multiplies each weight by the likelihood of `observed` given the
    /// particle's nearest-landmark fingerprint. Leaves the set unnormalized.
    pub fn update_weights(
        &mut self,
        map: &FingerprintMap,
        observed: &RssVector,
        sigma: f64,
    ) -> Result<(), FilterError> {
        if observed.len() != map.ap_count() {
            return Err(FilterError::DimensionMismatch {
                expected: map.ap_count(),
                observed: observed.len(),
            });
        }
        if let Some(i) = self.particles.iter().position(|p| !p.weight.is_finite()) {
            return Err(FilterError::NonFiniteWeight(i));
        }
        for p in &mut self.particles {
            let predicted = map.predicted_rss(p.position);
            p.weight *= likelihood(observed.values(), predicted.values(), sigma);
        }
        self.normalized = false;
        Ok(())
    }

    /// Divides every weight by the total. Fails on an all-zero total, which
    /// means every particle's likelihood underflowed.
    pub fn normalize(&mut self) -> Result<(), FilterError> {
        if self.particles.is_empty() {
            return Err(FilterError::Empty);
        }
        let total = compensated_sum(self.weights());
        if !total.is_finite() {
            let i = self.particles.iter().position(|p| !p.weight.is_finite()).unwrap_or(0);
            return Err(FilterError::NonFiniteWeight(i));
        }
        if total <= 0.0 {
            return Err(FilterError::Degenerate);
        }
        for p in &mut self.particles {
            p.weight /= total;
        }
        self.normalized = true;
        Ok(())
    }

    /// `1 / sum(w_i^2)` over normalized weights, clamped to `[1, N_p]` to
    /// absorb rounding.
    pub fn effective_sample_size(&self) -> Result<f64, FilterError> {
        if !self.normalized {
            return Err(FilterError::NotNormalized);
        }
        let sum_sq = compensated_sum(self.weights().map(|w| w * w));
        Ok((1.0 / sum_sq).clamp(1.0, self.len() as f64))
    }

    /// True iff ESS <= `N_p * resample_fraction` (boundary inclusive).
    pub fn should_resample(&self, resample_fraction: f64) -> Result<bool, FilterError> {
        let ess = self.effective_sample_size()?;
        Ok(ess <= self.len() as f64 * resample_fraction)
    }

    /// Multinomial resampling: draws `N_p` particles i.i.d. from the
    /// categorical law given by the weights, then sets every weight to `1/N_p`.
    pub fn resample_multinomial(&mut self, rng: &mut impl Rng) -> Result<(), FilterError> {
        if !self.normalized {
            return Err(FilterError::NotNormalized);
        }
        let n = self.len();
        let weights: Vec<f64> = self.weights().collect();
        let indices = multinomial_indices(&weights, n, rng)?;
        let w = 1.0 / n as f64;
        self.particles = indices
            .into_iter()
            .map(|i| Particle {
                position: self.particles[i].position,
                weight: w,
            })
            .collect();
        self.normalized = true;
        Ok(())
    }

    /// Plain arithmetic mean of the particle positions.
    pub fn estimate(&self) -> Result<Estimate, FilterError> {
        if self.particles.is_empty() {
            return Err(FilterError::Empty);
        }
        let n = self.len() as f64;
        let x = compensated_sum(self.particles.iter().map(|p| p.position.x)) / n;
        let y = compensated_sum(self.particles.iter().map(|p| p.position.y)) / n;
        Ok(Estimate {
            position: Point2::new(x, y),
        })
    }

    /// Weight-averaged position. Not used on the default estimation path.
    pub fn weighted_estimate(&self) -> Result<Estimate, FilterError> {
        if self.particles.is_empty() {
            return Err(FilterError::Empty);
        }
        let total = compensated_sum(self.weights());
        if total.is_nan() || total <= 0.0 {
            return Err(FilterError::Degenerate);
        }
        let x = compensated_sum(self.particles.iter().map(|p| p.weight * p.position.x)) / total;
        let y = compensated_sum(self.particles.iter().map(|p| p.weight * p.position.y)) / total;
        Ok(Estimate {
            position: Point2::new(x, y),
        })
    }
}

/// Natural log of the per-channel Gaussian product
/// `prod_j N(observed_j; predicted_j, sigma^2)`.
pub fn log_likelihood(observed: &[f64], predicted: &[f64], sigma: f64) -> f64 {
    debug_assert_eq!(observed.len(), predicted.len());
    let log_norm = -(sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    observed
        .iter()
        .zip(predicted)
        .map(|(r, r_hat)| {
            let d = r - r_hat;
            log_norm - d * d * inv_two_var
        })
        .sum()
}

pub fn likelihood(observed: &[f64], predicted: &[f64], sigma: f64) -> f64 {
    log_likelihood(observed, predicted, sigma).exp()
}

/// Draws `n` indices i.i.d. from the categorical distribution proportional to
/// `weights`, by inverting the cumulative sum at sorted uniforms. The returned
/// indices are in ascending order.
pub fn multinomial_indices(
    weights: &[f64],
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>, FilterError> {
    if weights.is_empty() {
        return Err(FilterError::Empty);
    }
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(FilterError::NonFiniteWeight(i));
    }
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cdf.push(acc);
    }
    let total = acc;
    if total <= 0.0 {
        return Err(FilterError::Degenerate);
    }
    // rounding can leave u just past the final cdf entry; fall back to the
    // last index with positive weight
    let last_positive = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);

    let mut uniforms: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * total).collect();
    uniforms.sort_by(f64::total_cmp);

    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for u in uniforms {
        while j < cdf.len() && cdf[j] <= u {
            j += 1;
        }
        out.push(if j < cdf.len() { j } else { last_positive });
    }
    Ok(out)
}

/// Result of one filter cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub estimate: Estimate,
    /// ESS after normalization, before any resampling.
    pub ess: f64,
    pub resampled: bool,
}

/// One full cycle: predict, weight, normalize, resample if ESS is low,
/// estimate. Works on a copy, so `set` is untouched when an error occurs.
pub fn step(
    set: &ParticleSet,
    map: &FingerprintMap,
    odo: OdometryDelta,
    observed: &RssVector,
    config: &FilterConfig,
    rng: &mut impl Rng,
) -> Result<(ParticleSet, StepReport), FilterError> {
    if observed.len() != map.ap_count() {
        return Err(FilterError::DimensionMismatch {
            expected: map.ap_count(),
            observed: observed.len(),
        });
    }
    let mut next = set.clone();
    next.predict(odo, config.jitter, rng);
    next.update_weights(map, observed, config.sigma)?;
    next.normalize()?;
    let ess = next.effective_sample_size()?;
    let resampled = ess <= next.len() as f64 * config.resample_fraction;
    if resampled {
        next.resample_multinomial(rng)?;
    }
    let estimate = next.estimate()?;
    Ok((
        next,
        StepReport {
            estimate,
            ess,
            resampled,
        },
    ))
}

/// A filter instance: particle set, configuration and its own generator.
/// Not meant to be shared across threads; run one instance per trial.
#[derive(Debug, Clone)]
pub struct ParticleFilter {
    config: FilterConfig,
    particles: ParticleSet,
    rng: FilterRng,
    steps: usize,
    resamples: usize,
}

impl ParticleFilter {
    /// Seeds a generator from `config.seed` and scatters particles over the
    /// area.
    pub fn new(config: FilterConfig, area_length: f64, area_width: f64) -> Result<Self, FilterError> {
        Self::with_rng(config, area_length, area_width, filter_rng(config.seed))
    }

    pub fn with_rng(
        config: FilterConfig,
        area_length: f64,
        area_width: f64,
        mut rng: FilterRng,
    ) -> Result<Self, FilterError> {
        let particles = ParticleSet::init_uniform(&config, area_length, area_width, &mut rng)?;
        Ok(Self {
            config,
            particles,
            rng,
            steps: 0,
            resamples: 0,
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.particles
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn resample_count(&self) -> usize {
        self.resamples
    }

    /// Runs [`step`] and commits the new set on success.
    pub fn step(
        &mut self,
        map: &FingerprintMap,
        odo: OdometryDelta,
        observed: &RssVector,
    ) -> Result<StepReport, FilterError> {
        let (next, report) = step(&self.particles, map, odo, observed, &self.config, &mut self.rng)?;
        self.particles = next;
        self.steps += 1;
        if report.resampled {
            self.resamples += 1;
        }
        Ok(report)
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
