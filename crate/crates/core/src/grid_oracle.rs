//! Brute-force grid Bayes posterior used to check the particle filter.
//!
//! The area is cut into square cells of side `cell_size`, anchored at the
//! origin corner. Cells that would stick out past the far edges are dropped,
//! so every cell has the same prior mass. Each cell center gets the same
//! nearest-landmark likelihood the filter uses; the result is the
//! single-observation posterior under a uniform prior.

use thiserror::Error;

use crate::pf::log_likelihood;
use crate::rfmap::{FingerprintMap, Point2, RssVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("cell size must be positive and no larger than the smaller area side, got {0}")]
    InvalidCellSize(f64),
    #[error("sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("observation has {observed} RSS entries but the map has {expected} access points")]
    DimensionMismatch { expected: usize, observed: usize },
    #[error("posterior mass is zero or non-finite in every cell")]
    Degenerate,
}

/// Normalized probabilities over grid cells, row-major: index `iy * nx + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPosterior {
    pub cell_size: f64,
    pub origin: Point2,
    pub nx: usize,
    pub ny: usize,
    pub probabilities: Vec<f64>,
}

impl GridPosterior {
    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            self.origin.x + (ix as f64 + 0.5) * self.cell_size,
            self.origin.y + (iy as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn probability(&self, ix: usize, iy: usize) -> f64 {
        self.probabilities[iy * self.nx + ix]
    }

    /// `(center, probability)` for every cell in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (Point2, f64)> + '_ {
        (0..self.ny).flat_map(move |iy| {
            (0..self.nx).map(move |ix| (self.cell_center(ix, iy), self.probability(ix, iy)))
        })
    }

    /// Probability-weighted mean of the cell centers.
    pub fn mean(&self) -> Point2 {
        let (mut x, mut y) = (0.0, 0.0);
        for (c, p) in self.cells() {
            x += p * c.x;
            y += p * c.y;
        }
        Point2::new(x, y)
    }
}

/// Number of whole cells along an extent. The small slack keeps e.g.
/// `10.0 / 0.1` from flooring to 99 through representation error.
fn cell_count(extent: f64, cell_size: f64) -> usize {
    ((extent / cell_size) + 1e-9).floor() as usize
}

pub fn grid_posterior(
    map: &FingerprintMap,
    observed: &RssVector,
    sigma: f64,
    cell_size: f64,
) -> Result<GridPosterior, OracleError> {
    let min_side = map.area_length().min(map.area_width());
    if !(cell_size.is_finite() && cell_size > 0.0 && cell_size <= min_side) {
        return Err(OracleError::InvalidCellSize(cell_size));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(OracleError::InvalidSigma(sigma));
    }
    if observed.len() != map.ap_count() {
        return Err(OracleError::DimensionMismatch {
            expected: map.ap_count(),
            observed: observed.len(),
        });
    }
    let nx = cell_count(map.area_length(), cell_size);
    let ny = cell_count(map.area_width(), cell_size);

    // one likelihood per landmark; cells only differ by which landmark they map to
    let per_landmark: Vec<f64> = map
        .landmarks()
        .iter()
        .map(|lm| log_likelihood(observed.values(), lm.rss.values(), sigma))
        .collect();

    let mut grid = GridPosterior {
        cell_size,
        origin: Point2::new(0.0, 0.0),
        nx,
        ny,
        probabilities: vec![0.0; nx * ny],
    };
    let mut log_mass = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let c = grid.cell_center(ix, iy);
            log_mass.push(per_landmark[map.nearest_landmark(c)]);
        }
    }
    let max = log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(OracleError::Degenerate);
    }
    // shifting by the max is a common factor and cancels in normalization
    let mut total = 0.0;
    for (p, &lm) in grid.probabilities.iter_mut().zip(&log_mass) {
        *p = (lm - max).exp();
        total += *p;
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(OracleError::Degenerate);
    }
    for p in &mut grid.probabilities {
        *p /= total;
    }
    Ok(grid)
}

pub fn posterior_mean(g: &GridPosterior) -> Point2 {
    g.mean()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfmap::Landmark;

    fn map_with(rss: &[[f64; 2]], positions: &[(f64, f64)]) -> FingerprintMap {
        let landmarks = rss
            .iter()
            .zip(positions)
            .enumerate()
            .map(|(i, (r, &(x, y)))| Landmark {
                id: i,
                position: Point2::new(x, y),
                rss: RssVector::new(r.to_vec()),
            })
            .collect();
        FingerprintMap::new(10.0, 10.0, vec!["a".into(), "b".into()], landmarks).unwrap()
    }

    #[test]
    fn uniform_rss_gives_uniform_posterior() {
        let map = map_with(&[[-50.0, -60.0]; 3], &[(1.0, 1.0), (5.0, 5.0), (9.0, 2.0)]);
        let g = grid_posterior(&map, &RssVector::new(vec![-55.0, -58.0]), 4.0, 0.5).unwrap();
        assert_eq!(g.nx * g.ny, 400);
        for &p in &g.probabilities {
            assert!((p - 1.0 / 400.0).abs() < 1e-15);
        }
        let m = posterior_mean(&g);
        assert!((m.x - 5.0).abs() < 1e-12 && (m.y - 5.0).abs() < 1e-12);
    }

    #[test]
    fn single_landmark_is_uniform() {
        let map = map_with(&[[-50.0, -60.0]], &[(3.0, 3.0)]);
        let g = grid_posterior(&map, &RssVector::new(vec![-80.0, -30.0]), 2.0, 1.0).unwrap();
        assert!(g.probabilities.iter().all(|&p| (p - 0.01).abs() < 1e-15));
    }

    #[test]
    fn coarse_grid_matches_hand_evaluation() {
        // 5x5 cells of 2 m; centers at 1,3,5,7,9 on each axis
        let positions = [(0.0, 0.0), (10.0, 0.0), (5.0, 10.0)];
        let rss = [[-40.0, -70.0], [-70.0, -40.0], [-60.0, -60.0]];
        let map = map_with(&rss, &positions);
        let obs = [-45.0, -66.0];
        let sigma = 5.0;
        let g = grid_posterior(&map, &RssVector::new(obs.to_vec()), sigma, 2.0).unwrap();
        assert_eq!((g.nx, g.ny), (5, 5));

        // independent evaluation: explicit Gaussian densities and a
        // first-match-wins nearest search written out longhand
        let dens = |r: &[f64; 2]| -> f64 {
            r.iter()
                .zip(obs.iter())
                .map(|(a, b)| {
                    (-(a - b) * (a - b) / (2.0 * sigma * sigma)).exp()
                        / (sigma * (2.0 * std::f64::consts::PI).sqrt())
                })
                .product()
        };
        let mut raw = Vec::new();
        for iy in 0..5 {
            for ix in 0..5 {
                let (cx, cy) = (1.0 + 2.0 * ix as f64, 1.0 + 2.0 * iy as f64);
                let d: Vec<f64> = positions
                    .iter()
                    .map(|(x, y)| ((cx - x).powi(2) + (cy - y).powi(2)).sqrt())
                    .collect();
                let mut best = 0;
                for k in 1..3 {
                    if d[k] < d[best] {
                        best = k;
                    }
                }
                raw.push(dens(&rss[best]));
            }
        }
        let total: f64 = raw.iter().sum();
        for (got, want) in g.probabilities.iter().zip(raw.iter().map(|r| r / total)) {
            assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn all_mass_in_one_cell() {
        let g = GridPosterior {
            cell_size: 1.0,
            origin: Point2::new(0.0, 0.0),
            nx: 3,
            ny: 2,
            probabilities: vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        };
        assert_eq!(posterior_mean(&g), Point2::new(1.5, 1.5));
    }

    #[test]
    fn rejects_bad_cell_size() {
        let map = map_with(&[[-50.0, -60.0]], &[(3.0, 3.0)]);
        let obs = RssVector::new(vec![-50.0, -60.0]);
        assert!(matches!(grid_posterior(&map, &obs, 4.0, 0.0), Err(OracleError::InvalidCellSize(_))));
        assert!(matches!(grid_posterior(&map, &obs, 4.0, 11.0), Err(OracleError::InvalidCellSize(_))));
    }

    #[test]
    fn partial_edge_cells_are_dropped() {
        let map = map_with(&[[-50.0, -60.0]], &[(3.0, 3.0)]);
        let g = grid_posterior(&map, &RssVector::new(vec![-50.0, -60.0]), 4.0, 3.0).unwrap();
        assert_eq!((g.nx, g.ny), (3, 3));
        assert_eq!(g.cell_center(2, 2), Point2::new(7.5, 7.5));
    }
}
