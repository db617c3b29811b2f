//! Probabilistic state: time-varying occupancy beliefs, Gaussian target
//! tracks, third-party report beliefs, fusion and entropy queries.

mod fusion;
mod occupancy;
mod track;

use nalgebra::Matrix2;

use crate::error::{Error, Result};

pub use fusion::{fuse_occupancy, SharedOccupancyBelief};
pub use occupancy::{bayes_update, OccupancyBelief, DEFAULT_P_BOUNDS};
pub(crate) use track::posterior_covariance;
pub use track::{is_tracked, kf_predict, kf_update, ReportEstimate, TrackEstimate};

/// Binary entropy in bits, with `0·log 0 = 0`.
pub fn cell_entropy(p: f64) -> f64 {
    let h = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    h(p) + h(1.0 - p)
}

/// Sum of cell entropies over every free cell.
pub fn map_entropy(b: &OccupancyBelief, map: &crate::world::GridMap) -> f64 {
    map.free_indices().map(|i| cell_entropy(b.p(i))).sum()
}

/// Expected entropy (bits) of a cell after one look, averaged over the
/// detect / no-detect outcomes weighted by their marginal probabilities.
pub fn expected_posterior_entropy(p: f64, alpha: f64, beta: f64) -> f64 {
    let p1 = (1.0 - alpha) * p + beta * (1.0 - p);
    let p0 = 1.0 - p1;
    let mut h = 0.0;
    if p1 > 0.0 {
        h += p1 * cell_entropy(bayes_update(p, alpha, beta, true));
    }
    if p0 > 0.0 {
        h += p0 * cell_entropy(bayes_update(p, alpha, beta, false));
    }
    h
}

/// Expected entropy reduction of one look at a cell, bits; never negative.
pub fn expected_cell_gain(p: f64, alpha: f64, beta: f64) -> f64 {
    (cell_entropy(p) - expected_posterior_entropy(p, alpha, beta)).max(0.0)
}

pub(crate) fn check_spd(cov: &Matrix2<f64>) -> Result<()> {
    let sym = (cov[(0, 1)] - cov[(1, 0)]).abs() <= 1e-9 * (1.0 + cov.abs().max());
    if !sym || cov.iter().any(|v| !v.is_finite()) || cov.cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

/// Differential entropy of a 2-D Gaussian, nats.
pub fn gaussian_entropy(cov: &Matrix2<f64>) -> Result<f64> {
    check_spd(cov)?;
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    Ok(0.5 * (two_pi_e * two_pi_e * cov.determinant()).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn binary_entropy_values() {
        assert_eq!(cell_entropy(0.5), 1.0);
        assert_eq!(cell_entropy(0.0), 0.0);
        assert_eq!(cell_entropy(1.0), 0.0);
        assert_relative_eq!(cell_entropy(0.25), 0.811278, epsilon = 1e-6);
    }

    #[test]
    fn gaussian_entropy_values() {
        assert_relative_eq!(gaussian_entropy(&Matrix2::identity()).unwrap(), 2.837877, epsilon = 1e-6);
        assert_relative_eq!(gaussian_entropy(&(Matrix2::identity() * 4.0)).unwrap(), 4.224171, epsilon = 1e-6);
        assert!(gaussian_entropy(&Matrix2::new(1.0, 2.0, 2.0, 1.0)).is_err());
    }

    #[test]
    fn perfect_look_at_unknown_cell_gains_one_bit() {
        assert_relative_eq!(expected_cell_gain(0.5, 0.0, 0.0), 1.0, epsilon = 1e-12);
        assert_eq!(expected_cell_gain(0.0, 0.1, 0.05), 0.0);
        assert_eq!(expected_cell_gain(1.0, 0.1, 0.05), 0.0);
    }
}
