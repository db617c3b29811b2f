use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::check_spd;
use crate::entities::{Measurement, ReporterId, TargetId};
use crate::error::{Error, Result};

/// Gaussian belief over a detected target's position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEstimate {
    pub target_id: TargetId,
    pub mean: Vector2<f64>,
    pub covariance: Matrix2<f64>,
    pub last_update: f64,
    /// Seconds since the track was started.
    pub monitoring_time: f64,
    pub first_seen: f64,
    pub cleared: bool,
}

impl TrackEstimate {
    /// Starts a track at the first measurement with covariance `scale·R`.
    pub fn from_measurement(target_id: TargetId, z: &Measurement, scale: f64) -> Self {
        Self {
            target_id,
            mean: Vector2::new(z.position.x, z.position.y),
            covariance: z.covariance * scale,
            last_update: z.time,
            monitoring_time: 0.0,
            first_seen: z.time,
            cleared: false,
        }
    }

    pub fn trace(&self) -> f64 {
        self.covariance.trace()
    }
}

/// Random-walk prediction: mean fixed, covariance grows by `q·dt·I`.
pub fn kf_predict(e: &TrackEstimate, dt: f64, q: f64) -> TrackEstimate {
    let mut out = e.clone();
    out.covariance += Matrix2::identity() * (q * dt.max(0.0));
    out.monitoring_time += dt.max(0.0);
    out
}

/// Covariance after an update with noise `r`, without touching the mean.
pub(crate) fn posterior_covariance(p: &Matrix2<f64>, r: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let s = (p + r).try_inverse().ok_or(Error::SingularMatrix)?;
    let k = p * s;
    let post = (Matrix2::identity() - k) * p;
    Ok(0.5 * (post + post.transpose()))
}

/// Kalman update with identity observation.
pub fn kf_update(e: &TrackEstimate, z: &Measurement) -> Result<TrackEstimate> {
    check_spd(&z.covariance)?;
    let p = e.covariance;
    let s = (p + z.covariance).try_inverse().ok_or(Error::SingularMatrix)?;
    let k = p * s;
    let innov = Vector2::new(z.position.x, z.position.y) - e.mean;
    let mut out = e.clone();
    out.mean += k * innov;
    let post = (Matrix2::identity() - k) * p;
    out.covariance = 0.5 * (post + post.transpose());
    out.last_update = out.last_update.max(z.time);
    Ok(out)
}

/// Whether the track's localisation error is within the threshold (inclusive).
pub fn is_tracked(e: &TrackEstimate, sigma_thre_trace: f64) -> bool {
    e.trace() <= sigma_thre_trace
}

/// Latest third-party report of one target from one reporter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEstimate {
    pub target_id: TargetId,
    pub mean: Vector2<f64>,
    pub covariance: Matrix2<f64>,
    pub reporter_id: ReporterId,
    pub time: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entities::Source;
    use crate::world::Pose;
    use approx::assert_relative_eq;

    fn track(p: f64) -> TrackEstimate {
        TrackEstimate {
            target_id: 0,
            mean: Vector2::zeros(),
            covariance: Matrix2::identity() * p,
            last_update: 0.0,
            monitoring_time: 0.0,
            first_seen: 0.0,
            cleared: false,
        }
    }

    fn meas(x: f64, y: f64, r: f64) -> Measurement {
        Measurement {
            target_id: Some(0),
            position: Pose::new(x, y),
            covariance: Matrix2::identity() * r,
            time: 1.0,
            source: Source::Agent(0),
        }
    }

    #[test]
    fn predict_examples() {
        assert_eq!(kf_predict(&track(1.0), 0.0, 0.04).covariance, Matrix2::identity());
        assert_relative_eq!(kf_predict(&track(1.0), 1.0, 0.04).covariance[(0, 0)], 1.04, epsilon = 1e-12);
        assert_eq!(kf_predict(&track(1.0), 50.0, 0.0).covariance, Matrix2::identity());
    }

    #[test]
    fn update_examples() {
        let e = kf_update(&track(4.0), &meas(2.0, 0.0, 4.0)).unwrap();
        assert_relative_eq!(e.mean.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(e.covariance[(0, 0)], 2.0, epsilon = 1e-12);
        let e = kf_update(&track(4.0), &meas(2.0, -1.0, 1e-9)).unwrap();
        assert_relative_eq!(e.mean.x, 2.0, epsilon = 1e-6);
        assert_relative_eq!(e.mean.y, -1.0, epsilon = 1e-6);
    }

    #[test]
    fn tracked_threshold_is_inclusive() {
        assert!(is_tracked(&track(0.9), 2.0));
        assert!(!is_tracked(&track(1.5), 2.0));
        assert!(is_tracked(&track(1.0), 2.0));
    }
}
