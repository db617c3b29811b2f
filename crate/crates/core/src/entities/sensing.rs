use nalgebra::Matrix2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Measurement, Reporter, SensorModel, Source, TargetState};
use crate::world::{line_of_sight, GridMap, Pose};

/// Whether the sensor reports the target this tick. Consumes exactly one
/// uniform draw: a visible target is reported with probability `1 - alpha`,
/// an invisible one with probability `beta`.
pub fn sense_detect(s: &SensorModel, agent_pose: &Pose, target: &TargetState, map: &GridMap, rng: &mut impl Rng) -> bool {
    let u: f64 = rng.random();
    let visible = agent_pose.distance(&target.pose) <= s.range && line_of_sight(map, agent_pose, &target.pose);
    if visible {
        u < 1.0 - s.alpha
    } else {
        u < s.beta
    }
}

/// `position + noise` where `noise` is given in standard deviations of the
/// isotropic covariance `cov`.
pub fn locate_with_noise(position: &Pose, cov: Matrix2<f64>, noise: (f64, f64)) -> Pose {
    let sd = cov[(0, 0)].sqrt();
    Pose::new(position.x + sd * noise.0, position.y + sd * noise.1)
}

fn draw_noise(rng: &mut impl Rng) -> (f64, f64) {
    (rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Noisy location of a detected target.
pub fn sense_locate(
    s: &SensorModel,
    agent_pose: &Pose,
    target: &TargetState,
    t: f64,
    source: Source,
    rng: &mut impl Rng,
) -> Measurement {
    let cov = s.covariance_at(agent_pose.distance(&target.pose));
    Measurement {
        target_id: Some(target.id),
        position: locate_with_noise(&target.pose, cov, draw_noise(rng)),
        covariance: cov,
        time: t,
        source,
    }
}

/// A spurious detection at a uniformly drawn free position within range, or
/// `None` when no free cell is in range.
pub fn false_positive_measurement(
    s: &SensorModel,
    agent_pose: &Pose,
    map: &GridMap,
    t: f64,
    source: Source,
    rng: &mut impl Rng,
) -> Option<Measurement> {
    for _ in 0..64 {
        let r = s.range * rng.random::<f64>().sqrt();
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let p = Pose::new(agent_pose.x + r * a.cos(), agent_pose.y + r * a.sin());
        if map.is_free(&p) {
            let cov = s.covariance_at(r);
            return Some(Measurement { target_id: None, position: p, covariance: cov, time: t, source });
        }
    }
    None
}

/// A third-party report on `target`, or `None` if the reporter does not
/// observe it.
pub fn emit_report(r: &Reporter, target: &TargetState, t: f64, rng: &mut impl Rng) -> Option<Measurement> {
    if !r.observed_targets.contains(&target.id) {
        return None;
    }
    let cov = Matrix2::identity() * (r.sigma_report * r.sigma_report);
    Some(Measurement {
        target_id: Some(target.id),
        position: locate_with_noise(&target.pose, cov, draw_noise(rng)),
        covariance: cov,
        time: t,
        source: Source::Reporter(r.id),
    })
}
