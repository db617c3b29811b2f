use nalgebra::Matrix2;

use super::CandidateTrajectory;
use crate::belief::{expected_cell_gain, ReportEstimate, SharedOccupancyBelief, TrackEstimate};
use crate::entities::SensorModel;
use crate::world::{visible_cells, FovScratch, GridMap, Pose};

/// Reusable buffers for gain evaluation.
#[derive(Debug, Clone, Default)]
pub struct GainScratch {
    fov: FovScratch,
    buf: Vec<usize>,
    stamp: Vec<u32>,
    epoch: u32,
}

impl GainScratch {
    fn next_epoch(&mut self, n: usize) -> u32 {
        if self.stamp.len() != n {
            self.stamp = vec![0; n];
            self.epoch = 0;
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.epoch
    }
}

/// Expected map-entropy reduction (bits) from sweeping the sensor along
/// `tau`. Every cell counts once however often it is covered.
pub fn j_explore(
    b: &SharedOccupancyBelief,
    tau: &CandidateTrajectory,
    sensor: &SensorModel,
    map: &GridMap,
    scratch: &mut GainScratch,
) -> f64 {
    let epoch = scratch.next_epoch(map.len());
    let mut gain = 0.0;
    for tp in &tau.poses {
        scratch.buf.clear();
        visible_cells(map, &tp.pose, sensor.range, &mut scratch.fov, &mut scratch.buf);
        for &idx in &scratch.buf {
            if scratch.stamp[idx] != epoch {
                scratch.stamp[idx] = epoch;
                gain += expected_cell_gain(b.p(idx), sensor.alpha, sensor.beta);
            }
        }
    }
    gain
}

/// A target position belief as seen by the exploitation term.
#[derive(Debug, Clone, PartialEq)]
pub struct ExploitTarget {
    /// Expected positions every `step_dt` seconds from now; the last one is
    /// held beyond the end.
    pub positions: Vec<Pose>,
    pub step_dt: f64,
    /// Covariance now.
    pub covariance: Matrix2<f64>,
    /// Process noise, m²/s.
    pub q: f64,
}

impl ExploitTarget {
    pub fn stationary(mean: Pose, covariance: Matrix2<f64>, q: f64) -> Self {
        Self { positions: vec![mean], step_dt: 1.0, covariance, q }
    }

    fn at(&self, t: f64) -> Pose {
        let k = ((t / self.step_dt).round() as usize).min(self.positions.len() - 1);
        self.positions[k]
    }
}

/// Entropy reduction (nats) of a 2-D Gaussian with prior `p` after a
/// measurement with covariance `r`.
pub(crate) fn update_gain(p: &Matrix2<f64>, r: &Matrix2<f64>) -> f64 {
    let post_det = (p * (p + r).try_inverse().unwrap_or_else(Matrix2::zeros) * r).determinant();
    if post_det <= 0.0 {
        return 0.0;
    }
    (0.5 * (p.determinant() / post_det).ln()).max(0.0)
}

/// Sum over targets of the entropy reduction from one measurement at the
/// trajectory's closest approach within sensor range.
pub fn j_exploit_targets(targets: &[ExploitTarget], tau: &CandidateTrajectory, sensor: &SensorModel) -> f64 {
    let mut total = 0.0;
    for tgt in targets {
        if tgt.positions.is_empty() {
            continue;
        }
        let best = tau
            .poses
            .iter()
            .map(|tp| (tp.t, tp.pose.distance(&tgt.at(tp.t))))
            .filter(|(_, d)| *d <= sensor.range)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((t, d)) = best {
            let prior = tgt.covariance + Matrix2::identity() * (tgt.q * t);
            total += update_gain(&prior, &sensor.covariance_at(d));
        }
    }
    total
}

/// Exploitation gain for uncleared tracks and reports, treating every
/// estimate as stationary and predicting its covariance to `now`.
pub fn j_exploit(
    tracks: &[TrackEstimate],
    reports: &[ReportEstimate],
    tau: &CandidateTrajectory,
    sensor: &SensorModel,
    q: f64,
    now: f64,
) -> f64 {
    let mut targets: Vec<ExploitTarget> = tracks
        .iter()
        .filter(|e| !e.cleared)
        .map(|e| {
            let cov = e.covariance + Matrix2::identity() * (q * (now - e.last_update).max(0.0));
            ExploitTarget::stationary(Pose::new(e.mean.x, e.mean.y), cov, q)
        })
        .collect();
    targets.extend(reports.iter().map(|r| {
        let cov = r.covariance + Matrix2::identity() * (q * (now - r.time).max(0.0));
        ExploitTarget::stationary(Pose::new(r.mean.x, r.mean.y), cov, q)
    }));
    j_exploit_targets(&targets, tau, sensor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{fuse_occupancy, OccupancyBelief};
    use crate::planning::{CandidateKind, TimedPose};
    use nalgebra::Vector2;

    fn traj(points: &[Pose]) -> CandidateTrajectory {
        let poses = points.iter().enumerate().map(|(k, p)| TimedPose { t: k as f64 * 0.2, pose: *p }).collect();
        CandidateTrajectory::new(CandidateKind::Stay, poses, 0.0)
    }

    #[test]
    fn certain_cells_yield_nothing() {
        let map = GridMap::open(5, 5, 1.0).unwrap();
        let mut b = OccupancyBelief::new(0, &map, 0.0);
        for i in 0..25 {
            b.set(i, if i % 2 == 0 { 0.0 } else { 1.0 }, 0.0);
        }
        let shared = fuse_occupancy(&[(&b, 1.0)]).unwrap();
        let s = SensorModel::new(3.0, 0.1, 0.05, 0.7, 1.3).unwrap();
        let g = j_explore(&shared, &traj(&[Pose::new(2.5, 2.5)]), &s, &map, &mut GainScratch::default());
        assert_eq!(g, 0.0);
    }

    #[test]
    fn one_fresh_cell_with_perfect_sensor() {
        let map = GridMap::open(1, 1, 1.0).unwrap();
        let shared = SharedOccupancyBelief::uniform(1, 1);
        let s = SensorModel::new(3.0, 0.0, 0.0, 0.7, 1.3).unwrap();
        let t = traj(&[Pose::new(0.5, 0.5), Pose::new(0.6, 0.5)]);
        let g = j_explore(&shared, &t, &s, &map, &mut GainScratch::default());
        assert!((g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closer_pass_gains_more() {
        let s = SensorModel::new(6.0, 0.1, 0.0, 0.7, 1.3).unwrap();
        let e = TrackEstimate {
            target_id: 0,
            mean: Vector2::new(10.0, 10.0),
            covariance: Matrix2::identity() * 2.0,
            last_update: 0.0,
            monitoring_time: 0.0,
            first_seen: 0.0,
            cleared: false,
        };
        let near = j_exploit(&[e.clone()], &[], &traj(&[Pose::new(10.0, 10.0)]), &s, 0.04, 0.0);
        let far = j_exploit(&[e.clone()], &[], &traj(&[Pose::new(16.0, 10.0)]), &s, 0.04, 0.0);
        let out = j_exploit(&[e.clone()], &[], &traj(&[Pose::new(17.0, 10.0)]), &s, 0.04, 0.0);
        assert!(near > far && far > 0.0);
        assert_eq!(out, 0.0);
        let mut cleared = e;
        cleared.cleared = true;
        assert_eq!(j_exploit(&[cleared], &[], &traj(&[Pose::new(10.0, 10.0)]), &s, 0.04, 0.0), 0.0);
    }
}
