use serde::{Deserialize, Serialize};

use crate::entities::{Measurement, SensorModel};
use crate::world::{visible_cells, FovScratch, GridMap, Pose};

/// Stored probabilities are kept inside these bounds so that a cell can
/// always be revised by later evidence.
pub const DEFAULT_P_BOUNDS: (f64, f64) = (1e-3, 1.0 - 1e-3);

/// Bernoulli Bayes update of `p` under the detection model.
pub fn bayes_update(p: f64, alpha: f64, beta: f64, detected: bool) -> f64 {
    let (hit, miss) = if detected { (1.0 - alpha, beta) } else { (alpha, 1.0 - beta) };
    let num = hit * p;
    let den = num + miss * (1.0 - p);
    if den <= 0.0 {
        p
    } else {
        num / den
    }
}

/// Per-cell target-presence probability that relaxes toward 0.5 outside the
/// field of view.
///
/// Each cell keeps a reference value `p_ref` taken at `t_ref`; the current
/// value is `0.5 + (p_ref - 0.5)·exp(-r·(t - t_ref))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyBelief {
    pub owner: u32,
    width: usize,
    height: usize,
    p: Vec<f64>,
    p_ref: Vec<f64>,
    t_ref: Vec<f64>,
    last_seen: Vec<f64>,
    pub decay_rate: f64,
    pub p_bounds: (f64, f64),
}

impl OccupancyBelief {
    pub fn new(owner: u32, map: &GridMap, decay_rate: f64) -> Self {
        let n = map.len();
        Self {
            owner,
            width: map.width(),
            height: map.height(),
            p: vec![0.5; n],
            p_ref: vec![0.5; n],
            t_ref: vec![0.0; n],
            last_seen: vec![f64::NEG_INFINITY; n],
            decay_rate,
            p_bounds: DEFAULT_P_BOUNDS,
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn p(&self, idx: usize) -> f64 {
        self.p[idx]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// Time of the last in-view update, `None` if never observed.
    pub fn last_seen(&self, idx: usize) -> Option<f64> {
        let t = self.last_seen[idx];
        t.is_finite().then_some(t)
    }

    pub fn observed(&self, idx: usize) -> bool {
        self.last_seen[idx].is_finite()
    }

    /// Overwrites one cell as if it had been observed at `t`.
    pub fn set(&mut self, idx: usize, p: f64, t: f64) {
        self.p[idx] = p;
        self.p_ref[idx] = p;
        self.t_ref[idx] = t;
        self.last_seen[idx] = t;
    }

    /// Single-cell evidence at `t`.
    pub fn update_cell(&mut self, idx: usize, sensor: &SensorModel, detected: bool, t: f64) {
        let post = bayes_update(self.p[idx], sensor.alpha, sensor.beta, detected);
        self.set(idx, post.clamp(self.p_bounds.0, self.p_bounds.1), t);
    }

    /// Bayes update of every visible free cell: positive evidence where a
    /// detection falls, negative elsewhere. Detection cells outside the
    /// visible set still receive their positive update.
    pub fn observe_cells(
        &mut self,
        agent_pose: &Pose,
        sensor: &SensorModel,
        detections: &[Measurement],
        map: &GridMap,
        t: f64,
        scratch: &mut FovScratch,
        buf: &mut Vec<usize>,
    ) {
        buf.clear();
        visible_cells(map, agent_pose, sensor.range, scratch, buf);
        let mut hit: Vec<usize> = detections
            .iter()
            .filter_map(|m| map.cell_of(&m.position))
            .filter(|c| map.is_free_cell(*c))
            .map(|c| map.index(c))
            .collect();
        hit.sort_unstable();
        hit.dedup();
        for &idx in buf.iter() {
            if hit.binary_search(&idx).is_err() {
                self.update_cell(idx, sensor, false, t);
            }
        }
        for &idx in &hit {
            self.update_cell(idx, sensor, true, t);
        }
    }

    /// Relaxes every observed cell toward 0.5 at time `t`.
    ///
    /// Cells below 0.5 stay frozen once every target is detected
    /// (`num_detected >= num_total`); cells above 0.5 always relax.
    pub fn apply_time_decay(&mut self, t: f64, num_detected: usize, num_total: Option<usize>) {
        let relax_low = num_total.is_none_or(|n| num_detected < n);
        let r = self.decay_rate;
        for i in 0..self.p.len() {
            if !self.last_seen[i].is_finite() {
                continue;
            }
            let below = self.p_ref[i] < 0.5;
            if below && !relax_low {
                // rebase so that relaxation resumes from the frozen value
                self.p_ref[i] = self.p[i];
                self.t_ref[i] = t;
                continue;
            }
            let dt = (t - self.t_ref[i]).max(0.0);
            self.p[i] = 0.5 + (self.p_ref[i] - 0.5) * (-r * dt).exp();
        }
    }

    /// Cells whose probability differs from 0.5 by more than `eps`.
    pub fn sparse(&self, eps: f64) -> Vec<(usize, f64)> {
        self.p.iter().enumerate().filter(|(_, p)| (**p - 0.5).abs() > eps).map(|(i, p)| (i, *p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bayes_examples() {
        assert_relative_eq!(bayes_update(0.5, 0.1, 0.05, true), 0.947368, epsilon = 1e-6);
        assert_relative_eq!(bayes_update(0.5, 0.1, 0.05, false), 0.095238, epsilon = 1e-6);
        assert_eq!(bayes_update(0.5, 0.0, 0.0, true), 1.0);
    }

    #[test]
    fn decay_examples() {
        let map = GridMap::open(3, 3, 1.0).unwrap();
        let mut b = OccupancyBelief::new(0, &map, 1.0 / 90.0);
        b.set(0, 0.9, 0.0);
        b.set(1, 0.1, 0.0);
        b.apply_time_decay(0.0, 0, None);
        assert_eq!(b.p(0), 0.9);
        b.apply_time_decay(90.0, 0, None);
        assert_relative_eq!(b.p(0), 0.647152, epsilon = 1e-6);
        assert_relative_eq!(b.p(1), 0.352848, epsilon = 1e-6);
        assert_eq!(b.p(2), 0.5);
    }

    #[test]
    fn empty_cells_freeze_once_all_targets_detected() {
        let map = GridMap::open(2, 1, 1.0).unwrap();
        let mut b = OccupancyBelief::new(0, &map, 1.0 / 90.0);
        b.set(0, 0.1, 0.0);
        b.set(1, 0.9, 0.0);
        b.apply_time_decay(45.0, 1, Some(1));
        assert_eq!(b.p(0), 0.1);
        assert!(b.p(1) < 0.9);
        b.apply_time_decay(135.0, 0, Some(1));
        assert_relative_eq!(b.p(0), 0.5 - 0.4 * (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn observation_marks_fov() {
        let map = GridMap::open(10, 10, 1.0).unwrap();
        let s = SensorModel::new(2.0, 0.1, 0.0, 0.7, 1.3).unwrap();
        let mut b = OccupancyBelief::new(0, &map, 1.0 / 90.0);
        let (mut sc, mut buf) = (FovScratch::default(), Vec::new());
        b.observe_cells(&Pose::new(5.5, 5.5), &s, &[], &map, 1.0, &mut sc, &mut buf);
        let seen = (0..map.len()).filter(|&i| b.observed(i)).count();
        assert_eq!(seen, buf.len());
        assert!(buf.iter().all(|&i| b.p(i) < 0.5 && b.last_seen(i) == Some(1.0)));
    }
}
