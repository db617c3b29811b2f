//! Frontier extraction, candidate trajectories for both modes,
//! information-gain scoring and constrained multi-criteria selection.

mod candidates;
mod frontier;
mod gain;
mod select;

use serde::{Deserialize, Serialize};

use crate::world::Pose;

pub use candidates::{gen_search_candidates, gen_track_candidates, pursuit_candidate, stay_candidate};
pub use frontier::{extract_frontiers, is_frontier_cell, Frontier};
pub use gain::{j_exploit, j_exploit_targets, j_explore, ExploitTarget, GainScratch};
pub use select::{normalize_scores, select_best, Selection, UtilityWeights};

/// Planning horizon for tracking candidates, steps of `STEP_DT`.
pub const LOOKAHEAD_STEPS: usize = 15;
pub const STEP_DT: f64 = 0.2;

/// Tunables of candidate generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Half-width of the "unknown" belief band around 0.5.
    pub frontier_band: f64,
    pub max_cluster_cells: usize,
    /// Search goals kept per agent, nearest first by path length.
    pub max_goals: usize,
    /// Spacing of scoring poses along search paths, meters.
    pub sample_step: f64,
    /// Time spent sensing at a search goal, seconds.
    pub dwell: f64,
    pub n_headings: usize,
    pub n_speeds: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            frontier_band: 0.1,
            max_cluster_cells: 16,
            max_goals: 12,
            sample_step: 1.5,
            dwell: LOOKAHEAD_STEPS as f64 * STEP_DT,
            n_headings: 8,
            n_speeds: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    /// Seconds from now.
    pub t: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CandidateKind {
    /// Travel to the `i`-th search goal.
    Goal { index: usize },
    /// Constant-velocity rollout.
    Velocity { vx: f64, vy: f64 },
    Stay,
    /// Planned path toward a target's predicted position.
    Pursuit,
}

/// A time-stamped agent trajectory with its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTrajectory {
    pub kind: CandidateKind,
    pub poses: Vec<TimedPose>,
    pub terminal: Pose,
    /// Meters traveled along the trajectory.
    pub path_length: f64,
    /// Seconds covered by the trajectory including any dwell.
    pub duration: f64,
    /// Raw map-entropy gain (bits) or gain rate, as filled by the scorer.
    pub j_explore: f64,
    /// Raw target-entropy gain (nats) or gain rate.
    pub j_exploit: f64,
    pub feasible: bool,
}

impl CandidateTrajectory {
    pub fn new(kind: CandidateKind, poses: Vec<TimedPose>, path_length: f64) -> Self {
        let terminal = poses.last().map(|p| p.pose).unwrap_or_default();
        let duration = poses.last().map(|p| p.t).unwrap_or(0.0);
        Self { kind, poses, terminal, path_length, duration, j_explore: 0.0, j_exploit: 0.0, feasible: true }
    }
}
