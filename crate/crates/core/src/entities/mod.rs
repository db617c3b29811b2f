//! Agents, targets and third-party reporters: state, kinematics and noisy
//! sensing.

mod motion;
mod sensing;

use std::collections::BTreeSet;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::Pose;

pub use motion::{load_playback, step_agent, step_target, Navigator, PlaybackSample};
pub(crate) use motion::sample_free_pose;
pub use sensing::{
    emit_report, false_positive_measurement, locate_with_noise, sense_detect, sense_locate,
};

pub type AgentId = u32;
pub type TargetId = u32;
pub type ReporterId = u32;

/// Omnidirectional detector with distance-dependent location noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    /// Visibility range, meters.
    pub range: f64,
    /// False-negative rate.
    pub alpha: f64,
    /// False-positive rate.
    pub beta: f64,
    /// Location noise std at distance 0, meters.
    pub sigma_near: f64,
    /// Location noise std at full range, meters.
    pub sigma_far: f64,
}

impl SensorModel {
    pub fn new(range: f64, alpha: f64, beta: f64, sigma_near: f64, sigma_far: f64) -> Result<Self> {
        let s = Self { range, alpha, beta, sigma_near, sigma_far };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(Error::InvalidConfig(format!("sensor range must be > 0, got {}", self.range)));
        }
        if !prob(self.alpha) || !prob(self.beta) {
            return Err(Error::InvalidConfig(format!(
                "alpha/beta must be in [0,1], got {}/{}",
                self.alpha, self.beta
            )));
        }
        if !(self.sigma_near > 0.0 && self.sigma_near <= self.sigma_far && self.sigma_far.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < sigma_near <= sigma_far, got {} / {}",
                self.sigma_near, self.sigma_far
            )));
        }
        Ok(())
    }

    /// Location noise std at distance `d`: linear from `sigma_near` at 0 to
    /// `sigma_far` at full range, clamped beyond it.
    pub fn sigma_at(&self, d: f64) -> f64 {
        let f = (d / self.range).clamp(0.0, 1.0);
        self.sigma_near + (self.sigma_far - self.sigma_near) * f
    }

    pub fn covariance_at(&self, d: f64) -> Matrix2<f64> {
        let s = self.sigma_at(d);
        Matrix2::identity() * (s * s)
    }

    /// Trace of the measurement information matrix at mid-range, discounted
    /// by the detection rate. Used as the trust weight of this source.
    pub fn information_trace(&self) -> f64 {
        let s = self.sigma_at(0.5 * self.range);
        (1.0 - self.alpha) * 2.0 / (s * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Search,
    Track,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub pose: Pose,
    /// Maximum speed, m/s.
    pub max_speed: f64,
    pub sensor: SensorModel,
    pub mode: Mode,
    pub assigned_target: Option<TargetId>,
    /// Distance traveled so far, meters.
    pub traveled: f64,
}

impl AgentState {
    pub fn new(id: AgentId, pose: Pose, max_speed: f64, sensor: SensorModel) -> Self {
        Self { id, pose, max_speed, sensor, mode: Mode::Search, assigned_target: None, traveled: 0.0 }
    }
}

/// How a target moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Motion {
    /// Straight to a uniformly drawn free goal, then draw another.
    RandomWaypoint { goal: Pose, route: Vec<Pose> },
    /// Replays a recorded trajectory.
    TracePlayback { samples: Vec<PlaybackSample>, cursor: f64, looped: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub id: TargetId,
    pub pose: Pose,
    /// Maximum speed, m/s.
    pub max_speed: f64,
    pub motion: Motion,
    /// Once cleared a target freezes and leaves every objective.
    pub cleared: bool,
}

/// A third-party source reporting noisy target positions at a fixed period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reporter {
    pub id: ReporterId,
    /// Report noise std, meters.
    pub sigma_report: f64,
    /// Seconds between reports.
    pub report_period: f64,
    pub observed_targets: BTreeSet<TargetId>,
}

impl Reporter {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_report > 0.0) || !(self.report_period > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "reporter {} needs sigma_report > 0 and report_period > 0",
                self.id
            )));
        }
        Ok(())
    }
}

/// Where a measurement came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Agent(AgentId),
    Reporter(ReporterId),
}

/// A located detection. `target_id` is `None` for unidentified false positives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub target_id: Option<TargetId>,
    pub position: Pose,
    pub covariance: Matrix2<f64>,
    pub time: f64,
    pub source: Source,
}
