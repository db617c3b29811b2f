use std::collections::VecDeque;
use std::path::Path as FsPath;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AgentState, Motion, TargetState};
use crate::error::{Error, Result};
use crate::world::{line_of_sight, plan_path, GridMap, Pose};

/// One sample of a recorded target trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaybackSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Reads a playback file: a JSON array of `{t, x, y}` with strictly
/// increasing `t`.
pub fn load_playback(path: impl AsRef<FsPath>) -> Result<Vec<PlaybackSample>> {
    let samples: Vec<PlaybackSample> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    validate_playback(&samples)?;
    Ok(samples)
}

pub(crate) fn validate_playback(samples: &[PlaybackSample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("playback trajectory is empty".into()));
    }
    if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::InvalidConfig("playback times must be strictly increasing".into()));
    }
    Ok(())
}

fn interpolate(samples: &[PlaybackSample], t: f64) -> Pose {
    let i = samples.partition_point(|s| s.t <= t);
    if i == 0 {
        return Pose::new(samples[0].x, samples[0].y);
    }
    if i == samples.len() {
        let s = samples[i - 1];
        return Pose::new(s.x, s.y);
    }
    let (a, b) = (samples[i - 1], samples[i]);
    let f = (t - a.t) / (b.t - a.t);
    Pose::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
}

/// Route toward `goal`: straight when visible, otherwise the planned path
/// with leading waypoints skipped while still visible from `from`.
fn route_to(map: &GridMap, from: &Pose, goal: &Pose) -> Result<VecDeque<Pose>> {
    if line_of_sight(map, from, goal) {
        return Ok(VecDeque::from([*goal]));
    }
    let path = plan_path(map, from, goal)?;
    let mut pts = path.waypoints;
    pts.push(*goal);
    let mut skip = 0;
    while skip + 1 < pts.len() && line_of_sight(map, from, &pts[skip + 1]) {
        skip += 1;
    }
    Ok(pts.into_iter().skip(skip).collect())
}

/// Moves along `route` by at most `budget` meters. Returns the distance moved.
fn advance(pose: &mut Pose, route: &mut VecDeque<Pose>, mut budget: f64) -> f64 {
    let mut moved = 0.0;
    while budget > 0.0 {
        let Some(next) = route.front().copied() else { break };
        let d = pose.distance(&next);
        if d <= budget {
            *pose = next;
            budget -= d;
            moved += d;
            route.pop_front();
        } else {
            let f = budget / d;
            pose.x += f * (next.x - pose.x);
            pose.y += f * (next.y - pose.y);
            moved += budget;
            budget = 0.0;
        }
    }
    moved
}

/// Waypoint follower that caches the planned route between calls.
#[derive(Debug, Clone, Default)]
pub struct Navigator {
    goal: Option<Pose>,
    route: VecDeque<Pose>,
}

impl Navigator {
    pub fn goal(&self) -> Option<Pose> {
        self.goal
    }

    /// Moves `pose` toward `goal` by at most `speed·dt`. Returns the distance
    /// moved.
    pub fn step(&mut self, map: &GridMap, pose: &mut Pose, goal: &Pose, speed: f64, dt: f64) -> Result<f64> {
        let replan = match self.goal {
            Some(g) => g.distance(goal) > 1e-9 || (self.route.is_empty() && pose.distance(goal) > 1e-9),
            None => true,
        };
        if replan {
            self.route = if pose.distance(goal) <= 1e-12 {
                VecDeque::new()
            } else {
                route_to(map, pose, goal)?
            };
            self.goal = Some(*goal);
        }
        Ok(advance(pose, &mut self.route, speed * dt))
    }
}

/// Moves the agent toward `waypoint` at up to its maximum speed.
pub fn step_agent(a: &AgentState, waypoint: &Pose, map: &GridMap, dt: f64) -> Result<AgentState> {
    let mut next = a.clone();
    let moved = Navigator::default().step(map, &mut next.pose, waypoint, a.max_speed, dt)?;
    next.traveled += moved;
    Ok(next)
}

pub(crate) fn sample_free_pose(map: &GridMap, rng: &mut impl Rng) -> Pose {
    let free: usize = map.free_count();
    let k = rng.random_range(0..free);
    let idx = map.free_indices().nth(k).expect("free cell");
    let c = map.center(map.cell_at(idx));
    let half = 0.5 * map.resolution();
    Pose::new(
        c.x + rng.random_range(-half..half) * 0.999,
        c.y + rng.random_range(-half..half) * 0.999,
    )
}

/// Advances a target by `dt`.
pub fn step_target(t: &TargetState, map: &GridMap, dt: f64, rng: &mut impl Rng) -> Result<TargetState> {
    let mut next = t.clone();
    if t.cleared || (t.max_speed <= 0.0 && matches!(t.motion, Motion::RandomWaypoint { .. })) {
        return Ok(next);
    }
    match &mut next.motion {
        Motion::RandomWaypoint { goal, route } => {
            let mut queue: VecDeque<Pose> = route.drain(..).collect();
            if queue.is_empty() && next.pose.distance(goal) > 1e-12 {
                queue = route_to(map, &next.pose, goal)?;
            }
            advance(&mut next.pose, &mut queue, next.max_speed * dt);
            if next.pose.distance(goal) <= 0.5 * map.resolution() {
                // a fresh goal is drawn only when one is reachable
                for _ in 0..32 {
                    let candidate = sample_free_pose(map, rng);
                    if let Ok(r) = route_to(map, &next.pose, &candidate) {
                        *goal = candidate;
                        queue = r;
                        break;
                    }
                }
            }
            *route = queue.into_iter().collect();
        }
        Motion::TracePlayback { samples, cursor, looped } => {
            let end = samples.last().map(|s| s.t).unwrap_or(0.0);
            let start = samples.first().map(|s| s.t).unwrap_or(0.0);
            let mut c = *cursor + dt;
            if c > end + 1e-9 {
                if !*looped || end <= start {
                    return Err(Error::TraceExhausted(c));
                }
                c = start + (c - start) % (end - start);
            }
            *cursor = c;
            let p = interpolate(samples, c);
            if map.is_free(&p) {
                next.pose = p;
            }
        }
    }
    Ok(next)
}
