use super::{CandidateKind, CandidateTrajectory, TimedPose, LOOKAHEAD_STEPS, STEP_DT};
use crate::entities::AgentState;
use crate::world::{line_of_sight, plan_path, resample_polyline, CostField, GridMap, Pose};

/// Splits every segment into equal parts no longer than `step`, keeping the
/// original vertices.
fn subdivide(points: &[Pose], step: f64) -> Vec<Pose> {
    let mut out: Vec<Pose> = points.first().copied().into_iter().collect();
    for w in points.windows(2) {
        let d = w[0].distance(&w[1]);
        let n = (d / step).ceil().max(1.0) as usize;
        for k in 1..=n {
            let f = k as f64 / n as f64;
            out.push(Pose::new(w[0].x + f * (w[1].x - w[0].x), w[0].y + f * (w[1].y - w[0].y)));
        }
    }
    out
}

fn timed(points: &[Pose], speed: f64) -> Vec<TimedPose> {
    let mut t = 0.0;
    let mut out = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            t += points[i - 1].distance(p) / speed;
        }
        out.push(TimedPose { t, pose: *p });
    }
    out
}

/// One candidate per reachable goal: the planned path from the agent,
/// sampled at most `sample_step` meters apart and timed at the agent's top speed,
/// followed by a `dwell` at the goal. Unreachable goals are dropped.
pub fn gen_search_candidates(
    agent: &AgentState,
    goals: &[Pose],
    map: &GridMap,
    sample_step: f64,
    dwell: f64,
) -> Vec<CandidateTrajectory> {
    let Ok(field) = CostField::new(map, &agent.pose) else { return Vec::new() };
    let mut out = Vec::new();
    for (index, goal) in goals.iter().enumerate() {
        let Some(cell) = map.cell_of(goal).filter(|c| map.is_free_cell(*c)) else { continue };
        let Some(path) = field.path_to(map, cell) else { continue };
        let mut pts = vec![agent.pose];
        pts.extend(path.waypoints.iter().skip(1).copied());
        if pts.last().is_some_and(|p| p.distance(goal) > 1e-9) {
            pts.push(*goal);
        }
        let sampled = subdivide(&pts, sample_step);
        let length: f64 = sampled.windows(2).map(|w| w[0].distance(&w[1])).sum();
        let mut poses = timed(&sampled, agent.max_speed);
        let end = *poses.last().unwrap();
        if dwell > 0.0 {
            poses.push(TimedPose { t: end.t + dwell, pose: end.pose });
        }
        out.push(CandidateTrajectory::new(CandidateKind::Goal { index }, poses, length));
    }
    out
}

/// Staying put for the lookahead horizon.
pub fn stay_candidate(pose: Pose) -> CandidateTrajectory {
    let poses = (0..=LOOKAHEAD_STEPS).map(|k| TimedPose { t: k as f64 * STEP_DT, pose }).collect();
    CandidateTrajectory::new(CandidateKind::Stay, poses, 0.0)
}

/// Constant-velocity rollouts over the lookahead horizon: `n_headings`
/// evenly spaced headings (starting at the bearing to `toward` when given)
/// times `n_speeds` speeds up to the agent's maximum. Rollouts that leave
/// free space are discarded. The stay candidate comes first.
pub fn gen_track_candidates(
    agent: &AgentState,
    toward: Option<&Pose>,
    map: &GridMap,
    n_headings: usize,
    n_speeds: usize,
) -> Vec<CandidateTrajectory> {
    let mut out = vec![stay_candidate(agent.pose)];
    let base = toward
        .filter(|p| p.distance(&agent.pose) > 1e-9)
        .map(|p| (p.y - agent.pose.y).atan2(p.x - agent.pose.x))
        .unwrap_or(0.0);
    for h in 0..n_headings {
        let theta = base + std::f64::consts::TAU * h as f64 / n_headings as f64;
        for s in 1..=n_speeds {
            let speed = agent.max_speed * s as f64 / n_speeds as f64;
            let (vx, vy) = (speed * theta.cos(), speed * theta.sin());
            let mut poses = Vec::with_capacity(LOOKAHEAD_STEPS + 1);
            poses.push(TimedPose { t: 0.0, pose: agent.pose });
            let mut ok = true;
            for k in 1..=LOOKAHEAD_STEPS {
                let t = k as f64 * STEP_DT;
                let p = Pose::new(agent.pose.x + vx * t, agent.pose.y + vy * t);
                if !line_of_sight(map, &poses[k - 1].pose, &p) {
                    ok = false;
                    break;
                }
                poses.push(TimedPose { t, pose: p });
            }
            if ok {
                let length = speed * LOOKAHEAD_STEPS as f64 * STEP_DT;
                out.push(CandidateTrajectory::new(CandidateKind::Velocity { vx, vy }, poses, length));
            }
        }
    }
    out
}

/// The first lookahead-horizon stretch of the planned path toward `target`.
pub fn pursuit_candidate(agent: &AgentState, target: &Pose, map: &GridMap) -> Option<CandidateTrajectory> {
    let goal = if map.is_free(target) { *target } else { map.center(map.nearest_free(target)?) };
    let path = plan_path(map, &agent.pose, &goal).ok()?;
    let mut pts = vec![agent.pose];
    pts.extend(path.waypoints.iter().skip(1).copied());
    if pts.last().is_some_and(|p| p.distance(&goal) > 1e-9) {
        pts.push(goal);
    }
    let sampled = resample_polyline(&pts, agent.max_speed * STEP_DT);
    let poses: Vec<TimedPose> = sampled
        .iter()
        .take(LOOKAHEAD_STEPS + 1)
        .enumerate()
        .map(|(k, p)| TimedPose { t: k as f64 * STEP_DT, pose: *p })
        .collect();
    let length = poses.windows(2).map(|w| w[0].pose.distance(&w[1].pose)).sum();
    Some(CandidateTrajectory::new(CandidateKind::Pursuit, poses, length))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entities::SensorModel;

    fn agent(x: f64, y: f64) -> AgentState {
        AgentState::new(0, Pose::new(x, y), 0.4, SensorModel::new(6.0, 0.1, 0.0, 0.7, 1.3).unwrap())
    }

    #[test]
    fn seventeen_candidates_in_open_space() {
        let map = GridMap::open(20, 20, 1.0).unwrap();
        let c = gen_track_candidates(&agent(10.5, 10.5), None, &map, 8, 2);
        assert_eq!(c.len(), 17);
        for cand in &c {
            for w in cand.poses.windows(2) {
                assert!(w[0].pose.distance(&w[1].pose) <= 0.4 * STEP_DT + 1e-9);
            }
        }
    }

    #[test]
    fn dead_end_keeps_stay() {
        let map = GridMap::parse("5 1 1.0\n....#\n").unwrap();
        let c = gen_track_candidates(&agent(3.5, 0.5), Some(&Pose::new(10.0, 0.5)), &map, 8, 2);
        assert_eq!(c[0].kind, CandidateKind::Stay);
        // stay, two speeds straight back, slow diagonals that stay inside the row
        assert_eq!(c.len(), 7);
        assert!(c.iter().all(|c| !matches!(c.kind, CandidateKind::Velocity { vx, vy } if vx > 0.3 || (vx > 0.0 && vy.abs() < 1e-9))));
    }

    #[test]
    fn search_candidates_reach_goals_or_drop() {
        let map = GridMap::parse("5 5 1.0\n.....\n.###.\n.#.#.\n.###.\n.....\n").unwrap();
        let a = agent(0.5, 0.5);
        assert!(gen_search_candidates(&a, &[], &map, 1.5, 3.0).is_empty());
        let c = gen_search_candidates(&a, &[Pose::new(4.5, 4.5), Pose::new(2.5, 2.5)], &map, 1.5, 3.0);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].terminal, Pose::new(4.5, 4.5));
        assert_eq!(c[0].kind, CandidateKind::Goal { index: 0 });
        assert!((c[0].path_length - 8.0).abs() < 1e-9);
        assert!((c[0].duration - (8.0 / 0.4 + 3.0)).abs() < 1e-9);
    }

    #[test]
    fn pursuit_is_bounded_by_horizon() {
        let map = GridMap::open(30, 30, 1.0).unwrap();
        let c = pursuit_candidate(&agent(0.5, 0.5), &Pose::new(25.5, 0.5), &map).unwrap();
        assert_eq!(c.poses.len(), LOOKAHEAD_STEPS + 1);
        assert!((c.terminal.x - (0.5 + 0.4 * 3.0)).abs() < 1e-9);
    }
}
