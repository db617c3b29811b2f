use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::belief::SharedOccupancyBelief;
use crate::entities::{AgentState, Mode, TargetId};
use crate::planning::{
    gen_search_candidates, gen_track_candidates, j_exploit_targets, j_explore, pursuit_candidate, select_best,
    CandidateTrajectory, ExploitTarget, GainScratch, PlannerConfig, Selection, UtilityWeights, STEP_DT,
};
use crate::prediction::Point;
use crate::world::{line_of_sight, GridMap, Pose};

/// What an agent does until its next planning tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "action")]
pub enum Action {
    Goto { goal: Pose },
    Stay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Action,
    pub mode: Mode,
    pub selection: Option<Selection>,
    pub trajectory: Option<CandidateTrajectory>,
    pub n_candidates: usize,
}

impl Decision {
    pub fn stay(mode: Mode) -> Self {
        Self { action: Action::Stay, mode, selection: None, trajectory: None, n_candidates: 0 }
    }

    fn from_selection(mode: Mode, mut cands: Vec<CandidateTrajectory>, sel: Option<Selection>) -> Self {
        let n = cands.len();
        match sel {
            Some(s) => {
                let tau = cands.swap_remove(s.index);
                let action = if tau.path_length > 1e-9 { Action::Goto { goal: tau.terminal } } else { Action::Stay };
                Self { action, mode, selection: Some(s), trajectory: Some(tau), n_candidates: n }
            }
            None => Self { n_candidates: n, ..Self::stay(mode) },
        }
    }

    pub fn terminal(&self, current: Pose) -> Pose {
        match self.action {
            Action::Goto { goal } => goal,
            Action::Stay => current,
        }
    }
}

/// Inputs of search planning for one agent.
#[derive(Debug, Clone, Copy)]
pub struct SearchContext<'a> {
    pub map: &'a GridMap,
    pub belief: &'a SharedOccupancyBelief,
    pub frontier_goals: &'a [Pose],
    /// Goals derived from third-party reports; always considered.
    pub report_goals: &'a [Pose],
    /// Estimates rewarded by the exploitation term.
    pub exploit: &'a [ExploitTarget],
    pub planner: &'a PlannerConfig,
}

impl SearchContext<'_> {
    pub fn goal(&self, index: usize) -> Pose {
        if index < self.frontier_goals.len() {
            self.frontier_goals[index]
        } else {
            self.report_goals[index - self.frontier_goals.len()]
        }
    }
}

/// Scored search candidates. `CandidateKind::Goal { index }` indexes the
/// frontier goals followed by the report goals. Only the nearest
/// `max_goals` frontier goals by path length are kept. Scores are gain
/// rates per second of trajectory.
pub fn search_candidates(agent: &AgentState, ctx: &SearchContext, scratch: &mut GainScratch) -> Vec<CandidateTrajectory> {
    let nf = ctx.frontier_goals.len();
    let cap = ctx.planner.max_goals;
    let mut order: Vec<usize> = (0..nf).collect();
    order.sort_by(|&a, &b| {
        let da = agent.pose.distance(&ctx.frontier_goals[a]);
        let db = agent.pose.distance(&ctx.frontier_goals[b]);
        da.total_cmp(&db).then(a.cmp(&b))
    });
    order.truncate(2 * cap);
    order.sort_unstable();
    order.extend(nf..nf + ctx.report_goals.len());

    let goals: Vec<Pose> = order.iter().map(|&i| ctx.goal(i)).collect();
    let mut cands = gen_search_candidates(agent, &goals, ctx.map, ctx.planner.sample_step, ctx.planner.dwell);
    for c in &mut cands {
        if let crate::planning::CandidateKind::Goal { index } = &mut c.kind {
            *index = order[*index];
        }
    }
    let goal_index = |c: &CandidateTrajectory| match c.kind {
        crate::planning::CandidateKind::Goal { index } => index,
        _ => usize::MAX,
    };
    let (mut frontier, reports): (Vec<_>, Vec<_>) = cands.into_iter().partition(|c| goal_index(c) < nf);
    frontier.sort_by(|a, b| a.path_length.total_cmp(&b.path_length).then(goal_index(a).cmp(&goal_index(b))));
    frontier.truncate(cap);
    frontier.extend(reports);
    frontier.sort_by_key(goal_index);

    for c in &mut frontier {
        let duration = c.duration.max(STEP_DT);
        c.j_explore = j_explore(ctx.belief, c, &agent.sensor, ctx.map, scratch) / duration;
        c.j_exploit = j_exploit_targets(ctx.exploit, c, &agent.sensor) / duration;
    }
    frontier
}

/// Best search trajectory, or stay when no goal is reachable.
pub fn plan_search(
    agent: &AgentState,
    ctx: &SearchContext,
    weights: &UtilityWeights,
    teammate_terminals: &[Pose],
    scratch: &mut GainScratch,
) -> Decision {
    let cands = search_candidates(agent, ctx, scratch);
    let sel = select_best(&cands, Mode::Search, weights, teammate_terminals);
    Decision::from_selection(Mode::Search, cands, sel)
}

/// Inputs of tracking planning for one agent and one target.
#[derive(Debug, Clone, Copy)]
pub struct TrackContext<'a> {
    pub map: &'a GridMap,
    pub belief: &'a SharedOccupancyBelief,
    pub target_id: TargetId,
    pub mean: Pose,
    /// Covariance now.
    pub covariance: Matrix2<f64>,
    /// Predicted positions every `STEP_DT` seconds starting one step ahead.
    pub predicted: &'a [Point],
    pub q: f64,
    pub planner: &'a PlannerConfig,
}

/// Scored tracking candidates: velocity rollouts aimed along the predicted
/// motion plus, when the target is far or hidden, a pursuit path.
pub fn track_candidates(agent: &AgentState, ctx: &TrackContext, scratch: &mut GainScratch) -> Vec<CandidateTrajectory> {
    let mut positions = vec![ctx.mean];
    positions.extend(ctx.predicted.iter().map(|p| Pose::new(p[0], p[1])));
    let aim = *positions.last().unwrap();
    let target = ExploitTarget { positions, step_dt: STEP_DT, covariance: ctx.covariance, q: ctx.q };
    let mut cands = gen_track_candidates(agent, Some(&aim), ctx.map, ctx.planner.n_headings, ctx.planner.n_speeds);
    let far = agent.pose.distance(&ctx.mean) > 0.5 * agent.sensor.range;
    if far || !line_of_sight(ctx.map, &agent.pose, &ctx.mean) {
        cands.extend(pursuit_candidate(agent, &aim, ctx.map));
    }
    let targets = std::slice::from_ref(&target);
    for c in &mut cands {
        c.j_explore = j_explore(ctx.belief, c, &agent.sensor, ctx.map, scratch);
        c.j_exploit = j_exploit_targets(targets, c, &agent.sensor);
    }
    cands
}

pub fn plan_track(agent: &AgentState, ctx: &TrackContext, weights: &UtilityWeights, scratch: &mut GainScratch) -> Decision {
    let cands = track_candidates(agent, ctx, scratch);
    let sel = select_best(&cands, Mode::Track, weights, &[]);
    Decision::from_selection(Mode::Track, cands, sel)
}

/// One planning step without HQ input: track the current target when in
/// tracking mode and an estimate is available, search otherwise.
pub fn agent_independent_step(
    agent: &AgentState,
    search: &SearchContext,
    track: Option<&TrackContext>,
    weights: &UtilityWeights,
    teammate_terminals: &[Pose],
    scratch: &mut GainScratch,
) -> Decision {
    match (agent.mode, track) {
        (Mode::Track, Some(t)) => plan_track(agent, t, weights, scratch),
        _ => plan_search(agent, search, weights, teammate_terminals, scratch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{fuse_occupancy, OccupancyBelief};
    use crate::entities::SensorModel;

    fn agent(x: f64, y: f64) -> AgentState {
        AgentState::new(0, Pose::new(x, y), 0.4, SensorModel::new(5.0, 0.1, 0.0, 0.7, 1.3).unwrap())
    }

    #[test]
    fn no_goals_means_stay() {
        let map = GridMap::open(10, 10, 1.0).unwrap();
        let b = SharedOccupancyBelief::uniform(10, 10);
        let planner = PlannerConfig::default();
        let ctx = SearchContext { map: &map, belief: &b, frontier_goals: &[], report_goals: &[], exploit: &[], planner: &planner };
        let d = plan_search(&agent(1.5, 1.5), &ctx, &UtilityWeights::default(), &[], &mut GainScratch::default());
        assert_eq!(d.action, Action::Stay);
    }

    #[test]
    fn goal_indices_survive_filtering() {
        let map = GridMap::open(30, 30, 1.0).unwrap();
        let mut own = OccupancyBelief::new(0, &map, 0.0);
        own.set(0, 0.1, 0.0);
        let b = fuse_occupancy(&[(&own, 1.0)]).unwrap();
        let mut planner = PlannerConfig::default();
        planner.max_goals = 2;
        let goals: Vec<Pose> = (0..6).map(|k| Pose::new(0.5 + 5.0 * k as f64, 0.5)).collect();
        let reports = [Pose::new(29.5, 29.5)];
        let ctx = SearchContext { map: &map, belief: &b, frontier_goals: &goals, report_goals: &reports, exploit: &[], planner: &planner };
        let cands = search_candidates(&agent(20.5, 0.5), &ctx, &mut GainScratch::default());
        let idx: Vec<usize> = cands
            .iter()
            .map(|c| match c.kind {
                crate::planning::CandidateKind::Goal { index } => index,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(idx, vec![3, 4, 6]);
        for c in &cands {
            let g = match c.kind {
                crate::planning::CandidateKind::Goal { index } => ctx.goal(index),
                _ => unreachable!(),
            };
            assert!(c.terminal.distance(&g) < 1e-9);
        }
    }

    #[test]
    fn tracking_prefers_closing_in() {
        let map = GridMap::open(30, 30, 1.0).unwrap();
        let b = SharedOccupancyBelief::uniform(30, 30);
        let planner = PlannerConfig::default();
        let predicted: Vec<Point> = (1..=15).map(|_| [14.5, 5.5]).collect();
        let ctx = TrackContext {
            map: &map,
            belief: &b,
            target_id: 0,
            mean: Pose::new(14.5, 5.5),
            covariance: Matrix2::identity() * 2.0,
            predicted: &predicted,
            q: 0.04,
            planner: &planner,
        };
        let a = agent(5.5, 5.5);
        let d = plan_track(&a, &ctx, &UtilityWeights::default(), &mut GainScratch::default());
        let g = d.terminal(a.pose);
        assert!(g.distance(&ctx.mean) < a.pose.distance(&ctx.mean));
    }
}
