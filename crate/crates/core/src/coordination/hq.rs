use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::agent::{search_candidates, SearchContext};
use crate::belief::{fuse_occupancy, posterior_covariance, OccupancyBelief, ReportEstimate, SharedOccupancyBelief};
use crate::entities::{AgentId, AgentState, Measurement, Mode, Source, TargetId};
use crate::error::Result;
use crate::planning::{normalize_scores, CandidateKind, CandidateTrajectory, GainScratch, UtilityWeights};
use crate::world::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "task")]
pub enum Task {
    /// Search goal `id` of the current round's goal list.
    Frontier { id: usize, goal: Pose },
    Target { target_id: TargetId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub agent_id: AgentId,
    pub task: Task,
    pub trajectory: CandidateTrajectory,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub agent_id: AgentId,
    pub task: Task,
    pub trajectory: CandidateTrajectory,
    pub issued_at: f64,
}

impl Assignment {
    pub fn terminal(&self) -> Pose {
        self.trajectory.terminal
    }
}

/// An agent's view of one detected target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub target_id: TargetId,
    pub mean: Pose,
    pub covariance: Matrix2<f64>,
    pub last_update: f64,
    /// Distance from the reporting agent.
    pub distance: f64,
    /// Measurement covariance the agent would obtain at that distance.
    pub meas_cov: Matrix2<f64>,
    pub monitoring_time: f64,
}

/// Periodic agent to HQ status.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStatus {
    pub agent: AgentState,
    pub belief: OccupancyBelief,
    /// Fusion weight of the agent's belief.
    pub trust: f64,
    pub tracks: Vec<TrackSummary>,
    /// Tracking bids, one per freshly observed target.
    pub bids: Vec<Bid>,
    pub sent_at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Status(Box<AgentStatus>),
    Report(Measurement),
    Assign { agent_id: AgentId, assignment: Option<Assignment> },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Status(_) => "status",
            Message::Report(_) => "report",
            Message::Assign { .. } => "assign",
        }
    }
}

/// Information HQ shares with every agent each round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HqBroadcast {
    pub reports: Vec<ReportEstimate>,
    /// Terminal of every assignment issued this round.
    pub terminals: Vec<(AgentId, Pose)>,
    pub track_owners: BTreeMap<TargetId, AgentId>,
}

/// HQ bookkeeping. Everything in it is derived from delivered messages.
#[derive(Debug, Clone, Default)]
pub struct HqState {
    pub statuses: BTreeMap<AgentId, AgentStatus>,
    /// Agents whose status arrived since the last round.
    pub fresh: BTreeSet<AgentId>,
    pub shared: Option<SharedOccupancyBelief>,
    /// Best known estimate of every detected target.
    pub registry: BTreeMap<TargetId, TrackSummary>,
    /// Most recent report per (reporter, target).
    pub reports: BTreeMap<(u32, TargetId), ReportEstimate>,
    pub cleared: BTreeSet<TargetId>,
    /// Current assignment per agent.
    pub ledger: BTreeMap<AgentId, Assignment>,
    /// Tracking assignment start per agent, for hysteresis.
    pub holds: BTreeMap<AgentId, (TargetId, f64)>,
    /// Agents holding an assignment this round.
    pub active: BTreeSet<AgentId>,
    pub hold_time: f64,
    pub q: f64,
    /// Bid evaluations performed by the auctions.
    pub ops: u64,
}

impl HqState {
    pub fn new(hold_time: f64, q: f64) -> Self {
        Self { hold_time, q, ..Default::default() }
    }

    pub fn ingest(&mut self, msg: Message) {
        match msg {
            Message::Status(s) => {
                let id = s.agent.id;
                for tr in &s.tracks {
                    if self.cleared.contains(&tr.target_id) {
                        continue;
                    }
                    let better = self
                        .registry
                        .get(&tr.target_id)
                        .is_none_or(|cur| tr.last_update > cur.last_update || tr.covariance.trace() < cur.covariance.trace());
                    if better {
                        self.registry.insert(tr.target_id, tr.clone());
                    }
                }
                self.fresh.insert(id);
                self.statuses.insert(id, *s);
            }
            Message::Report(m) => {
                let (Some(target_id), Source::Reporter(rid)) = (m.target_id, m.source) else { return };
                if self.cleared.contains(&target_id) {
                    return;
                }
                let est = ReportEstimate {
                    target_id,
                    mean: nalgebra::Vector2::new(m.position.x, m.position.y),
                    covariance: m.covariance,
                    reporter_id: rid,
                    time: m.time,
                };
                self.reports.insert((rid, target_id), est);
            }
            Message::Assign { .. } => {}
        }
    }

    pub fn mark_cleared(&mut self, target_id: TargetId) {
        self.cleared.insert(target_id);
        self.registry.remove(&target_id);
        self.reports.retain(|(_, t), _| *t != target_id);
    }

    /// Rebuilds the shared belief from the latest belief of every agent.
    pub fn fuse(&mut self) -> Result<()> {
        if self.statuses.is_empty() {
            return Ok(());
        }
        let inputs: Vec<(&OccupancyBelief, f64)> = self.statuses.values().map(|s| (&s.belief, s.trust)).collect();
        self.shared = Some(fuse_occupancy(&inputs)?);
        Ok(())
    }

    pub fn report_list(&self) -> Vec<ReportEstimate> {
        self.reports.values().cloned().collect()
    }

    /// Starts a new round: forgets last round's freshness and assignments.
    pub fn end_round(&mut self) {
        self.fresh.clear();
        self.active.clear();
    }
}

/// Whether `agent` may take a new tracking task at time `t`.
pub fn check_assign_available(hq: &HqState, agent: AgentId, t: f64) -> bool {
    match hq.holds.get(&agent) {
        Some(&(target, issued)) => t - issued >= hq.hold_time || hq.cleared.contains(&target),
        None => true,
    }
}

/// Trace of the covariance after one second of prediction and one
/// measurement at the reporting agent's distance.
pub fn expected_post_action_trace(s: &TrackSummary, q: f64) -> f64 {
    let p = s.covariance + Matrix2::identity() * q;
    posterior_covariance(&p, &s.meas_cov).map(|c| c.trace()).unwrap_or(p.trace())
}

/// Greedy tracking auction over the detected, uncleared targets in order
/// of ascending expected post-action trace. Agents under hysteresis keep
/// their target; each agent wins at most one target.
pub fn hq_assign_tracking(hq: &mut HqState, t: f64) -> Vec<Assignment> {
    let mut order: Vec<(f64, TargetId)> = hq
        .registry
        .iter()
        .filter(|(id, _)| !hq.cleared.contains(id))
        .map(|(id, s)| (expected_post_action_trace(s, hq.q), *id))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut out = Vec::new();
    let mut taken: BTreeSet<AgentId> = BTreeSet::new();
    for (_, target_id) in order {
        let bid_of = |agent: AgentId| {
            hq.statuses.get(&agent).and_then(|s| {
                s.bids.iter().find(|b| matches!(b.task, Task::Target { target_id: k } if k == target_id))
            })
        };
        let mut winner: Option<&Bid> = None;
        let mut held = false;
        for &agent in &hq.fresh {
            hq.ops += 1;
            if taken.contains(&agent) {
                continue;
            }
            let Some(bid) = bid_of(agent) else { continue };
            let holds_this = hq.holds.get(&agent).is_some_and(|h| h.0 == target_id);
            if holds_this && !check_assign_available(hq, agent, t) {
                winner = Some(bid);
                held = true;
                break;
            }
            if !check_assign_available(hq, agent, t) {
                continue;
            }
            if winner.is_none_or(|w| bid.utility > w.utility) {
                winner = Some(bid);
            }
        }
        let Some(w) = winner.cloned() else { continue };
        taken.insert(w.agent_id);
        let renew = held || hq.holds.get(&w.agent_id).is_some_and(|h| h.0 == target_id);
        if !renew {
            hq.holds.insert(w.agent_id, (target_id, t));
        }
        out.push(Assignment { agent_id: w.agent_id, task: w.task, trajectory: w.trajectory, issued_at: t });
    }
    for a in &out {
        hq.active.insert(a.agent_id);
        hq.ledger.insert(a.agent_id, a.clone());
    }
    // agents that stopped tracking lose their hold
    let tracking: BTreeSet<AgentId> = out.iter().map(|a| a.agent_id).collect();
    let fresh = hq.fresh.clone();
    hq.holds.retain(|a, _| tracking.contains(a) || !fresh.contains(a));
    out
}

/// Greedy search auction. Every fresh agent without a tracking task bids
/// its normalized utility on its own candidate goals; goals are auctioned
/// in order of their best bid to the best bidder whose terminal keeps
/// `d_thre` from every terminal already assigned.
pub fn hq_assign_search(
    hq: &mut HqState,
    ctx: &SearchContext,
    weights: &UtilityWeights,
    reserved_terminals: &[Pose],
    t: f64,
    scratch: &mut GainScratch,
) -> Vec<Assignment> {
    let idle: Vec<AgentId> = hq.fresh.iter().copied().filter(|a| !hq.active.contains(a)).collect();
    if idle.is_empty() {
        return Vec::new();
    }
    let w = weights.w_search;
    // bids[goal] = (utility, agent, trajectory)
    let mut bids: BTreeMap<usize, Vec<Bid>> = BTreeMap::new();
    for &agent in &idle {
        let mut state = hq.statuses[&agent].agent.clone();
        state.mode = Mode::Search;
        let cands = search_candidates(&state, ctx, scratch);
        let norm = normalize_scores(&cands);
        for (c, (je, jx)) in cands.into_iter().zip(norm) {
            let CandidateKind::Goal { index } = c.kind else { continue };
            let utility = w * je + (1.0 - w) * jx;
            let task = Task::Frontier { id: index, goal: ctx.goal(index) };
            bids.entry(index).or_default().push(Bid { agent_id: agent, task, trajectory: c, utility });
        }
    }
    let mut goals: Vec<(f64, usize)> = bids
        .iter()
        .map(|(g, bs)| (bs.iter().map(|b| b.utility).fold(f64::NEG_INFINITY, f64::max), *g))
        .collect();
    goals.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut terminals: Vec<Pose> = reserved_terminals.to_vec();
    let mut taken: BTreeSet<AgentId> = BTreeSet::new();
    let mut out = Vec::new();
    for (_, g) in goals {
        if taken.len() == idle.len() {
            break;
        }
        let mut best: Option<&Bid> = None;
        for b in &bids[&g] {
            hq.ops += 1;
            if taken.contains(&b.agent_id) {
                continue;
            }
            if terminals.iter().any(|p| p.distance(&b.trajectory.terminal) < weights.d_thre) {
                continue;
            }
            if best.is_none_or(|x| b.utility > x.utility || (b.utility == x.utility && b.agent_id < x.agent_id)) {
                best = Some(b);
            }
        }
        let Some(b) = best else { continue };
        taken.insert(b.agent_id);
        terminals.push(b.trajectory.terminal);
        out.push(Assignment { agent_id: b.agent_id, task: b.task, trajectory: b.trajectory.clone(), issued_at: t });
    }
    for a in &out {
        hq.active.insert(a.agent_id);
        hq.ledger.insert(a.agent_id, a.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entities::SensorModel;
    use crate::planning::{stay_candidate, PlannerConfig};
    use crate::world::GridMap;

    fn status(id: AgentId, pose: Pose, map: &GridMap, bids: Vec<(TargetId, f64)>) -> AgentStatus {
        let agent = AgentState::new(id, pose, 0.4, SensorModel::new(6.0, 0.1, 0.0, 0.7, 1.3).unwrap());
        AgentStatus {
            belief: OccupancyBelief::new(id, map, 0.0),
            trust: agent.sensor.information_trace(),
            agent,
            tracks: Vec::new(),
            bids: bids
                .into_iter()
                .map(|(k, u)| Bid { agent_id: id, task: Task::Target { target_id: k }, trajectory: stay_candidate(pose), utility: u })
                .collect(),
            sent_at: 0.0,
        }
    }

    fn summary(id: TargetId, cov: f64) -> TrackSummary {
        TrackSummary {
            target_id: id,
            mean: Pose::new(1.0, 1.0),
            covariance: Matrix2::identity() * cov,
            last_update: 0.0,
            distance: 1.0,
            meas_cov: Matrix2::identity() * 0.5,
            monitoring_time: 0.0,
        }
    }

    #[test]
    fn best_bid_wins_and_hysteresis_holds() {
        let map = GridMap::open(10, 10, 1.0).unwrap();
        let mut hq = HqState::new(5.0, 0.04);
        hq.registry.insert(0, summary(0, 1.0));
        hq.ingest(Message::Status(Box::new(status(0, Pose::new(1.5, 1.5), &map, vec![(0, 0.6)]))));
        hq.ingest(Message::Status(Box::new(status(1, Pose::new(2.5, 1.5), &map, vec![(0, 0.8)]))));
        let a = hq_assign_tracking(&mut hq, 0.0);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].agent_id, 1);
        assert!(!check_assign_available(&hq, 1, 1.0));
        assert!(check_assign_available(&hq, 1, 10.0));
        assert!(check_assign_available(&hq, 0, 1.0));

        // a better bid does not steal a held target
        hq.end_round();
        hq.ingest(Message::Status(Box::new(status(0, Pose::new(1.5, 1.5), &map, vec![(0, 0.9)]))));
        hq.ingest(Message::Status(Box::new(status(1, Pose::new(2.5, 1.5), &map, vec![(0, 0.1)]))));
        let a = hq_assign_tracking(&mut hq, 1.0);
        assert_eq!(a[0].agent_id, 1);
    }

    #[test]
    fn one_agent_two_targets() {
        let map = GridMap::open(10, 10, 1.0).unwrap();
        let mut hq = HqState::new(5.0, 0.04);
        hq.registry.insert(0, summary(0, 3.0));
        hq.registry.insert(1, summary(1, 1.0));
        hq.ingest(Message::Status(Box::new(status(0, Pose::new(1.5, 1.5), &map, vec![(0, 0.6), (1, 0.2)]))));
        let a = hq_assign_tracking(&mut hq, 0.0);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].task, Task::Target { target_id: 1 });
    }

    #[test]
    fn cleared_targets_are_not_assigned() {
        let map = GridMap::open(10, 10, 1.0).unwrap();
        let mut hq = HqState::new(5.0, 0.04);
        hq.registry.insert(0, summary(0, 1.0));
        hq.mark_cleared(0);
        hq.ingest(Message::Status(Box::new(status(0, Pose::new(1.5, 1.5), &map, vec![(0, 0.6)]))));
        assert!(hq_assign_tracking(&mut hq, 0.0).is_empty());
    }

    #[test]
    fn search_leaves_surplus_agent_idle() {
        let map = GridMap::open(20, 20, 1.0).unwrap();
        let mut hq = HqState::new(5.0, 0.04);
        hq.ingest(Message::Status(Box::new(status(0, Pose::new(1.5, 1.5), &map, vec![]))));
        hq.ingest(Message::Status(Box::new(status(1, Pose::new(3.5, 1.5), &map, vec![]))));
        let mut own = OccupancyBelief::new(0, &map, 0.0);
        own.set(0, 0.1, 0.0);
        let shared = fuse_occupancy(&[(&own, 1.0)]).unwrap();
        let planner = PlannerConfig::default();
        let goals = [Pose::new(15.5, 15.5)];
        let ctx = SearchContext { map: &map, belief: &shared, frontier_goals: &goals, report_goals: &[], exploit: &[], planner: &planner };
        let a = hq_assign_search(&mut hq, &ctx, &UtilityWeights::default(), &[], 0.0, &mut GainScratch::default());
        assert_eq!(a.len(), 1);
        assert!(hq.active.contains(&a[0].agent_id));
    }
}
