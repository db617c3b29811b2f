use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, OnceLock};

use nalgebra::Matrix2;

use super::metrics::RunMetrics;
use super::trace::{Entity, Event, Trace, TraceMeta, TRACE_VERSION};
use crate::baselines::{boustrophedon_path, lane_spacing, random_walk_step, swarm_step, voronoi_partition, PolicyKind};
use crate::belief::{fuse_occupancy, is_tracked, kf_predict, kf_update, OccupancyBelief, ReportEstimate, SharedOccupancyBelief, TrackEstimate};
use crate::config::{Effective, ScenarioConfig};
use crate::coordination::{
    agent_independent_step, hq_assign_search, hq_assign_tracking, plan_track, Action, AgentStatus, Assignment, Bid,
    BusConfig, Channel, Decision, HqState, Message, MessageBus, SearchContext, Task, TrackContext, TrackSummary,
};
use crate::entities::{
    emit_report, false_positive_measurement, sense_detect, sense_locate, step_target, AgentId, AgentState, Measurement,
    Mode, Navigator, Reporter, Source, TargetId, TargetState,
};
use crate::error::Result;
use crate::planning::{extract_frontiers, ExploitTarget, GainScratch, UtilityWeights};
use crate::prediction::{CvPredictor, LstmPredictor, Point, Predictor, PredictorWeights, INPUT_LEN};
use crate::rng::{stream, SimRng, StreamKind};
use crate::world::{line_of_sight, FovScratch, GridMap, Pose};

/// Sender id used by HQ on the bus.
pub const HQ_ID: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct AgentTrack {
    est: TrackEstimate,
    history: VecDeque<Point>,
    last_z: Pose,
    updated: bool,
}

#[derive(Debug, Clone)]
struct Phantom {
    pos: Pose,
    hits: u32,
    misses: u32,
    hit: bool,
    confirmed: bool,
}

/// What an agent last heard from HQ.
#[derive(Debug, Clone, Default)]
struct Knowledge {
    reports: Vec<ReportEstimate>,
    terminals: Vec<(AgentId, Pose)>,
    owners: BTreeMap<TargetId, AgentId>,
}

#[derive(Debug, Clone)]
struct AgentRt {
    state: AgentState,
    belief: OccupancyBelief,
    tracks: BTreeMap<TargetId, AgentTrack>,
    phantoms: Vec<Phantom>,
    nav: Navigator,
    action: Action,
    task: Option<Task>,
    assigned_round: Option<u64>,
    released_round: Option<u64>,
    sense_rng: SimRng,
    policy_rng: SimRng,
    known: Knowledge,
    idle_rounds: u32,
    max_idle: u32,
    sweep: Vec<Pose>,
    sweep_cursor: usize,
    rw_goal: Option<Pose>,
}

impl AgentRt {
    fn chased_phantom(&self) -> Option<Pose> {
        self.phantoms.iter().find(|p| p.confirmed).map(|p| p.pos)
    }
}

#[derive(Debug, Clone)]
struct ReporterRt {
    reporter: Reporter,
    next_report: f64,
    rng: SimRng,
}

/// Output of one episode.
#[derive(Debug, Clone)]
pub struct EpisodeOutput {
    pub metrics: RunMetrics,
    pub trace: Trace,
}

fn bundled_predictor() -> Arc<dyn Predictor> {
    static CELL: OnceLock<Arc<LstmPredictor>> = OnceLock::new();
    CELL.get_or_init(|| Arc::new(LstmPredictor::default())).clone()
}

/// Fixed-step simulation of one scenario.
pub struct Engine {
    cfg: ScenarioConfig,
    eff: Effective,
    map: GridMap,
    agents: Vec<AgentRt>,
    targets: Vec<TargetState>,
    target_rngs: Vec<SimRng>,
    reporters: Vec<ReporterRt>,
    bus: MessageBus<Message>,
    bus_rng: SimRng,
    hq: HqState,
    predictor: Arc<dyn Predictor>,
    tick: u64,
    trace: Trace,
    first_detect: Vec<Option<f64>>,
    clear_time: Vec<Option<f64>>,
    fov: FovScratch,
    buf: Vec<usize>,
    gain: GainScratch,
}

impl Engine {
    pub fn new(cfg: &ScenarioConfig, record: bool) -> Result<Self> {
        let eff = cfg.effective();
        let predictor: Arc<dyn Predictor> = if !eff.toggles.lstm {
            Arc::new(CvPredictor::default())
        } else if let Some(p) = &cfg.predictor {
            Arc::new(LstmPredictor::new(PredictorWeights::load(p)?))
        } else {
            bundled_predictor()
        };
        Self::with_predictor(cfg, predictor, record)
    }

    pub fn with_predictor(cfg: &ScenarioConfig, predictor: Arc<dyn Predictor>, record: bool) -> Result<Self> {
        let scenario = cfg.build()?;
        let eff = cfg.effective();
        let map = scenario.map;
        let seed = cfg.seed;
        let decay = if eff.toggles.tv { cfg.engine.decay_rate } else { 0.0 };
        let mut agents: Vec<AgentRt> = scenario
            .agents
            .into_iter()
            .map(|state| AgentRt {
                belief: OccupancyBelief::new(state.id, &map, decay),
                tracks: BTreeMap::new(),
                phantoms: Vec::new(),
                nav: Navigator::default(),
                action: Action::Stay,
                task: None,
                assigned_round: None,
                released_round: None,
                sense_rng: stream(seed, StreamKind::Agent, state.id as u64),
                policy_rng: stream(seed, StreamKind::Policy, state.id as u64),
                known: Knowledge::default(),
                idle_rounds: 0,
                max_idle: 0,
                sweep: Vec::new(),
                sweep_cursor: 0,
                rw_goal: None,
                state,
            })
            .collect();
        if cfg.policy == PolicyKind::Exhaustive {
            let starts: Vec<Pose> = agents.iter().map(|a| a.state.pose).collect();
            let regions = voronoi_partition(&map, &starts)?;
            for (a, region) in agents.iter_mut().zip(regions) {
                if region.is_empty() {
                    continue;
                }
                let spacing = lane_spacing(&map, a.state.sensor.range);
                a.sweep = boustrophedon_path(&map, &region, spacing)?.waypoints;
            }
        }
        let target_rngs = scenario.targets.iter().map(|t| stream(seed, StreamKind::Target, t.id as u64)).collect();
        let reporters = scenario
            .reporters
            .into_iter()
            .map(|r| ReporterRt {
                next_report: r.report_period,
                rng: stream(seed, StreamKind::Reporter, r.id as u64),
                reporter: r,
            })
            .collect();
        let bus = MessageBus::new(BusConfig {
            p_cf: cfg.failures.p_cf,
            p_ef: cfg.failures.p_ef,
            p_hq: 0.0,
            latency_ticks: cfg.engine.latency_ticks,
        });
        let meta = TraceMeta {
            version: TRACE_VERSION.into(),
            seed,
            scenario: cfg.name.clone(),
            policy: cfg.policy.name().into(),
            dt: cfg.engine.dt,
        };
        let n_targets = scenario.targets.len();
        let mut engine = Self {
            cfg: cfg.clone(),
            eff,
            map,
            agents,
            targets: scenario.targets,
            target_rngs,
            reporters,
            bus,
            bus_rng: stream(seed, StreamKind::Bus, 0),
            hq: HqState::new(cfg.engine.hold_time, cfg.engine.q),
            predictor,
            tick: 0,
            trace: Trace::new(meta, record),
            first_detect: vec![None; n_targets],
            clear_time: vec![None; n_targets],
            fov: FovScratch::default(),
            buf: Vec::new(),
            gain: GainScratch::default(),
        };
        engine.record_poses();
        Ok(engine)
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.engine.dt
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn agents(&self) -> Vec<&AgentState> {
        self.agents.iter().map(|a| &a.state).collect()
    }

    pub fn targets(&self) -> &[TargetState] {
        &self.targets
    }

    pub fn hq(&self) -> &HqState {
        &self.hq
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn belief(&self, agent: usize) -> &OccupancyBelief {
        &self.agents[agent].belief
    }

    pub fn track(&self, agent: usize, target: TargetId) -> Option<&TrackEstimate> {
        self.agents[agent].tracks.get(&target).map(|t| &t.est)
    }

    pub fn action(&self, agent: usize) -> Action {
        self.agents[agent].action
    }

    pub fn all_cleared(&self) -> bool {
        self.targets.iter().all(|t| t.cleared)
    }

    pub fn done(&self) -> bool {
        let cap = self.cfg.time_cap;
        self.all_cleared() || (cap > 0.0 && self.time() >= cap - 1e-9)
    }

    pub fn run(mut self) -> Result<EpisodeOutput> {
        while !self.done() {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> EpisodeOutput {
        let cap = self.cfg.time_cap;
        let t = self.time();
        let mission_time = if cap > 0.0 { t.min(cap) } else { t };
        let traveled: Vec<f64> = self.agents.iter().map(|a| a.state.traveled).collect();
        let mut metrics = RunMetrics::from_times(mission_time, self.clear_time, self.first_detect, &traveled);
        metrics.max_idle_rounds = self.agents.iter().map(|a| a.max_idle).max().unwrap_or(0);
        metrics.messages_sent = self.bus.sent;
        metrics.messages_dropped = self.bus.dropped;
        EpisodeOutput { metrics, trace: self.trace }
    }

    /// Advances the simulation by one sensor tick.
    pub fn step(&mut self) -> Result<()> {
        self.tick += 1;
        let t = self.time();
        let dt = self.cfg.engine.dt;
        for (tg, rng) in self.targets.iter_mut().zip(&mut self.target_rngs) {
            *tg = step_target(tg, &self.map, dt, rng)?;
        }
        self.sense(t)?;
        self.emit_reports(t);
        self.deliver(t);
        if self.eff.toggles.tv {
            let detected = self.first_detect.iter().filter(|d| d.is_some()).count();
            let total = self.targets.len();
            for a in &mut self.agents {
                a.belief.apply_time_decay(t, detected, Some(total));
            }
        }
        if self.tick % self.cfg.engine.plan_every == 0 && !self.all_cleared() {
            self.plan_round(t)?;
        }
        self.move_agents(dt);
        self.record_poses();
        let period = self.cfg.engine.snapshot_period;
        if self.trace.enabled() && period > 0.0 {
            let ticks = (period / dt).round().max(1.0) as u64;
            if self.tick % ticks == 0 {
                self.snapshot(t)?;
            }
        }
        Ok(())
    }

    fn record_poses(&mut self) {
        if !self.trace.enabled() || !self.cfg.engine.record_poses {
            return;
        }
        let t = self.time();
        for a in &self.agents {
            let p = a.state.pose;
            self.trace.push(t, Event::Pose { entity: Entity::Agent, id: a.state.id, x: p.x, y: p.y, cleared: false });
        }
        for tg in &self.targets {
            let p = tg.pose;
            self.trace.push(t, Event::Pose { entity: Entity::Target, id: tg.id, x: p.x, y: p.y, cleared: tg.cleared });
        }
    }

    fn snapshot(&mut self, t: f64) -> Result<()> {
        let inputs: Vec<(&OccupancyBelief, f64)> =
            self.agents.iter().map(|a| (&a.belief, a.state.sensor.information_trace())).collect();
        let shared = fuse_occupancy(&inputs)?;
        let cells = shared
            .probabilities()
            .iter()
            .enumerate()
            .filter(|(_, p)| (**p - 0.5).abs() > 0.01)
            .map(|(i, p)| (i, *p))
            .collect();
        self.trace.push(t, Event::BeliefSnapshot { cells });
        Ok(())
    }

    fn set_mode(&mut self, ai: usize, mode: Mode, target: Option<TargetId>, t: f64) {
        let a = &mut self.agents[ai];
        if a.state.mode == mode && a.state.assigned_target == target {
            return;
        }
        a.state.mode = mode;
        a.state.assigned_target = target;
        self.trace.push(t, Event::ModeSwitch { agent: a.state.id, mode, target });
    }

    fn sense(&mut self, t: f64) -> Result<()> {
        let cfg = self.cfg.engine;
        let mut updated: Vec<(usize, TargetId)> = Vec::new();
        let mut confirmed_phantom: Vec<usize> = Vec::new();
        for ai in 0..self.agents.len() {
            let a = &mut self.agents[ai];
            let (pose, sensor, id) = (a.state.pose, a.state.sensor, a.state.id);
            let mut detections: Vec<Measurement> = Vec::new();
            for tg in &self.targets {
                if tg.cleared || !sense_detect(&sensor, &pose, tg, &self.map, &mut a.sense_rng) {
                    continue;
                }
                let visible = pose.distance(&tg.pose) <= sensor.range && line_of_sight(&self.map, &pose, &tg.pose);
                let m = if visible {
                    Some(sense_locate(&sensor, &pose, tg, t, Source::Agent(id), &mut a.sense_rng))
                } else {
                    false_positive_measurement(&sensor, &pose, &self.map, t, Source::Agent(id), &mut a.sense_rng)
                };
                let target = if visible { Some(tg.id) } else { None };
                self.trace.push(t, Event::Detection { agent: id, target, visible });
                if let Some(m) = m {
                    self.trace.push(
                        t,
                        Event::Measurement { agent: id, target, x: m.position.x, y: m.position.y, sigma2: m.covariance[(0, 0)] },
                    );
                    detections.push(m);
                }
            }
            a.belief.observe_cells(&pose, &sensor, &detections, &self.map, t, &mut self.fov, &mut self.buf);

            for tr in a.tracks.values_mut() {
                tr.updated = false;
            }
            for p in &mut a.phantoms {
                p.hit = false;
            }
            for m in &detections {
                match m.target_id {
                    Some(k) => {
                        let est = match a.tracks.get(&k) {
                            Some(tr) => kf_update(&kf_predict(&tr.est, t - tr.est.last_update, cfg.q), m)?,
                            None => TrackEstimate::from_measurement(k, m, cfg.init_scale),
                        };
                        let tr = a.tracks.entry(k).or_insert_with(|| AgentTrack {
                            est: est.clone(),
                            history: VecDeque::new(),
                            last_z: m.position,
                            updated: true,
                        });
                        tr.est = est;
                        tr.last_z = m.position;
                        tr.updated = true;
                        if self.first_detect[k as usize].is_none() {
                            self.first_detect[k as usize] = Some(t);
                        }
                        updated.push((ai, k));
                    }
                    None => {
                        match a.phantoms.iter_mut().find(|p| !p.hit && p.pos.distance(&m.position) <= cfg.fp_gate) {
                            Some(p) => {
                                p.hits += 1;
                                p.misses = 0;
                                p.pos = m.position;
                                p.hit = true;
                            }
                            None => a.phantoms.push(Phantom { pos: m.position, hits: 1, misses: 0, hit: true, confirmed: false }),
                        }
                    }
                }
            }
            a.phantoms.retain_mut(|p| {
                if !p.hit {
                    if !p.confirmed {
                        return false;
                    }
                    p.misses += 1;
                    return p.misses < cfg.fp_drop_misses;
                }
                if p.hits >= cfg.fp_confirm_ticks {
                    p.confirmed = true;
                }
                true
            });
            if a.chased_phantom().is_some() {
                confirmed_phantom.push(ai);
            }
        }

        // clearing
        for &(ai, k) in &updated {
            if self.targets[k as usize].cleared {
                continue;
            }
            let est = &self.agents[ai].tracks[&k].est;
            if is_tracked(est, cfg.trace_thre) {
                let trace = est.trace();
                self.targets[k as usize].cleared = true;
                self.clear_time[k as usize] = Some(t);
                self.trace.push(t, Event::Clear { target: k, agent: self.agents[ai].state.id, trace });
                self.hq.mark_cleared(k);
            }
        }
        for ai in 0..self.agents.len() {
            let cleared: Vec<TargetId> =
                self.agents[ai].tracks.keys().copied().filter(|k| self.targets[*k as usize].cleared).collect();
            for k in cleared {
                self.agents[ai].tracks.remove(&k);
                if self.agents[ai].state.assigned_target == Some(k) {
                    self.set_mode(ai, Mode::Search, None, t);
                    self.agents[ai].action = Action::Stay;
                }
            }
        }

        // switch to tracking on fresh detections
        for &(ai, k) in &updated {
            if self.targets[k as usize].cleared {
                continue;
            }
            let a = &self.agents[ai];
            let owned_elsewhere = a.known.owners.get(&k).is_some_and(|o| *o != a.state.id);
            let free = a.state.mode == Mode::Search || a.state.assigned_target.is_none();
            if free && !owned_elsewhere {
                self.set_mode(ai, Mode::Track, Some(k), t);
            }
        }
        for ai in confirmed_phantom {
            if self.agents[ai].state.mode == Mode::Search {
                self.set_mode(ai, Mode::Track, None, t);
            }
        }

        // track upkeep
        for ai in 0..self.agents.len() {
            let a = &mut self.agents[ai];
            let stale: Vec<TargetId> =
                a.tracks.iter().filter(|(_, tr)| t - tr.est.last_update > cfg.track_timeout).map(|(k, _)| *k).collect();
            for k in &stale {
                a.tracks.remove(k);
            }
            for tr in a.tracks.values_mut() {
                tr.history.push_back([tr.est.mean.x, tr.est.mean.y]);
                while tr.history.len() > INPUT_LEN {
                    tr.history.pop_front();
                }
            }
            let lost = match (a.state.mode, a.state.assigned_target) {
                (Mode::Track, Some(k)) => !a.tracks.contains_key(&k),
                (Mode::Track, None) => a.chased_phantom().is_none(),
                _ => false,
            };
            if lost {
                self.set_mode(ai, Mode::Search, None, t);
            }
        }
        Ok(())
    }

    fn emit_reports(&mut self, t: f64) {
        if !self.eff.toggles.tr || !self.eff.uses_hq {
            return;
        }
        for r in &mut self.reporters {
            if t + 1e-9 < r.next_report {
                continue;
            }
            r.next_report += r.reporter.report_period;
            for tg in &self.targets {
                if tg.cleared {
                    continue;
                }
                let Some(m) = emit_report(&r.reporter, tg, t, &mut r.rng) else { continue };
                self.trace.push(
                    t,
                    Event::Report { reporter: r.reporter.id, target: tg.id, x: m.position.x, y: m.position.y, sigma2: m.covariance[(0, 0)] },
                );
                let ok = self.bus.deliver(Channel::ReporterToHq, r.reporter.id, self.tick, Message::Report(m), &mut self.bus_rng);
                self.trace.push(
                    t,
                    Event::Message { channel: Channel::ReporterToHq, from: r.reporter.id, msg: "report".into(), dropped: !ok },
                );
            }
        }
    }

    fn deliver(&mut self, t: f64) {
        for env in self.bus.take_ready(self.tick) {
            match env.msg {
                Message::Assign { agent_id, assignment } => self.apply_assignment(agent_id as usize, assignment, t),
                other => self.hq.ingest(other),
            }
        }
    }

    fn apply_assignment(&mut self, ai: usize, assignment: Option<Assignment>, t: f64) {
        let round = self.tick;
        match assignment {
            Some(asg) => {
                match asg.task {
                    Task::Target { target_id } => self.set_mode(ai, Mode::Track, Some(target_id), t),
                    Task::Frontier { .. } => self.set_mode(ai, Mode::Search, None, t),
                }
                let a = &mut self.agents[ai];
                a.task = Some(asg.task);
                a.action = Action::Goto { goal: asg.terminal() };
                a.assigned_round = Some(round);
            }
            None => {
                let a = &self.agents[ai];
                if a.state.mode == Mode::Track && a.state.assigned_target.is_some() {
                    self.set_mode(ai, Mode::Search, None, t);
                }
                let a = &mut self.agents[ai];
                a.task = None;
                a.released_round = Some(round);
            }
        }
    }

    fn exploit_targets(&self, reports: &[ReportEstimate], t: f64) -> Vec<ExploitTarget> {
        let q = self.cfg.engine.q;
        reports
            .iter()
            .filter(|r| !self.targets[r.target_id as usize].cleared)
            .map(|r| {
                let cov = r.covariance + Matrix2::identity() * (q * (t - r.time).max(0.0));
                ExploitTarget::stationary(Pose::new(r.mean.x, r.mean.y), cov, q)
            })
            .collect()
    }

    fn predicted(&self, tr: &AgentTrack) -> Vec<Point> {
        let hist: Vec<Point> = tr.history.iter().copied().collect();
        if hist.is_empty() {
            return vec![[tr.est.mean.x, tr.est.mean.y]];
        }
        self.predictor.predict(&hist)
    }

    fn track_decision(&mut self, ai: usize, k: TargetId, shared: &SharedOccupancyBelief, weights: &UtilityWeights) -> Option<Decision> {
        let a = &self.agents[ai];
        let tr = a.tracks.get(&k)?;
        let predicted = self.predicted(tr);
        let q = self.cfg.engine.q;
        let t = self.time();
        let cov = tr.est.covariance + Matrix2::identity() * (q * (t - tr.est.last_update).max(0.0));
        let ctx = TrackContext {
            map: &self.map,
            belief: shared,
            target_id: k,
            mean: Pose::new(tr.est.mean.x, tr.est.mean.y),
            covariance: cov,
            predicted: &predicted,
            q,
            planner: &self.cfg.planner,
        };
        let mut gain = std::mem::take(&mut self.gain);
        let d = plan_track(&a.state, &ctx, weights, &mut gain);
        self.gain = gain;
        Some(d)
    }

    fn status(&mut self, ai: usize, t: f64) -> AgentStatus {
        let own = SharedOccupancyBelief::from_single(&self.agents[ai].belief);
        let weights = self.eff.weights;
        let keys: Vec<TargetId> = self.agents[ai]
            .tracks
            .iter()
            .filter(|(_, tr)| t - tr.est.last_update <= self.plan_period() + 1e-9)
            .map(|(k, _)| *k)
            .collect();
        let mut bids = Vec::new();
        for k in keys {
            if let Some(d) = self.track_decision(ai, k, &own, &weights) {
                let Some(tau) = d.trajectory else { continue };
                let utility = tau.j_exploit;
                bids.push(Bid { agent_id: self.agents[ai].state.id, task: Task::Target { target_id: k }, trajectory: tau, utility });
            }
        }
        let a = &self.agents[ai];
        let tracks = a
            .tracks
            .values()
            .map(|tr| {
                let mean = Pose::new(tr.est.mean.x, tr.est.mean.y);
                let distance = a.state.pose.distance(&mean);
                TrackSummary {
                    target_id: tr.est.target_id,
                    mean,
                    covariance: tr.est.covariance,
                    last_update: tr.est.last_update,
                    distance,
                    meas_cov: a.state.sensor.covariance_at(distance.min(a.state.sensor.range)),
                    monitoring_time: tr.est.monitoring_time,
                }
            })
            .collect();
        AgentStatus {
            agent: a.state.clone(),
            belief: a.belief.clone(),
            trust: a.state.sensor.information_trace(),
            tracks,
            bids,
            sent_at: t,
        }
    }

    fn plan_period(&self) -> f64 {
        self.cfg.engine.plan_every as f64 * self.cfg.engine.dt
    }

    fn plan_round(&mut self, t: f64) -> Result<()> {
        if self.eff.uses_hq {
            self.hq_round(t)?;
        }
        match self.cfg.policy {
            PolicyKind::Swarm => self.swarm_round(t),
            _ => {
                for ai in 0..self.agents.len() {
                    if self.agents[ai].assigned_round == Some(self.tick) {
                        self.follow_assignment(ai, t);
                    } else {
                        self.independent(ai, t)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn hq_round(&mut self, t: f64) -> Result<()> {
        for ai in 0..self.agents.len() {
            let status = self.status(ai, t);
            let id = status.agent.id;
            let ok = self.bus.deliver(Channel::AgentToHq, id, self.tick, Message::Status(Box::new(status)), &mut self.bus_rng);
            self.trace.push(t, Event::Message { channel: Channel::AgentToHq, from: id, msg: "status".into(), dropped: !ok });
        }
        self.deliver(t);

        let investigate = 0.5;
        let poses: Vec<(Pose, f64, f64)> =
            self.hq.statuses.values().map(|s| (s.agent.pose, s.agent.sensor.range, s.sent_at)).collect();
        let map = &self.map;
        self.hq.reports.retain(|_, r| {
            let mean = Pose::new(r.mean.x, r.mean.y);
            !poses.iter().any(|(p, range, sent)| {
                *sent >= r.time && p.distance(&mean) <= investigate * range && line_of_sight(map, p, &mean)
            })
        });
        self.hq.fuse()?;
        let (w, h) = (self.map.width(), self.map.height());
        let shared = self.hq.shared.clone().unwrap_or_else(|| SharedOccupancyBelief::uniform(w, h));
        let frontier_goals: Vec<Pose> =
            extract_frontiers(&shared, &self.map, self.cfg.planner.frontier_band, self.cfg.planner.max_cluster_cells)
                .into_iter()
                .map(|f| f.centroid)
                .collect();
        let reports = if self.eff.toggles.tr { self.hq.report_list() } else { Vec::new() };
        let report_goals: Vec<Pose> = reports.iter().map(|r| Pose::new(r.mean.x, r.mean.y)).collect();
        let exploit = self.exploit_targets(&reports, t);

        let tracking = hq_assign_tracking(&mut self.hq, t);
        let reserved: Vec<Pose> = tracking.iter().map(|a| a.terminal()).collect();
        let weights = self.eff.weights;
        let ctx = SearchContext {
            map: &self.map,
            belief: &shared,
            frontier_goals: &frontier_goals,
            report_goals: &report_goals,
            exploit: &exploit,
            planner: &self.cfg.planner,
        };
        let search = hq_assign_search(&mut self.hq, &ctx, &weights, &reserved, t, &mut self.gain);

        let mut by_agent: BTreeMap<AgentId, Assignment> = BTreeMap::new();
        for a in tracking.iter().chain(&search) {
            by_agent.insert(a.agent_id, a.clone());
        }
        let knowledge = Knowledge {
            reports,
            terminals: by_agent.values().map(|a| (a.agent_id, a.terminal())).collect(),
            owners: tracking
                .iter()
                .filter_map(|a| match a.task {
                    Task::Target { target_id } => Some((target_id, a.agent_id)),
                    Task::Frontier { .. } => None,
                })
                .collect(),
        };
        let fresh: Vec<AgentId> = self.hq.fresh.iter().copied().collect();
        for id in fresh {
            let assignment = by_agent.remove(&id);
            let action = assignment.as_ref().map(|a| Action::Goto { goal: a.terminal() }).unwrap_or(Action::Stay);
            self.trace.push(t, Event::Assignment { agent: id, task: assignment.as_ref().map(|a| a.task), action });
            let ok = self.bus.deliver(Channel::HqToAgent, HQ_ID, self.tick, Message::Assign { agent_id: id, assignment }, &mut self.bus_rng);
            self.trace.push(t, Event::Message { channel: Channel::HqToAgent, from: HQ_ID, msg: "assign".into(), dropped: !ok });
        }
        for a in &mut self.agents {
            a.known = knowledge.clone();
        }
        self.hq.end_round();
        self.deliver(t);
        Ok(())
    }

    fn follow_assignment(&mut self, ai: usize, t: f64) {
        // tracking agents steer by their own estimate when they hold one
        if let (Mode::Track, Some(k)) = (self.agents[ai].state.mode, self.agents[ai].state.assigned_target) {
            let own = SharedOccupancyBelief::from_single(&self.agents[ai].belief);
            let weights = self.eff.weights;
            if let Some(d) = self.track_decision(ai, k, &own, &weights) {
                self.agents[ai].action = d.action;
            }
        }
        self.note_idle(ai, true, t);
    }

    fn note_idle(&mut self, ai: usize, frontiers_exist: bool, _t: f64) {
        let a = &mut self.agents[ai];
        if a.action == Action::Stay && a.state.mode == Mode::Search && frontiers_exist {
            a.idle_rounds += 1;
            a.max_idle = a.max_idle.max(a.idle_rounds);
        } else {
            a.idle_rounds = 0;
        }
    }

    fn independent(&mut self, ai: usize, t: f64) -> Result<()> {
        let own = SharedOccupancyBelief::from_single(&self.agents[ai].belief);
        let frontier_goals: Vec<Pose> =
            extract_frontiers(&own, &self.map, self.cfg.planner.frontier_band, self.cfg.planner.max_cluster_cells)
                .into_iter()
                .map(|f| f.centroid)
                .collect();
        let frontiers_exist = !frontier_goals.is_empty();
        let weights = self.eff.weights;
        let mode = self.agents[ai].state.mode;
        let assigned = self.agents[ai].state.assigned_target;

        if let (Mode::Track, None) = (mode, assigned) {
            if let Some(p) = self.agents[ai].chased_phantom() {
                self.agents[ai].action = Action::Goto { goal: p };
                self.note_idle(ai, frontiers_exist, t);
                return Ok(());
            }
        }

        let action = match self.cfg.policy {
            PolicyKind::RandomWalk => {
                let tol = 0.5 * self.map.resolution();
                let a = &mut self.agents[ai];
                let last_known = assigned.and_then(|k| a.tracks.get(&k)).map(|tr| tr.last_z);
                let act = random_walk_step(&a.state, &frontier_goals, last_known, a.rw_goal, tol, &mut a.policy_rng);
                if last_known.is_none() {
                    a.rw_goal = match act {
                        Action::Goto { goal } => Some(goal),
                        Action::Stay => None,
                    };
                }
                act
            }
            PolicyKind::Exhaustive => match (mode, assigned.and_then(|k| self.agents[ai].tracks.get(&k))) {
                (Mode::Track, Some(tr)) => {
                    let p = *self.predicted(tr).last().unwrap();
                    self.reachable_goal(Pose::new(p[0], p[1]))
                }
                _ => {
                    let a = &self.agents[ai];
                    a.sweep.get(a.sweep_cursor).map(|g| Action::Goto { goal: *g }).unwrap_or(Action::Stay)
                }
            },
            _ => {
                let a = &self.agents[ai];
                let reports = if self.eff.toggles.tr { a.known.reports.clone() } else { Vec::new() };
                let report_goals: Vec<Pose> = reports.iter().map(|r| Pose::new(r.mean.x, r.mean.y)).collect();
                let exploit = self.exploit_targets(&reports, t);
                let teammates: Vec<Pose> =
                    a.known.terminals.iter().filter(|(id, _)| *id != a.state.id).map(|(_, p)| *p).collect();
                if let (Mode::Track, Some(k)) = (mode, assigned) {
                    if let Some(d) = self.track_decision(ai, k, &own, &weights) {
                        self.agents[ai].action = d.action;
                        self.note_idle(ai, frontiers_exist, t);
                        return Ok(());
                    }
                }
                let ctx = SearchContext {
                    map: &self.map,
                    belief: &own,
                    frontier_goals: &frontier_goals,
                    report_goals: &report_goals,
                    exploit: &exploit,
                    planner: &self.cfg.planner,
                };
                let mut state = self.agents[ai].state.clone();
                state.mode = Mode::Search;
                let d = agent_independent_step(&state, &ctx, None, &weights, &teammates, &mut self.gain);
                d.action
            }
        };
        self.agents[ai].action = action;
        self.note_idle(ai, frontiers_exist, t);
        Ok(())
    }

    fn reachable_goal(&self, p: Pose) -> Action {
        if self.map.is_free(&p) {
            return Action::Goto { goal: p };
        }
        match self.map.nearest_free(&p) {
            Some(c) => Action::Goto { goal: self.map.center(c) },
            None => Action::Stay,
        }
    }

    fn swarm_round(&mut self, t: f64) {
        let seen = self
            .agents
            .iter()
            .find_map(|a| match (a.state.mode, a.state.assigned_target) {
                (Mode::Track, Some(k)) => a.tracks.get(&k).map(|tr| Pose::new(tr.est.mean.x, tr.est.mean.y)),
                (Mode::Track, None) => a.chased_phantom(),
                _ => None,
            });
        let states: Vec<AgentState> = self.agents.iter().map(|a| a.state.clone()).collect();
        let vel = swarm_step(&states, seen, &self.map, t, &self.cfg.swarm);
        let horizon = self.plan_period();
        for (ai, (vx, vy)) in vel.into_iter().enumerate() {
            let p = self.agents[ai].state.pose;
            let goal = Pose::new(p.x + vx * horizon, p.y + vy * horizon);
            let action = if vx.hypot(vy) < 1e-9 { Action::Stay } else { self.reachable_goal(goal) };
            self.agents[ai].action = action;
            self.note_idle(ai, false, t);
        }
    }

    fn move_agents(&mut self, dt: f64) {
        let exhaustive = self.cfg.policy == PolicyKind::Exhaustive;
        for a in &mut self.agents {
            let Action::Goto { goal } = a.action else { continue };
            match a.nav.step(&self.map, &mut a.state.pose, &goal, a.state.max_speed, dt) {
                Ok(d) => a.state.traveled += d,
                Err(_) => {
                    a.action = Action::Stay;
                    a.rw_goal = None;
                    if exhaustive && !a.sweep.is_empty() {
                        a.sweep_cursor = (a.sweep_cursor + 1) % a.sweep.len();
                    }
                    continue;
                }
            }
            if a.state.pose.distance(&goal) < 1e-9 {
                if exhaustive && a.state.mode == Mode::Search && !a.sweep.is_empty() {
                    a.sweep_cursor = (a.sweep_cursor + 1) % a.sweep.len();
                    a.action = Action::Goto { goal: a.sweep[a.sweep_cursor] };
                } else if a.rw_goal.is_some_and(|g| g.distance(&goal) < 1e-9) {
                    a.rw_goal = None;
                }
            }
        }
    }
}

/// Runs one episode to completion.
pub fn run_episode(cfg: &ScenarioConfig) -> Result<EpisodeOutput> {
    Engine::new(cfg, true)?.run()
}

/// Runs one episode without recording a trace.
pub fn run_episode_quiet(cfg: &ScenarioConfig) -> Result<RunMetrics> {
    Ok(Engine::new(cfg, false)?.run()?.metrics)
}
