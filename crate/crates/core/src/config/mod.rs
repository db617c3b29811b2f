//! Default parameters, heterogeneous sensor sampling and scenario files.

use std::collections::BTreeSet;
use std::path::{Path as FsPath, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use crate::baselines::{PolicyKind, SwarmConfig};
use crate::entities::{load_playback, AgentState, Motion, Reporter, SensorModel, TargetState};
use crate::error::{Error, Result};
use crate::planning::{PlannerConfig, UtilityWeights};
use crate::rng::{stream, SimRng, StreamKind};
use crate::world::{load_map, GridMap, Pose};

/// Parameter table of the experiments.
pub mod defaults {
    /// Target speed, m/s.
    pub const TARGET_SPEED: f64 = 0.2;
    /// Agent speed, m/s.
    pub const AGENT_SPEED: f64 = 0.4;
    pub const RANGE: (f64, f64) = (5.0, 8.0);
    pub const ALPHA: (f64, f64) = (0.08, 0.2);
    pub const BETA: f64 = 0.0;
    pub const SIGMA_OBS: (f64, f64) = (0.7, 1.3);
    pub const SIGMA_REPORT: (f64, f64) = (0.5, 1.0);
    pub const REPORT_PERIOD: (f64, f64) = (15.0, 20.0);
    pub const DECAY_RATE: f64 = 1.0 / 90.0;
    pub const W_SEARCH: f64 = 0.3;
    pub const W_TRACK: f64 = 0.2;
    pub const D_THRE: f64 = 3.5;
    /// Covariance trace at which a target counts as tracked, m².
    pub const TRACE_THRE: f64 = 2.0;
    pub const TIME_CAP: f64 = 300.0;
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws `n` sensors with range, false-negative rate and noise endpoints
/// uniform over the default ranges.
pub fn heterogeneous_sample(rng: &mut impl Rng, n: usize, beta: f64) -> Result<Vec<SensorModel>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sensor".into()));
    }
    (0..n)
        .map(|_| {
            let range = uniform(rng, defaults::RANGE);
            let alpha = uniform(rng, defaults::ALPHA);
            let a = uniform(rng, defaults::SIGMA_OBS);
            let b = uniform(rng, defaults::SIGMA_OBS);
            SensorModel::new(range, alpha, beta, a.min(b), a.max(b))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSource {
    /// Map file in the ASCII format, relative to the scenario file.
    Path(PathBuf),
    Open { width: usize, height: usize, resolution: f64 },
    Inline { ascii: String },
}

impl Default for MapSource {
    fn default() -> Self {
        MapSource::Open { width: 50, height: 50, resolution: 1.0 }
    }
}

/// Either a count of default-configured entities or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Roster<T> {
    Count(usize),
    List(Vec<T>),
}

impl<T: Default + Clone> Roster<T> {
    pub fn specs(&self) -> Vec<T> {
        match self {
            Roster::Count(n) => vec![T::default(); *n],
            Roster::List(v) => v.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Roster::Count(n) => *n,
            Roster::List(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentSpec {
    pub pose: Option<Pose>,
    pub max_speed: Option<f64>,
    /// Sampled from the default ranges when absent.
    pub sensor: Option<SensorModel>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetSpec {
    pub pose: Option<Pose>,
    pub max_speed: Option<f64>,
    /// Recorded trajectory replacing random-waypoint motion.
    pub playback: Option<PathBuf>,
    pub looped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReporterSpec {
    pub sigma_report: Option<f64>,
    pub report_period: Option<f64>,
    /// Every target when absent.
    pub observed_targets: Option<BTreeSet<u32>>,
}

/// Ablation switches: time-varying belief, third-party reports, learned
/// prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Toggles {
    pub tr: bool,
    pub tv: bool,
    pub lstm: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self { tr: true, tv: true, lstm: true }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Failures {
    /// Agent to HQ message loss.
    pub p_cf: f64,
    /// Reporter to HQ message loss.
    pub p_ef: f64,
    /// Perception false-positive rate.
    pub p_fp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub dt: f64,
    /// Sensor ticks per planning round.
    pub plan_every: u64,
    pub decay_rate: f64,
    pub trace_thre: f64,
    /// Tracking assignment hysteresis, seconds.
    pub hold_time: f64,
    /// A track without measurements for this long is dropped, seconds.
    pub track_timeout: f64,
    /// New tracks start with this multiple of the measurement covariance.
    pub init_scale: f64,
    /// Track process noise, m²/s.
    pub q: f64,
    /// Consecutive ticks with nearby unassociated detections needed to
    /// confirm a spurious track.
    pub fp_confirm_ticks: u32,
    pub fp_gate: f64,
    pub fp_drop_misses: u32,
    pub latency_ticks: u64,
    /// Seconds between belief snapshots in the trace; 0 disables them.
    pub snapshot_period: f64,
    /// Minimum spacing of sampled initial positions, cells.
    pub min_spacing_cells: f64,
    pub record_poses: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            dt: 0.2,
            plan_every: 5,
            decay_rate: defaults::DECAY_RATE,
            trace_thre: defaults::TRACE_THRE,
            hold_time: 5.0,
            track_timeout: 5.0,
            init_scale: 4.0,
            q: defaults::TARGET_SPEED * defaults::TARGET_SPEED,
            fp_confirm_ticks: 2,
            fp_gate: 1.5,
            fp_drop_misses: 3,
            latency_ticks: 0,
            snapshot_period: 10.0,
            min_spacing_cells: 2.0,
            record_poses: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub name: String,
    pub map: MapSource,
    pub agents: Roster<AgentSpec>,
    pub targets: Roster<TargetSpec>,
    /// One reporter observing every target when absent.
    pub reporters: Option<Vec<ReporterSpec>>,
    pub policy: PolicyKind,
    pub weights: UtilityWeights,
    pub toggles: Toggles,
    pub failures: Failures,
    /// Seconds; 0 means unlimited.
    pub time_cap: f64,
    pub seed: u64,
    pub engine: EngineConfig,
    pub planner: PlannerConfig,
    pub swarm: SwarmConfig,
    /// Predictor weights file; the bundled weights when absent.
    pub predictor: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "open".into(),
            map: MapSource::default(),
            agents: Roster::Count(4),
            targets: Roster::Count(5),
            reporters: None,
            policy: PolicyKind::Hybrid,
            weights: UtilityWeights::default(),
            toggles: Toggles::default(),
            failures: Failures::default(),
            time_cap: defaults::TIME_CAP,
            seed: 0,
            engine: EngineConfig::default(),
            planner: PlannerConfig::default(),
            swarm: SwarmConfig::default(),
            predictor: None,
        }
    }
}

/// Settings after applying the policy's overrides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Effective {
    pub toggles: Toggles,
    pub weights: UtilityWeights,
    pub uses_hq: bool,
}

/// Everything needed to start an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub map: GridMap,
    pub agents: Vec<AgentState>,
    pub targets: Vec<TargetState>,
    pub reporters: Vec<Reporter>,
}

fn prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {p}")))
    }
}

impl ScenarioConfig {
    /// Reads a scenario file; relative paths inside are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: ScenarioConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(FsPath::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &FsPath) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let MapSource::Path(p) = &mut self.map {
            fix(p);
        }
        if let Some(p) = &mut self.predictor {
            fix(p);
        }
        if let Roster::List(ts) = &mut self.targets {
            for t in ts {
                if let Some(p) = &mut t.playback {
                    fix(p);
                }
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::InvalidConfig("at least one agent is required".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::InvalidConfig("at least one target is required".into()));
        }
        prob("p_cf", self.failures.p_cf)?;
        prob("p_ef", self.failures.p_ef)?;
        prob("p_fp", self.failures.p_fp)?;
        if !(self.time_cap >= 0.0) {
            return Err(Error::InvalidConfig("time_cap must be >= 0".into()));
        }
        let e = &self.engine;
        if !(e.dt > 0.0) || e.plan_every == 0 {
            return Err(Error::InvalidConfig("dt and plan_every must be positive".into()));
        }
        if !(e.decay_rate >= 0.0) || !(e.trace_thre > 0.0) || !(e.q >= 0.0) || !(e.init_scale > 0.0) {
            return Err(Error::InvalidConfig("engine rates must be non-negative".into()));
        }
        let w = &self.weights;
        if !(0.0..=1.0).contains(&w.w_search) || !(0.0..=1.0).contains(&w.w_track) || !(w.d_thre >= 0.0) {
            return Err(Error::InvalidConfig("utility weights must lie in [0, 1]".into()));
        }
        let min_agent = self
            .agents
            .specs()
            .iter()
            .map(|a| a.max_speed.unwrap_or(defaults::AGENT_SPEED))
            .fold(f64::INFINITY, f64::min);
        let max_target = self
            .targets
            .specs()
            .iter()
            .map(|t| t.max_speed.unwrap_or(defaults::TARGET_SPEED))
            .fold(0.0, f64::max);
        if !(min_agent > 0.0) {
            return Err(Error::InvalidConfig("agent speeds must be positive".into()));
        }
        if max_target >= min_agent {
            return Err(Error::InvalidConfig(format!(
                "every target must be slower than every agent (target {max_target} m/s, agent {min_agent} m/s)"
            )));
        }
        for a in self.agents.specs() {
            if let Some(s) = a.sensor {
                s.validate()?;
            }
        }
        for r in self.reporters.iter().flatten() {
            if r.sigma_report.is_some_and(|s| !(s > 0.0)) || r.report_period.is_some_and(|p| !(p > 0.0)) {
                return Err(Error::InvalidConfig("reporter sigma and period must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn effective(&self) -> Effective {
        let mut toggles = self.toggles;
        let mut weights = self.weights;
        match self.policy {
            PolicyKind::Hybrid => {}
            PolicyKind::CentralKf => {
                toggles = Toggles { tr: false, tv: false, lstm: false };
                weights.w_search = 1.0;
            }
            PolicyKind::Independent => {
                toggles.tr = false;
                toggles.lstm = false;
            }
            PolicyKind::RandomWalk | PolicyKind::Exhaustive | PolicyKind::Swarm => {
                toggles.tr = false;
                toggles.lstm = false;
            }
        }
        Effective { toggles, weights, uses_hq: self.policy.uses_hq() }
    }

    pub fn load_map(&self) -> Result<GridMap> {
        match &self.map {
            MapSource::Path(p) => load_map(p),
            MapSource::Open { width, height, resolution } => GridMap::open(*width, *height, *resolution),
            MapSource::Inline { ascii } => GridMap::parse(ascii),
        }
    }

    /// Builds the initial world. Unspecified sensors, positions and
    /// reporter parameters are drawn from the setup stream of `seed`.
    pub fn build(&self) -> Result<Scenario> {
        self.validate()?;
        let map = self.load_map()?;
        if self.policy == PolicyKind::Swarm && map.has_obstacles() {
            return Err(Error::InvalidConfig("the swarm policy requires an obstacle-free map".into()));
        }
        let mut rng = stream(self.seed, StreamKind::Setup, 0);
        let agent_specs = self.agents.specs();
        let target_specs = self.targets.specs();
        let beta = self.failures.p_fp;

        let sampled = heterogeneous_sample(&mut rng, agent_specs.len(), beta)?;
        let sensors: Vec<SensorModel> = agent_specs
            .iter()
            .zip(sampled)
            .map(|(a, s)| a.sensor.map(|x| SensorModel { beta: beta.max(x.beta), ..x }).unwrap_or(s))
            .collect();

        let mut placed: Vec<Pose> = Vec::new();
        for a in &agent_specs {
            if let Some(p) = a.pose {
                placed.push(p);
            }
        }
        let mut playbacks = Vec::with_capacity(target_specs.len());
        for t in &target_specs {
            let pb = t.playback.as_ref().map(load_playback).transpose()?;
            if let Some(p) = t.pose.or_else(|| pb.as_ref().map(|s| Pose::new(s[0].x, s[0].y))) {
                placed.push(p);
            }
            playbacks.push(pb);
        }
        for p in &placed {
            if !map.is_free(p) {
                return Err(Error::InvalidConfig(format!("initial position {p} is not free")));
            }
        }
        let spacing = self.engine.min_spacing_cells * map.resolution();
        let draw = |rng: &mut SimRng, placed: &mut Vec<Pose>| {
            let p = sample_spaced(&map, placed, spacing, rng);
            placed.push(p);
            p
        };

        let mut agents = Vec::with_capacity(agent_specs.len());
        for (i, (a, s)) in agent_specs.iter().zip(sensors).enumerate() {
            let pose = match a.pose {
                Some(p) => p,
                None => draw(&mut rng, &mut placed),
            };
            agents.push(AgentState::new(i as u32, pose, a.max_speed.unwrap_or(defaults::AGENT_SPEED), s));
        }
        let mut targets = Vec::with_capacity(target_specs.len());
        for (i, (t, pb)) in target_specs.iter().zip(playbacks).enumerate() {
            let (pose, motion) = match pb {
                Some(samples) => {
                    let p = t.pose.unwrap_or(Pose::new(samples[0].x, samples[0].y));
                    let cursor = samples[0].t;
                    (p, Motion::TracePlayback { samples, cursor, looped: t.looped })
                }
                None => {
                    let p = match t.pose {
                        Some(p) => p,
                        None => draw(&mut rng, &mut placed),
                    };
                    (p, Motion::RandomWaypoint { goal: p, route: Vec::new() })
                }
            };
            targets.push(TargetState {
                id: i as u32,
                pose,
                max_speed: t.max_speed.unwrap_or(defaults::TARGET_SPEED),
                motion,
                cleared: false,
            });
        }

        let all: BTreeSet<u32> = targets.iter().map(|t| t.id).collect();
        let specs = self.reporters.clone().unwrap_or_else(|| vec![ReporterSpec::default()]);
        let mut reporters = Vec::with_capacity(specs.len());
        for (i, r) in specs.iter().enumerate() {
            let sigma = uniform(&mut rng, defaults::SIGMA_REPORT);
            let period = uniform(&mut rng, defaults::REPORT_PERIOD);
            let rep = Reporter {
                id: i as u32,
                sigma_report: r.sigma_report.unwrap_or(sigma),
                report_period: r.report_period.unwrap_or(period),
                observed_targets: r.observed_targets.clone().unwrap_or_else(|| all.clone()),
            };
            rep.validate()?;
            reporters.push(rep);
        }
        Ok(Scenario { map, agents, targets, reporters })
    }
}

/// A free position at least `spacing` from every pose in `placed`; the
/// spacing is halved after repeated failures.
fn sample_spaced(map: &GridMap, placed: &[Pose], mut spacing: f64, rng: &mut impl Rng) -> Pose {
    loop {
        for _ in 0..256 {
            let p = crate::entities::sample_free_pose(map, rng);
            if placed.iter().all(|q| q.distance(&p) >= spacing) {
                return p;
            }
        }
        spacing *= 0.5;
    }
}
