//! Comparison policies: random frontier walk, independent agents, central
//! information gain without time decay, Voronoi boustrophedon coverage and
//! a self-organizing swarm.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coordination::Action;
use crate::entities::AgentState;
use crate::error::{Error, Result};
use crate::world::{line_of_sight, plan_path, Cell, GridMap, Path, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    #[default]
    Hybrid,
    #[serde(rename = "random")]
    RandomWalk,
    Independent,
    CentralKf,
    Exhaustive,
    Swarm,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Hybrid,
        PolicyKind::RandomWalk,
        PolicyKind::Independent,
        PolicyKind::CentralKf,
        PolicyKind::Exhaustive,
        PolicyKind::Swarm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Hybrid => "hybrid",
            PolicyKind::RandomWalk => "random",
            PolicyKind::Independent => "independent",
            PolicyKind::CentralKf => "central-kf",
            PolicyKind::Exhaustive => "exhaustive",
            PolicyKind::Swarm => "swarm",
        }
    }

    /// Whether the policy talks to HQ over the message bus.
    pub fn uses_hq(self) -> bool {
        matches!(self, PolicyKind::Hybrid | PolicyKind::CentralKf)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown policy {s:?}")))
    }
}

/// Random frontier walk. Tracking heads to the last known target position;
/// searching keeps `current` until reached, then draws a frontier uniformly.
pub fn random_walk_step(
    agent: &AgentState,
    frontiers: &[Pose],
    last_known: Option<Pose>,
    current: Option<Pose>,
    reach_tol: f64,
    rng: &mut impl Rng,
) -> Action {
    if let Some(p) = last_known {
        return Action::Goto { goal: p };
    }
    if let Some(g) = current.filter(|g| g.distance(&agent.pose) > reach_tol) {
        return Action::Goto { goal: g };
    }
    if frontiers.is_empty() {
        return Action::Stay;
    }
    Action::Goto { goal: frontiers[rng.random_range(0..frontiers.len())] }
}

/// Free cells grouped by nearest start position (Euclidean, ties to the
/// lowest agent index).
pub fn voronoi_partition(map: &GridMap, starts: &[Pose]) -> Result<Vec<Vec<usize>>> {
    if starts.is_empty() {
        return Err(Error::InvalidArgument("voronoi partition needs at least one start".into()));
    }
    let mut regions = vec![Vec::new(); starts.len()];
    for idx in map.free_indices() {
        let c = map.center(map.cell_at(idx));
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, s) in starts.iter().enumerate() {
            let d = c.distance(s);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        regions[best].push(idx);
    }
    Ok(regions)
}

/// Row spacing of coverage lanes for a sensor of the given range.
pub fn lane_spacing(map: &GridMap, range: f64) -> usize {
    ((range / map.resolution()).floor() as usize).max(1)
}

/// Serpentine sweep over `region` (cell indices). Lanes run along rows
/// `spacing` apart; every region cell on a lane is a waypoint. Consecutive
/// waypoints without line of sight are joined by planned connectors.
pub fn boustrophedon_path(map: &GridMap, region: &[usize], spacing: usize) -> Result<Path> {
    if region.is_empty() {
        return Err(Error::InvalidArgument("empty coverage region".into()));
    }
    let spacing = spacing.max(1);
    let mut rows: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in region {
        let c = map.cell_at(i);
        rows.entry(c.row).or_default().push(c.col);
    }
    let (r0, r1) = (*rows.keys().next().unwrap(), *rows.keys().next_back().unwrap());
    let mut lanes: Vec<usize> = (r0..=r1).filter(|r| (r - r0) % spacing == spacing / 2).collect();
    if lanes.is_empty() {
        lanes.push(r0 + (r1 - r0) / 2);
    }
    let mut order = Vec::new();
    let mut k = 0;
    for lane in lanes {
        // fall back to the nearest populated row when the lane row is empty
        let row = (0..spacing)
            .flat_map(|d| [lane.checked_sub(d), Some(lane + d)])
            .flatten()
            .find(|r| rows.contains_key(r));
        let Some(row) = row else { continue };
        let mut cols = rows[&row].clone();
        cols.sort_unstable();
        if k % 2 == 1 {
            cols.reverse();
        }
        k += 1;
        order.extend(cols.into_iter().map(|c| map.center(Cell::new(row, c))));
    }
    let mut waypoints: Vec<Pose> = Vec::with_capacity(order.len());
    let mut length = 0.0;
    for p in order {
        if let Some(&last) = waypoints.last() {
            if line_of_sight(map, &last, &p) {
                length += last.distance(&p);
            } else {
                let conn = plan_path(map, &last, &p)?;
                length += conn.length;
                waypoints.extend(conn.waypoints.into_iter().skip(1).filter(|q| q.distance(&p) > 1e-9));
            }
        }
        waypoints.push(p);
    }
    Ok(Path { waypoints, length })
}

/// Force gains of the swarm baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmConfig {
    pub k_separation: f64,
    pub k_cohesion: f64,
    pub k_drift: f64,
    pub k_attraction: f64,
    /// Neighbor distance below which separation acts, meters.
    pub d_sep: f64,
    /// Angular frequencies of the patrol curve, rad/s.
    pub omega: (f64, f64),
    /// Patrol curve amplitude as a fraction of the map extent.
    pub amplitude: f64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            k_separation: 1.0,
            k_cohesion: 1.0,
            k_drift: 1.0,
            k_attraction: 4.0,
            d_sep: 3.5,
            omega: (0.011, 0.017),
            amplitude: 0.4,
        }
    }
}

fn unit(dx: f64, dy: f64) -> (f64, f64) {
    let n = dx.hypot(dy);
    if n > 1e-12 {
        (dx / n, dy / n)
    } else {
        (0.0, 0.0)
    }
}

/// Patrol point at time `t`.
pub fn patrol_point(map: &GridMap, cfg: &SwarmConfig, t: f64) -> Pose {
    let (w, h) = map.extent();
    Pose::new(
        0.5 * w + cfg.amplitude * w * (cfg.omega.0 * t).sin(),
        0.5 * h + cfg.amplitude * h * (cfg.omega.1 * t + std::f64::consts::FRAC_PI_2).sin(),
    )
}

/// Swarm velocities: separation from close neighbors, cohesion toward the
/// centroid, a shared drift along the patrol curve and attraction toward a
/// seen target. Speeds are clipped to each agent's maximum.
pub fn swarm_step(agents: &[AgentState], target_seen: Option<Pose>, map: &GridMap, t: f64, cfg: &SwarmConfig) -> Vec<(f64, f64)> {
    if agents.is_empty() {
        return Vec::new();
    }
    let n = agents.len() as f64;
    let cx = agents.iter().map(|a| a.pose.x).sum::<f64>() / n;
    let cy = agents.iter().map(|a| a.pose.y).sum::<f64>() / n;
    let patrol = patrol_point(map, cfg, t);
    let drift = unit(patrol.x - cx, patrol.y - cy);
    agents
        .iter()
        .map(|a| {
            let (mut fx, mut fy) = (0.0, 0.0);
            for b in agents {
                if b.id == a.id {
                    continue;
                }
                let d = a.pose.distance(&b.pose);
                if d < cfg.d_sep {
                    let (ux, uy) = unit(a.pose.x - b.pose.x, a.pose.y - b.pose.y);
                    let s = cfg.k_separation * (cfg.d_sep - d) / cfg.d_sep;
                    fx += s * ux;
                    fy += s * uy;
                }
            }
            let (dx, dy) = (cx - a.pose.x, cy - a.pose.y);
            let c = cfg.k_cohesion / dx.hypot(dy).max(cfg.d_sep);
            fx += c * dx;
            fy += c * dy;
            fx += cfg.k_drift * drift.0;
            fy += cfg.k_drift * drift.1;
            if let Some(p) = target_seen {
                let (ux, uy) = unit(p.x - a.pose.x, p.y - a.pose.y);
                fx += cfg.k_attraction * ux;
                fy += cfg.k_attraction * uy;
            }
            let (vx, vy) = (fx * a.max_speed, fy * a.max_speed);
            let speed = vx.hypot(vy);
            if speed > a.max_speed {
                (vx * a.max_speed / speed, vy * a.max_speed / speed)
            } else {
                (vx, vy)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entities::SensorModel;
    use crate::rng::{stream, StreamKind};

    fn agent(id: u32, x: f64, y: f64) -> AgentState {
        AgentState::new(id, Pose::new(x, y), 0.4, SensorModel::new(6.0, 0.1, 0.0, 0.7, 1.3).unwrap())
    }

    #[test]
    fn policy_names_roundtrip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.name().parse::<PolicyKind>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.name()));
        }
        assert!("nope".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn random_walk_frequencies() {
        let a = agent(0, 0.5, 0.5);
        let f = [Pose::new(1.0, 1.0), Pose::new(2.0, 2.0), Pose::new(3.0, 3.0)];
        let mut rng = stream(5, StreamKind::Policy, 0);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            let Action::Goto { goal } = random_walk_step(&a, &f, None, None, 0.5, &mut rng) else { panic!() };
            counts[f.iter().position(|p| *p == goal).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
        }
        assert_eq!(random_walk_step(&a, &[], None, None, 0.5, &mut rng), Action::Stay);
        let last = Pose::new(7.0, 7.0);
        assert_eq!(random_walk_step(&a, &f, Some(last), None, 0.5, &mut rng), Action::Goto { goal: last });
    }

    #[test]
    fn voronoi_splits_symmetric_square() {
        let map = GridMap::open(10, 10, 1.0).unwrap();
        let r = voronoi_partition(&map, &[Pose::new(0.5, 0.5), Pose::new(9.5, 9.5)]).unwrap();
        assert_eq!(r[0].len() + r[1].len(), 100);
        // cells on the bisector go to agent 0
        assert_eq!(r[0].len(), 55);
        let single = voronoi_partition(&map, &[Pose::new(3.0, 3.0)]).unwrap();
        assert_eq!(single[0].len(), 100);
    }

    #[test]
    fn small_region_serpentine() {
        let map = GridMap::open(3, 2, 1.0).unwrap();
        let region: Vec<usize> = (0..6).collect();
        let p = boustrophedon_path(&map, &region, 1).unwrap();
        let expect = [(0.5, 1.5), (1.5, 1.5), (2.5, 1.5), (2.5, 0.5), (1.5, 0.5), (0.5, 0.5)];
        assert_eq!(p.waypoints.len(), 6);
        for (w, e) in p.waypoints.iter().zip(expect) {
            assert_eq!(*w, Pose::new(e.0, e.1));
        }
        let one = boustrophedon_path(&map, &[4], 3).unwrap();
        assert_eq!(one.waypoints.len(), 1);
    }

    #[test]
    fn walled_region_gets_connector() {
        let map = GridMap::parse("5 3 1.0\n.....\n####.\n.....\n").unwrap();
        let region: Vec<usize> = map.free_indices().collect();
        let p = boustrophedon_path(&map, &region, 1).unwrap();
        for w in p.waypoints.windows(2) {
            assert!(line_of_sight(&map, &w[0], &w[1]), "{} {}", w[0], w[1]);
        }
    }

    #[test]
    fn swarm_forces() {
        let map = GridMap::open(50, 50, 1.0).unwrap();
        let cfg = SwarmConfig { k_drift: 0.0, k_cohesion: 0.0, ..Default::default() };
        let v = swarm_step(&[agent(0, 10.0, 10.0), agent(1, 11.0, 10.0)], None, &map, 0.0, &cfg);
        assert!(v[0].0 < 0.0 && v[1].0 > 0.0);

        let far = [agent(0, 5.0, 5.0), agent(1, 45.0, 5.0), agent(2, 25.0, 45.0)];
        let tgt = Pose::new(25.0, 20.0);
        let v = swarm_step(&far, Some(tgt), &map, 0.0, &SwarmConfig::default());
        for (a, vel) in far.iter().zip(&v) {
            let to = (tgt.x - a.pose.x, tgt.y - a.pose.y);
            assert!(vel.0 * to.0 + vel.1 * to.1 > 0.0);
            assert!(vel.0.hypot(vel.1) <= a.max_speed + 1e-12);
        }

        let ring: Vec<AgentState> = (0..6)
            .map(|k| {
                let th = k as f64 * std::f64::consts::TAU / 6.0;
                agent(k, 25.0 + 2.0 * th.cos(), 25.0 + 2.0 * th.sin())
            })
            .collect();
        let cfg = SwarmConfig { k_drift: 0.0, ..Default::default() };
        let v = swarm_step(&ring, None, &map, 0.0, &cfg);
        let (sx, sy) = v.iter().fold((0.0, 0.0), |s, v| (s.0 + v.0, s.1 + v.1));
        assert!(sx.abs() < 1e-12 && sy.abs() < 1e-12);
    }
}
