mod common;

use sat_core::baselines::PolicyKind;
use sat_core::config::{AgentSpec, MapSource, Roster, ScenarioConfig, TargetSpec};
use sat_core::entities::SensorModel;
use sat_core::harness::{export, run_episode, run_monte_carlo, Engine, Event, MetricsRow, Trace, TRACE_VERSION};
use sat_core::trace_tools::{extract_paths, replay_check};
use sat_core::world::Pose;
use sat_core::Error;

fn small(policy: PolicyKind, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        map: MapSource::Open { width: 24, height: 24, resolution: 1.0 },
        agents: Roster::Count(2),
        targets: Roster::Count(2),
        policy,
        seed,
        time_cap: 120.0,
        ..ScenarioConfig::default()
    }
}

#[test]
fn adjacent_static_target_clears_quickly() {
    let mut cfg = small(PolicyKind::Hybrid, 0);
    cfg.agents = Roster::List(vec![AgentSpec {
        pose: Some(Pose::new(5.5, 5.5)),
        max_speed: None,
        sensor: Some(SensorModel::new(6.0, 0.0, 0.0, 0.7, 0.7).unwrap()),
    }]);
    cfg.targets = Roster::List(vec![TargetSpec { pose: Some(Pose::new(6.5, 5.5)), max_speed: Some(0.0), ..Default::default() }]);
    let out = run_episode(&cfg).unwrap();
    assert_eq!(out.metrics.tracked_ratio, 1.0);
    assert!(out.metrics.mission_time <= 1.0, "{}", out.metrics.mission_time);
}

#[test]
fn unreachable_target_hits_the_cap() {
    let mut cfg = small(PolicyKind::Hybrid, 1);
    cfg.map = MapSource::Inline { ascii: "7 3 1\n...#...\n...#...\n...#...\n".into() };
    cfg.agents = Roster::List(vec![AgentSpec { pose: Some(Pose::new(0.5, 1.5)), ..Default::default() }]);
    cfg.targets = Roster::List(vec![TargetSpec { pose: Some(Pose::new(6.5, 1.5)), max_speed: Some(0.0), ..Default::default() }]);
    cfg.time_cap = 30.0;
    let m = run_episode(&cfg).unwrap().metrics;
    assert_eq!(m.mission_time, 30.0);
    assert_eq!(m.tracked_ratio, 0.0);
    assert!(!m.completed);
}

#[test]
fn zero_targets_rejected() {
    let mut cfg = small(PolicyKind::Hybrid, 0);
    cfg.targets = Roster::Count(0);
    assert!(matches!(run_episode(&cfg), Err(Error::InvalidConfig(_))));
}

#[test]
fn every_policy_completes_and_respects_speed() {
    for policy in PolicyKind::ALL {
        let cfg = small(policy, 3);
        let out = run_episode(&cfg).unwrap();
        let m = &out.metrics;
        assert!(m.mission_time <= cfg.time_cap, "{policy}");
        assert_eq!(m.completed, m.tracked_ratio == 1.0, "{policy}");
        assert!(m.mean_traveled <= 0.4 * m.mission_time + 1e-9, "{policy}");
        // tracked ratio only grows: clear events are never undone
        let mut cleared = 0;
        for e in &out.trace.events {
            if let Event::Clear { .. } = e.event {
                cleared += 1;
            }
        }
        assert_eq!(cleared as f64 / 2.0, m.tracked_ratio, "{policy}");
    }
}

#[test]
fn trace_events_are_ordered() {
    let out = run_episode(&small(PolicyKind::Hybrid, 4)).unwrap();
    for w in out.trace.events.windows(2) {
        assert!(w[1].t >= w[0].t);
        assert_eq!(w[1].seq, w[0].seq + 1);
    }
}

#[test]
fn replay_detects_tampering_and_version() {
    let cfg = small(PolicyKind::Hybrid, 5);
    let out = run_episode(&cfg).unwrap();
    assert!(replay_check(&out.trace, &cfg).unwrap());

    let mut bad = out.trace.clone();
    let i = bad.events.iter().position(|e| matches!(e.event, Event::Pose { .. })).unwrap();
    if let Event::Pose { x, .. } = &mut bad.events[i].event {
        *x += 1e-6;
    }
    assert!(!replay_check(&bad, &cfg).unwrap());

    let mut old = out.trace.clone();
    old.meta.version = "sat-trace/0".into();
    assert!(matches!(replay_check(&old, &cfg), Err(Error::VersionMismatch { .. })));
    assert_ne!(TRACE_VERSION, "sat-trace/0");
}

#[test]
fn export_roundtrip() {
    let cfg = small(PolicyKind::Independent, 6);
    let out = run_episode(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export(&out.trace, &[MetricsRow::new("small", 6, &out.metrics)], dir.path()).unwrap();
    let back = Trace::load(dir.path().join("trace.jsonl")).unwrap();
    assert_eq!(back, out.trace);
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let poses = out.trace.events.iter().filter(|e| matches!(e.event, Event::Pose { .. })).count();
    assert_eq!(extract_paths(&back).len(), poses);
}

#[test]
fn monte_carlo_counts_and_determinism() {
    let cfgs = [small(PolicyKind::Hybrid, 0), small(PolicyKind::RandomWalk, 0)];
    let seeds = [1, 2, 3, 4, 5];
    let a = run_monte_carlo(&cfgs, &seeds).unwrap();
    assert_eq!(a.episodes.len(), 10);
    assert_eq!(a.rows.len(), 10);
    assert_eq!(a.summary.len(), 2);
    let b = run_monte_carlo(&cfgs, &seeds).unwrap();
    assert_eq!(a.rows, b.rows);
    assert!(run_monte_carlo(&cfgs, &[]).is_err());
}

#[test]
fn capped_runs_summarise_to_the_cap() {
    let mut cfg = small(PolicyKind::Hybrid, 0);
    cfg.map = MapSource::Inline { ascii: "7 3 1\n...#...\n...#...\n...#...\n".into() };
    cfg.agents = Roster::List(vec![AgentSpec { pose: Some(Pose::new(0.5, 1.5)), ..Default::default() }]);
    cfg.targets = Roster::List(vec![TargetSpec { pose: Some(Pose::new(6.5, 1.5)), max_speed: Some(0.0), ..Default::default() }]);
    cfg.time_cap = 10.0;
    let res = run_monte_carlo(&[cfg], &[1, 2, 3]).unwrap();
    assert_eq!(res.summary[0].mission_time.mean, 10.0);
    assert_eq!(res.summary[0].mission_time.std, 0.0);
}

#[test]
fn total_comm_loss_still_explores() {
    let mut cfg = small(PolicyKind::Hybrid, 7);
    cfg.failures.p_cf = 1.0;
    cfg.failures.p_ef = 1.0;
    let mut e = Engine::new(&cfg, false).unwrap();
    for _ in 0..10 {
        e.step().unwrap();
    }
    assert!(e.agents().iter().any(|a| a.traveled > 0.0));
}
