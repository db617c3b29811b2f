//! Offline trace analysis: path extraction and replay verification.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::harness::{Engine, Entity, Event, Trace, TRACE_VERSION};

/// One row of the path CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRow {
    pub entity: String,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub kind: String,
}

fn label(entity: Entity, id: u32) -> String {
    match entity {
        Entity::Agent => format!("agent-{id}"),
        Entity::Target => format!("target-{id}"),
    }
}

/// One row per pose event; targets hold their clearing position afterwards.
pub fn extract_paths(trace: &Trace) -> Vec<PathRow> {
    let mut frozen: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    let mut last: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    let mut cleared: Vec<u32> = Vec::new();
    let mut rows = Vec::new();
    for e in &trace.events {
        match &e.event {
            Event::Clear { target, .. } => cleared.push(*target),
            Event::Pose { entity, id, x, y, cleared: flag } => {
                let (mut x, mut y) = (*x, *y);
                let mut kind = entity_kind(*entity);
                if *entity == Entity::Target {
                    if *flag || cleared.contains(id) {
                        let p = *frozen.entry(*id).or_insert_with(|| last.get(id).copied().unwrap_or((x, y)));
                        (x, y) = p;
                        kind = "cleared";
                    } else {
                        last.insert(*id, (x, y));
                    }
                }
                rows.push(PathRow { entity: label(*entity, *id), t: e.t, x, y, kind: kind.into() });
            }
            _ => {}
        }
    }
    rows
}

fn entity_kind(e: Entity) -> &'static str {
    match e {
        Entity::Agent => "agent",
        Entity::Target => "target",
    }
}

pub fn write_paths_csv(rows: &[PathRow], w: impl Write) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(["entity", "t", "x", "y", "kind"])?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Re-simulates `cfg` with the trace's seed and compares every event.
pub fn replay_check(trace: &Trace, cfg: &ScenarioConfig) -> Result<bool> {
    if trace.meta.version != TRACE_VERSION {
        return Err(Error::VersionMismatch { expected: TRACE_VERSION.into(), found: trace.meta.version.clone() });
    }
    let mut cfg = cfg.clone();
    cfg.seed = trace.meta.seed;
    let out = Engine::new(&cfg, true)?.run()?;
    Ok(out.trace.meta == trace.meta && out.trace.events == trace.events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{TraceMeta, TRACE_VERSION};

    fn meta() -> TraceMeta {
        TraceMeta { version: TRACE_VERSION.into(), seed: 1, scenario: "p".into(), policy: "hybrid".into(), dt: 0.2 }
    }

    #[test]
    fn stationary_agent_repeats_coordinates() {
        let mut tr = Trace::new(meta(), true);
        for k in 0..4 {
            tr.push(k as f64 * 0.2, Event::Pose { entity: Entity::Agent, id: 0, x: 1.5, y: 2.5, cleared: false });
        }
        let rows = extract_paths(&tr);
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.x == 1.5 && r.y == 2.5 && r.entity == "agent-0"));
    }

    #[test]
    fn cleared_target_freezes() {
        let mut tr = Trace::new(meta(), true);
        tr.push(0.0, Event::Pose { entity: Entity::Target, id: 2, x: 1.0, y: 1.0, cleared: false });
        tr.push(0.2, Event::Clear { target: 2, agent: 0, trace: 1.5 });
        tr.push(0.2, Event::Pose { entity: Entity::Target, id: 2, x: 1.1, y: 1.0, cleared: true });
        tr.push(0.4, Event::Pose { entity: Entity::Target, id: 2, x: 1.2, y: 1.0, cleared: true });
        let rows = extract_paths(&tr);
        assert_eq!(rows.len(), 3);
        assert_eq!((rows[1].x, rows[2].x), (1.0, 1.0));
        assert_eq!(rows[2].kind, "cleared");
        let mut buf = Vec::new();
        write_paths_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
