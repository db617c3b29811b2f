use std::io::{BufRead, Write};
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::coordination::{Action, Channel, Task};
use crate::entities::Mode;
use crate::error::{Error, Result};

pub const TRACE_VERSION: &str = "sat-trace/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entity {
    Agent,
    Target,
}

/// First line of every trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub version: String,
    pub seed: u64,
    pub scenario: String,
    pub policy: String,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "payload")]
pub enum Event {
    Pose { entity: Entity, id: u32, x: f64, y: f64, cleared: bool },
    Detection { agent: u32, target: Option<u32>, visible: bool },
    Measurement { agent: u32, target: Option<u32>, x: f64, y: f64, sigma2: f64 },
    Report { reporter: u32, target: u32, x: f64, y: f64, sigma2: f64 },
    #[serde(rename = "belief-snapshot")]
    BeliefSnapshot { cells: Vec<(usize, f64)> },
    Assignment { agent: u32, task: Option<Task>, action: Action },
    #[serde(rename = "mode-switch")]
    ModeSwitch { agent: u32, mode: Mode, target: Option<u32> },
    Clear { target: u32, agent: u32, trace: f64 },
    Message { channel: Channel, from: u32, msg: String, dropped: bool },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Pose { .. } => "pose",
            Event::Detection { .. } => "detection",
            Event::Measurement { .. } => "measurement",
            Event::Report { .. } => "report",
            Event::BeliefSnapshot { .. } => "belief-snapshot",
            Event::Assignment { .. } => "assignment",
            Event::ModeSwitch { .. } => "mode-switch",
            Event::Clear { .. } => "clear",
            Event::Message { .. } => "message",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub t: f64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MetaLine {
    meta: TraceMeta,
}

/// An episode log: a header followed by events ordered by `(t, seq)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub events: Vec<TraceEvent>,
    enabled: bool,
}

impl Trace {
    pub fn new(meta: TraceMeta, enabled: bool) -> Self {
        Self { meta, events: Vec::new(), enabled }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn push(&mut self, t: f64, event: Event) {
        if self.enabled {
            let seq = self.events.len() as u64;
            self.events.push(TraceEvent { seq, t, event });
        }
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        serde_json::to_writer(&mut w, &MetaLine { meta: self.meta.clone() })?;
        w.write_all(b"\n")?;
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(f)
    }

    /// Parses a trace, checking the version and event order.
    pub fn read_jsonl(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| Error::InvalidArgument("empty trace".into()))??;
        let meta: MetaLine = serde_json::from_str(&first)?;
        if meta.meta.version != TRACE_VERSION {
            return Err(Error::VersionMismatch { expected: TRACE_VERSION.into(), found: meta.meta.version });
        }
        let mut events: Vec<TraceEvent> = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: TraceEvent = serde_json::from_str(&line)?;
            if let Some(prev) = events.last() {
                if e.seq != prev.seq + 1 || e.t < prev.t {
                    return Err(Error::InvalidArgument(format!("trace events out of order at seq {}", e.seq)));
                }
            }
            events.push(e);
        }
        Ok(Self { meta: meta.meta, events, enabled: true })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::read_jsonl(text.as_bytes())
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        Self::read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Pose;

    fn meta() -> TraceMeta {
        TraceMeta { version: TRACE_VERSION.into(), seed: 3, scenario: "x".into(), policy: "hybrid".into(), dt: 0.2 }
    }

    #[test]
    fn roundtrip() {
        let mut tr = Trace::new(meta(), true);
        tr.push(0.2, Event::Pose { entity: Entity::Agent, id: 0, x: 0.1 + 0.2, y: 1.0 / 3.0, cleared: false });
        tr.push(0.2, Event::Assignment { agent: 0, task: None, action: Action::Goto { goal: Pose::new(1.0, 2.0) } });
        tr.push(0.4, Event::Clear { target: 1, agent: 0, trace: 1.7 });
        tr.push(0.4, Event::BeliefSnapshot { cells: vec![(3, 0.25)] });
        let text = tr.to_jsonl();
        assert!(text.lines().nth(1).unwrap().contains("\"kind\":\"pose\""));
        let back = Trace::parse(&text).unwrap();
        assert_eq!(back, tr);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn empty_and_wrong_version() {
        let tr = Trace::new(meta(), true);
        assert_eq!(Trace::parse(&tr.to_jsonl()).unwrap().events.len(), 0);
        let mut m = meta();
        m.version = "other/9".into();
        let text = Trace::new(m, true).to_jsonl();
        assert!(matches!(Trace::parse(&text), Err(Error::VersionMismatch { .. })));
    }

    #[test]
    fn disabled_trace_records_nothing() {
        let mut tr = Trace::new(meta(), false);
        tr.push(0.0, Event::Clear { target: 0, agent: 0, trace: 1.0 });
        assert!(tr.events.is_empty());
    }
}
