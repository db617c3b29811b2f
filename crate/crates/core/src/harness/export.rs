use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::metrics::RunMetrics;
use super::trace::Trace;
use crate::error::Result;

pub const METRICS_HEADER: [&str; 6] = ["config", "seed", "mission_time", "tracked_ratio", "mean_tracking_time", "mean_traveled"];

/// One line of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub config: String,
    pub seed: u64,
    pub mission_time: f64,
    pub tracked_ratio: f64,
    pub mean_tracking_time: f64,
    pub mean_traveled: f64,
}

impl MetricsRow {
    pub fn new(config: impl Into<String>, seed: u64, m: &RunMetrics) -> Self {
        Self {
            config: config.into(),
            seed,
            mission_time: m.mission_time,
            tracked_ratio: m.tracked_ratio,
            mean_tracking_time: m.mean_tracking_time,
            mean_traveled: m.mean_traveled,
        }
    }
}

pub fn write_metrics_csv(path: impl AsRef<FsPath>, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: impl AsRef<FsPath>) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<MetricsRow>, _>>()?;
    Ok(rows)
}

/// Writes `trace.jsonl` and `metrics.csv` into `out_dir`.
pub fn export(trace: &Trace, rows: &[MetricsRow], out_dir: impl AsRef<FsPath>) -> Result<()> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    trace.save(dir.join("trace.jsonl"))?;
    write_metrics_csv(dir.join("metrics.csv"), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{TraceMeta, TRACE_VERSION};

    #[test]
    fn empty_export_has_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let meta = TraceMeta { version: TRACE_VERSION.into(), seed: 0, scenario: "e".into(), policy: "hybrid".into(), dt: 0.2 };
        export(&Trace::new(meta, true), &[], dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(csv.trim(), METRICS_HEADER.join(","));
        let t = Trace::load(dir.path().join("trace.jsonl")).unwrap();
        assert!(t.events.is_empty());
        assert!(read_metrics_csv(dir.path().join("metrics.csv")).unwrap().is_empty());
    }

    #[test]
    fn rows_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunMetrics::from_times(12.5, vec![Some(12.5)], vec![Some(3.0)], &[4.0]);
        let rows = vec![MetricsRow::new("a", 1, &m), MetricsRow::new("a", 2, &m)];
        let p = dir.path().join("m.csv");
        write_metrics_csv(&p, &rows).unwrap();
        assert_eq!(read_metrics_csv(&p).unwrap(), rows);
    }
}
