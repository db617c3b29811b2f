use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::run_episode_quiet;
use super::export::MetricsRow;
use super::metrics::RunMetrics;
use super::stats::{mean, std_dev};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

/// Worker count from `SAT_THREADS`, or the rayon default when unset.
pub fn thread_count() -> Option<usize> {
    std::env::var("SAT_THREADS").ok()?.trim().parse().ok().filter(|n| *n > 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    fn of(xs: &[f64]) -> Self {
        let std = if xs.len() < 2 { 0.0 } else { std_dev(xs) };
        Self { mean: mean(xs), std }
    }
}

/// Per-config aggregate over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub config: String,
    pub episodes: usize,
    pub mission_time: MetricSummary,
    pub tracked_ratio: MetricSummary,
    pub mean_tracking_time: MetricSummary,
    pub mean_traveled: MetricSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McResults {
    /// Per-episode metrics ordered by config, then seed.
    pub episodes: Vec<(usize, u64, RunMetrics)>,
    pub rows: Vec<MetricsRow>,
    pub summary: Vec<SummaryRow>,
}

impl McResults {
    pub fn metric(&self, cfg_index: usize, f: impl Fn(&RunMetrics) -> f64) -> Vec<f64> {
        self.episodes.iter().filter(|(c, _, _)| *c == cfg_index).map(|(_, _, m)| f(m)).collect()
    }
}

pub fn summarize(name: &str, ms: &[&RunMetrics]) -> SummaryRow {
    let col = |f: fn(&RunMetrics) -> f64| MetricSummary::of(&ms.iter().map(|m| f(m)).collect::<Vec<_>>());
    SummaryRow {
        config: name.to_string(),
        episodes: ms.len(),
        mission_time: col(|m| m.mission_time),
        tracked_ratio: col(|m| m.tracked_ratio),
        mean_tracking_time: col(|m| m.mean_tracking_time),
        mean_traveled: col(|m| m.mean_traveled),
    }
}

/// Runs every (config, seed) pair, in parallel when more than one worker is available.
pub fn run_monte_carlo(cfgs: &[ScenarioConfig], seeds: &[u64]) -> Result<McResults> {
    if cfgs.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("need at least one config and one seed".into()));
    }
    for c in cfgs {
        c.validate()?;
    }
    let jobs: Vec<(usize, u64)> = (0..cfgs.len()).flat_map(|c| seeds.iter().map(move |s| (c, *s))).collect();
    let run = |&(c, seed): &(usize, u64)| -> Result<(usize, u64, RunMetrics)> {
        let mut cfg = cfgs[c].clone();
        cfg.seed = seed;
        Ok((c, seed, run_episode_quiet(&cfg)?))
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let episodes = pool.install(|| jobs.par_iter().map(run).collect::<Result<Vec<_>>>())?;
    let rows = episodes.iter().map(|(c, s, m)| MetricsRow::new(cfgs[*c].name.clone(), *s, m)).collect();
    let summary = (0..cfgs.len())
        .map(|c| {
            let ms: Vec<&RunMetrics> = episodes.iter().filter(|(i, _, _)| *i == c).map(|(_, _, m)| m).collect();
            summarize(&cfgs[c].name, &ms)
        })
        .collect();
    Ok(McResults { episodes, rows, summary })
}
