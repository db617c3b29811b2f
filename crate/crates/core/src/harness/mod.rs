//! Episode execution, batches, statistics and export.

mod engine;
mod export;
mod metrics;
mod montecarlo;
mod stats;
mod trace;

pub use engine::{run_episode, run_episode_quiet, Engine, EpisodeOutput, HQ_ID};
pub use export::{export, read_metrics_csv, write_metrics_csv, MetricsRow, METRICS_HEADER};
pub use metrics::RunMetrics;
pub use montecarlo::{run_monte_carlo, summarize, thread_count, McResults, MetricSummary, SummaryRow};
pub use stats::{mean, std_dev, variance, welch_t_test, WelchResult};
pub use trace::{Entity, Event, Trace, TraceEvent, TraceMeta, TRACE_VERSION};
