use serde::{Deserialize, Serialize};

/// Outcome of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Seconds until every target was cleared, or the time cap.
    pub mission_time: f64,
    pub tracked_ratio: f64,
    /// Mean seconds from first detection to clearing over cleared targets.
    pub mean_tracking_time: f64,
    /// Mean distance traveled per agent, meters.
    pub mean_traveled: f64,
    pub clear_times: Vec<Option<f64>>,
    pub first_detections: Vec<Option<f64>>,
    /// Longest run of planning rounds an agent stayed put while frontiers
    /// existed.
    pub max_idle_rounds: u32,
    pub messages_sent: u64,
    pub messages_dropped: u64,
    pub completed: bool,
}

impl RunMetrics {
    pub fn from_times(
        mission_time: f64,
        clear_times: Vec<Option<f64>>,
        first_detections: Vec<Option<f64>>,
        traveled: &[f64],
    ) -> Self {
        let n = clear_times.len().max(1) as f64;
        let cleared: Vec<f64> = clear_times
            .iter()
            .zip(&first_detections)
            .filter_map(|(c, d)| Some(c.as_ref()? - d.unwrap_or(*c.as_ref()?)))
            .collect();
        let n_cleared = clear_times.iter().filter(|c| c.is_some()).count();
        Self {
            mission_time,
            tracked_ratio: n_cleared as f64 / n,
            mean_tracking_time: if cleared.is_empty() { 0.0 } else { cleared.iter().sum::<f64>() / cleared.len() as f64 },
            mean_traveled: if traveled.is_empty() { 0.0 } else { traveled.iter().sum::<f64>() / traveled.len() as f64 },
            completed: n_cleared == clear_times.len(),
            clear_times,
            first_detections,
            max_idle_rounds: 0,
            messages_sent: 0,
            messages_dropped: 0,
        }
    }
}
