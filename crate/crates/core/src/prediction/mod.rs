//! Short-horizon target trajectory prediction.
//!
//! An LSTM encoder over the last 10 positions feeds a small MLP that emits
//! the next 15 positions. A constant-velocity Kalman extrapolator serves as
//! the non-learned baseline. Points are sampled every 0.2 s.

mod cv;
mod dataset;
mod lstm;
mod train;
mod window;

pub use cv::{cv_predict, CvConfig};
pub use dataset::{
    gen_synthetic_dataset, gen_trajectories, load_trajectories, samples_from_trajectories, save_trajectories,
    windows_from_trajectories, Sample, TrajKind, TRAJ_LEN,
};
pub use lstm::{lstm_forward, Gradients, PredictorWeights};
pub use train::{batch_loss, batch_loss_and_grad, train, train_from, TrainConfig, TrainReport};
pub use window::{ade_fde, augment_rotations, denormalize, normalize_window, rotate, Point};

/// Sampling period of every trajectory window, seconds.
pub const DT: f64 = 0.2;
pub const INPUT_LEN: usize = 10;
pub const OUTPUT_LEN: usize = 15;

/// Anything that maps a position history to future positions in the same
/// frame.
pub trait Predictor: Send + Sync {
    fn predict(&self, history: &[Point]) -> Vec<Point>;
}

/// Trained LSTM-MLP predictor working in the global frame.
#[derive(Debug, Clone)]
pub struct LstmPredictor {
    pub weights: PredictorWeights,
}

impl LstmPredictor {
    pub fn new(weights: PredictorWeights) -> Self {
        Self { weights }
    }
}

/// The last `INPUT_LEN` points of `history`, padded at the front with the
/// first point when shorter.
pub fn input_window(history: &[Point]) -> Vec<Point> {
    let Some(first) = history.first() else { return vec![[0.0, 0.0]; INPUT_LEN] };
    let tail = &history[history.len().saturating_sub(INPUT_LEN)..];
    let mut out = vec![*first; INPUT_LEN - tail.len()];
    out.extend_from_slice(tail);
    out
}

impl Default for LstmPredictor {
    fn default() -> Self {
        Self::new(PredictorWeights::default_trained())
    }
}

impl Predictor for LstmPredictor {
    fn predict(&self, history: &[Point]) -> Vec<Point> {
        let (norm, offset) = normalize_window(&input_window(history));
        let out = lstm_forward(&self.weights, &norm).expect("weights are shape-checked on load");
        denormalize(&out, offset)
    }
}

/// Constant-velocity Kalman extrapolation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CvPredictor {
    pub config: CvConfig,
}

impl Predictor for CvPredictor {
    fn predict(&self, history: &[Point]) -> Vec<Point> {
        cv_predict(&input_window(history), OUTPUT_LEN, &self.config)
    }
}
