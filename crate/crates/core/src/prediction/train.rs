use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{backward, forward_tape, Tape};
use super::{Gradients, PredictorWeights, Sample};
use crate::error::{Error, Result};
use crate::rng::{stream, StreamKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// Drop probability on the LSTM output during training.
    pub dropout: f64,
    pub learning_rate: f64,
    pub hidden_dim: usize,
    pub mlp_hidden: [usize; 2],
    /// Meters to model units.
    pub coord_scale: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 300,
            dropout: 0.4,
            learning_rate: 1e-4,
            hidden_dim: 32,
            mlp_hidden: [64, 64],
            coord_scale: 5.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.hidden_dim == 0 || self.mlp_hidden.contains(&0) {
            return Err(Error::InvalidConfig("batch_size, epochs and layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if !(self.learning_rate >= 0.0) || !(self.coord_scale > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be >= 0 and coord_scale > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub weights: PredictorWeights,
    /// Dropout-free loss before the first update.
    pub initial_loss: f64,
    /// Dropout-free loss after the last epoch.
    pub final_loss: f64,
    /// Mean training loss (with dropout) of each epoch.
    pub epoch_losses: Vec<f64>,
}

fn scaled(sample: &Sample, s: f64) -> (Vec<[f64; 2]>, Vec<f64>) {
    let x = sample.input.iter().map(|p| [p[0] * s, p[1] * s]).collect();
    let y = sample.target.iter().flat_map(|p| [p[0] * s, p[1] * s]).collect();
    (x, y)
}

fn check_sample(w: &PredictorWeights, s: &Sample) -> Result<()> {
    if s.input.len() != w.input_len || s.target.len() != w.output_len {
        return Err(Error::ShapeMismatch(format!(
            "sample has {}/{} points, model expects {}/{}",
            s.input.len(),
            s.target.len(),
            w.input_len,
            w.output_len
        )));
    }
    Ok(())
}

/// Mean squared error over the batch in model units, with optional
/// per-sample dropout masks, plus its gradient.
pub fn batch_loss_and_grad(
    w: &PredictorWeights,
    batch: &[&Sample],
    masks: Option<&[Vec<f64>]>,
) -> Result<(f64, Gradients)> {
    let mut grad = vec![0.0; w.num_params()];
    let mut tape = Tape::default();
    let mut loss = 0.0;
    let n_out = (2 * w.output_len) as f64;
    let norm = n_out * batch.len() as f64;
    for (k, s) in batch.iter().enumerate() {
        check_sample(w, s)?;
        let (x, y) = scaled(s, w.coord_scale);
        forward_tape(w, &x, masks.map(|m| m[k].as_slice()), &mut tape);
        let dy: Vec<f64> = tape.y.iter().zip(&y).map(|(a, b)| 2.0 * (a - b) / norm).collect();
        loss += tape.y.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / norm;
        backward(w, &tape, &dy, &mut grad);
    }
    Ok((loss, grad))
}

/// Dropout-free mean squared error in model units.
pub fn batch_loss(w: &PredictorWeights, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut tape = Tape::default();
    let mut loss = 0.0;
    for s in samples {
        check_sample(w, s)?;
        let (x, y) = scaled(s, w.coord_scale);
        forward_tape(w, &x, None, &mut tape);
        loss += tape.y.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(loss / (samples.len() * 2 * w.output_len) as f64)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
        }
    }
}

/// Trains a freshly initialised model with Adam on the MSE loss.
pub fn train(dataset: &[Sample], cfg: &TrainConfig, seed: u64) -> Result<TrainReport> {
    let init = PredictorWeights::init(cfg.hidden_dim, cfg.mlp_hidden, cfg.coord_scale, seed);
    train_from(init, dataset, cfg, seed)
}

/// Continues training from `weights`.
pub fn train_from(mut weights: PredictorWeights, dataset: &[Sample], cfg: &TrainConfig, seed: u64) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let initial_loss = batch_loss(&weights, dataset)?;
    let mut rng = stream(seed, StreamKind::Training, 1);
    let mut adam = Adam { m: vec![0.0; weights.num_params()], v: vec![0.0; weights.num_params()], t: 0 };
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let h = weights.hidden_dim;
    let keep = 1.0 - cfg.dropout;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &dataset[i]).collect();
            let masks: Option<Vec<Vec<f64>>> = (cfg.dropout > 0.0).then(|| {
                batch
                    .iter()
                    .map(|_| (0..h).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect())
                    .collect()
            });
            let (loss, grad) = batch_loss_and_grad(&weights, &batch, masks.as_deref())?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, loss });
            }
            total += loss * batch.len() as f64;
            adam.step(&mut weights.params, &grad, cfg);
        }
        epoch_losses.push(total / dataset.len() as f64);
    }
    let final_loss = batch_loss(&weights, dataset)?;
    if !final_loss.is_finite() {
        return Err(Error::Divergence { epoch: cfg.epochs, loss: final_loss });
    }
    Ok(TrainReport { weights, initial_loss, final_loss, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::{gen_synthetic_dataset, TrajKind};

    #[test]
    fn zero_learning_rate_leaves_weights() {
        let data = gen_synthetic_dataset(1, &[TrajKind::Linear], 3).unwrap();
        let cfg = TrainConfig { epochs: 1, learning_rate: 0.0, hidden_dim: 4, mlp_hidden: [8, 8], ..Default::default() };
        let init = PredictorWeights::init(4, [8, 8], cfg.coord_scale, 5);
        let report = train_from(init.clone(), &data[..1], &cfg, 5).unwrap();
        assert_eq!(report.weights, init);
    }

    #[test]
    fn training_reduces_loss() {
        let data = gen_synthetic_dataset(4, &[TrajKind::Linear], 3).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            learning_rate: 3e-3,
            dropout: 0.0,
            hidden_dim: 8,
            mlp_hidden: [16, 16],
            ..Default::default()
        };
        let report = train(&data, &cfg, 2).unwrap();
        assert!(report.final_loss < report.initial_loss);
        assert!(report.epoch_losses.last().unwrap() < report.epoch_losses.first().unwrap());
    }
}
