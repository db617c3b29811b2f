use nalgebra::{Matrix2x4, Matrix4, Vector2, Vector4};

use super::Point;

/// Noise settings for the constant-velocity filter, in per-step units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvConfig {
    /// Acceleration noise variance per step.
    pub accel_var: f64,
    /// Position measurement variance.
    pub meas_var: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { accel_var: 1e-4, meas_var: 1e-3 }
    }
}

/// Filters `input` with a position-velocity Kalman filter and extrapolates
/// `horizon` steps at the filtered velocity.
///
/// The filter starts from the first point with the first finite difference
/// as velocity, so exactly linear input is reproduced without lag.
pub fn cv_predict(input: &[Point], horizon: usize, cfg: &CvConfig) -> Vec<Point> {
    let Some(first) = input.first() else { return vec![[0.0, 0.0]; horizon] };
    if input.len() < 2 {
        return vec![*first; horizon];
    }
    let f = Matrix4::new(
        1.0, 0.0, 1.0, 0.0, //
        0.0, 1.0, 0.0, 1.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    );
    let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    let q = {
        let a = cfg.accel_var;
        Matrix4::new(
            a / 4.0, 0.0, a / 2.0, 0.0, //
            0.0, a / 4.0, 0.0, a / 2.0, //
            a / 2.0, 0.0, a, 0.0, //
            0.0, a / 2.0, 0.0, a,
        )
    };
    let r = nalgebra::Matrix2::identity() * cfg.meas_var;
    let mut x = Vector4::new(input[1][0], input[1][1], input[1][0] - input[0][0], input[1][1] - input[0][1]);
    let mut p = Matrix4::from_diagonal(&Vector4::new(cfg.meas_var, cfg.meas_var, 2.0 * cfg.meas_var, 2.0 * cfg.meas_var));
    for z in &input[2..] {
        x = f * x;
        p = f * p * f.transpose() + q;
        let s = h * p * h.transpose() + r;
        let Some(si) = s.try_inverse() else { break };
        let k = p * h.transpose() * si;
        x += k * (Vector2::new(z[0], z[1]) - h * x);
        p = (Matrix4::identity() - k * h) * p;
    }
    (1..=horizon).map(|k| [x[0] + k as f64 * x[2], x[1] + k as f64 * x[3]]).collect()
}
