use std::path::Path as FsPath;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{augment_rotations, normalize_window, Point, DT, INPUT_LEN, OUTPUT_LEN};
use crate::error::{Error, Result};
use crate::rng::{stream, StreamKind};

/// Fastest synthetic target, m/s.
const MAX_SPEED: f64 = 0.2;
/// Points per generated trajectory.
pub const TRAJ_LEN: usize = 60;
/// Step between consecutive windows cut from one trajectory.
const STRIDE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajKind {
    Linear,
    Turning,
    Sinusoidal,
}

/// A normalised (input, future) pair: both are expressed relative to the
/// last input point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input: Vec<Point>,
    pub target: Vec<Point>,
}

fn one_trajectory(kind: TrajKind, len: usize, rng: &mut impl Rng) -> Vec<Point> {
    let speed = rng.random_range(0.3 * MAX_SPEED..MAX_SPEED);
    let heading = rng.random_range(0.0..std::f64::consts::TAU);
    let origin = [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)];
    let mut pts: Vec<Point> = match kind {
        TrajKind::Linear => (0..len)
            .map(|k| {
                let s = speed * DT * k as f64;
                [s * heading.cos(), s * heading.sin()]
            })
            .collect(),
        TrajKind::Turning => {
            let omega = rng.random_range(0.15..0.6) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            let (mut x, mut y, mut th) = (0.0, 0.0, heading);
            (0..len)
                .map(|_| {
                    let p = [x, y];
                    x += speed * DT * th.cos();
                    y += speed * DT * th.sin();
                    th += omega * DT;
                    p
                })
                .collect()
        }
        TrajKind::Sinusoidal => {
            let amp = rng.random_range(0.2..1.0);
            let period = rng.random_range(4.0..12.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let (c, s) = (heading.cos(), heading.sin());
            (0..len)
                .map(|k| {
                    let t = DT * k as f64;
                    let along = speed * t;
                    let lat = amp * ((std::f64::consts::TAU * t / period + phase).sin() - phase.sin());
                    [along * c - lat * s, along * s + lat * c]
                })
                .collect()
        }
    };
    // keep every step within the speed bound
    let fastest = pts.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]) / DT).fold(0.0, f64::max);
    let k = if fastest > MAX_SPEED { MAX_SPEED / fastest } else { 1.0 };
    for p in &mut pts {
        *p = [origin[0] + k * p[0], origin[1] + k * p[1]];
    }
    pts
}

/// `n` raw trajectories of `len` points, kinds cycling through `kinds`.
pub fn gen_trajectories(n: usize, kinds: &[TrajKind], len: usize, noise_std: f64, seed: u64) -> Result<Vec<Vec<Point>>> {
    if n == 0 || kinds.is_empty() {
        return Err(Error::InvalidArgument("need n > 0 and at least one trajectory kind".into()));
    }
    let mut rng = stream(seed, StreamKind::Dataset, 0);
    let noise = Normal::new(0.0, noise_std.max(0.0)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((0..n)
        .map(|i| {
            let mut t = one_trajectory(kinds[i % kinds.len()], len, &mut rng);
            if noise_std > 0.0 {
                for p in &mut t {
                    p[0] += noise.sample(&mut rng);
                    p[1] += noise.sample(&mut rng);
                }
            }
            t
        })
        .collect())
}

/// Cuts every trajectory into normalised (10 in, 15 out) windows.
pub fn windows_from_trajectories(trajs: &[Vec<Point>], stride: usize) -> Vec<Sample> {
    let span = INPUT_LEN + OUTPUT_LEN;
    let mut out = Vec::new();
    for t in trajs {
        let mut start = 0;
        while start + span <= t.len() {
            let (input, offset) = normalize_window(&t[start..start + INPUT_LEN]);
            let target = t[start + INPUT_LEN..start + span].iter().map(|p| [p[0] - offset[0], p[1] - offset[1]]).collect();
            out.push(Sample { input, target });
            start += stride.max(1);
        }
    }
    out
}

/// Normalised, rotation-augmented training windows from `n` synthetic
/// trajectories.
pub fn gen_synthetic_dataset(n: usize, kinds: &[TrajKind], seed: u64) -> Result<Vec<Sample>> {
    Ok(samples_from_trajectories(&gen_trajectories(n, kinds, TRAJ_LEN, 0.0, seed)?))
}

/// Writes each trajectory to `dir/traj_NNNNN.csv` with an `x,y` header.
pub fn save_trajectories(dir: impl AsRef<FsPath>, trajs: &[Vec<Point>]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for (i, t) in trajs.iter().enumerate() {
        let mut w = csv::Writer::from_path(dir.join(format!("traj_{i:05}.csv")))?;
        w.write_record(["x", "y"])?;
        for p in t {
            w.write_record([p[0].to_string(), p[1].to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Reads every `*.csv` trajectory in `dir`, in file-name order.
pub fn load_trajectories(dir: impl AsRef<FsPath>) -> Result<Vec<Vec<Point>>> {
    let mut files: Vec<_> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!("no trajectory files in {}", dir.as_ref().display())));
    }
    files
        .iter()
        .map(|f| {
            let mut r = csv::Reader::from_path(f)?;
            r.deserialize::<(f64, f64)>().map(|row| Ok(row.map(|(x, y)| [x, y])?)).collect()
        })
        .collect()
}

/// Rotation-augmented training windows cut from raw trajectories.
pub fn samples_from_trajectories(trajs: &[Vec<Point>]) -> Vec<Sample> {
    let mut out = Vec::new();
    for s in windows_from_trajectories(trajs, STRIDE) {
        let ins = augment_rotations(&s.input);
        let outs = augment_rotations(&s.target);
        out.extend(ins.into_iter().zip(outs).map(|(input, target)| Sample { input, target }));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_spacing_matches_speed() {
        let t = gen_trajectories(20, &[TrajKind::Linear], 30, 0.0, 1).unwrap();
        for traj in &t {
            let d0 = (traj[1][0] - traj[0][0]).hypot(traj[1][1] - traj[0][1]);
            for w in traj.windows(2) {
                let d = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
                assert!((d - d0).abs() < 1e-9 && d <= 0.04 + 1e-12);
            }
        }
    }

    #[test]
    fn every_step_respects_speed_bound() {
        let t = gen_trajectories(60, &[TrajKind::Linear, TrajKind::Turning, TrajKind::Sinusoidal], 60, 0.0, 2).unwrap();
        for traj in &t {
            for w in traj.windows(2) {
                assert!((w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]) <= MAX_SPEED * DT + 1e-12);
            }
        }
    }

    #[test]
    fn dataset_is_deterministic_and_normalised() {
        let a = gen_synthetic_dataset(3, &[TrajKind::Turning], 7).unwrap();
        let b = gen_synthetic_dataset(3, &[TrajKind::Turning], 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.len() % 8, 0);
        assert!(a.iter().all(|s| s.input[INPUT_LEN - 1].iter().all(|v| v.abs() < 1e-12)));
        assert!(gen_synthetic_dataset(0, &[TrajKind::Linear], 7).is_err());
    }
}
