pub type Point = [f64; 2];

/// Shifts a window so its last point is the origin. Returns the shifted
/// window and the removed offset.
pub fn normalize_window(w: &[Point]) -> (Vec<Point>, Point) {
    let offset = w.last().copied().unwrap_or([0.0, 0.0]);
    (w.iter().map(|p| [p[0] - offset[0], p[1] - offset[1]]).collect(), offset)
}

pub fn denormalize(w: &[Point], offset: Point) -> Vec<Point> {
    w.iter().map(|p| [p[0] + offset[0], p[1] + offset[1]]).collect()
}

/// Rotation about the origin by `angle` radians.
pub fn rotate(w: &[Point], angle: f64) -> Vec<Point> {
    let (s, c) = angle.sin_cos();
    w.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect()
}

/// The eight rotations of `traj` by multiples of 45°, starting with the
/// identity.
pub fn augment_rotations(traj: &[Point]) -> Vec<Vec<Point>> {
    (0..8)
        .map(|k| if k == 0 { traj.to_vec() } else { rotate(traj, k as f64 * std::f64::consts::FRAC_PI_4) })
        .collect()
}

/// Average and final displacement error.
pub fn ade_fde(pred: &[Point], truth: &[Point]) -> (f64, f64) {
    assert_eq!(pred.len(), truth.len(), "prediction and truth lengths differ");
    if pred.is_empty() {
        return (0.0, 0.0);
    }
    let errs: Vec<f64> = pred.iter().zip(truth).map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1])).collect();
    (errs.iter().sum::<f64>() / errs.len() as f64, *errs.last().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_roundtrip() {
        let w = vec![[1.0, 1.0], [3.0, 2.0], [5.0, 3.0]];
        let (n, off) = normalize_window(&w);
        assert_eq!(off, [5.0, 3.0]);
        assert_eq!(n[2], [0.0, 0.0]);
        assert_eq!(denormalize(&n, off), w);
        let (n2, off2) = normalize_window(&n);
        assert_eq!((n2, off2), (n, [0.0, 0.0]));
    }

    #[test]
    fn quarter_turn() {
        let r = &augment_rotations(&[[1.0, 0.0]])[2];
        assert!(r[0][0].abs() < 1e-12 && (r[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ade_fde_examples() {
        let a = vec![[0.0, 0.0], [1.0, 1.0]];
        assert_eq!(ade_fde(&a, &a), (0.0, 0.0));
        let b: Vec<Point> = a.iter().map(|p| [p[0] + 1.0, p[1]]).collect();
        assert_eq!(ade_fde(&a, &b), (1.0, 1.0));
    }
}
