use serde::{Deserialize, Serialize};

use super::OccupancyBelief;
use crate::error::{Error, Result};

/// Trust-weighted combination of several occupancy beliefs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedOccupancyBelief {
    width: usize,
    height: usize,
    p: Vec<f64>,
    /// Per-source weights, summing to 1.
    pub weights: Vec<f64>,
}

impl SharedOccupancyBelief {
    pub fn from_single(b: &OccupancyBelief) -> Self {
        let (width, height) = b.dims();
        Self { width, height, p: b.probabilities().to_vec(), weights: vec![1.0] }
    }

    pub fn uniform(width: usize, height: usize) -> Self {
        Self { width, height, p: vec![0.5; width * height], weights: Vec::new() }
    }

    pub fn p(&self, idx: usize) -> f64 {
        self.p[idx]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Fuses beliefs with weights proportional to each source's information
/// trace.
///
/// Each cell is averaged over the sources that have observed it, with their
/// weights renormalised; cells nobody has observed stay at 0.5.
pub fn fuse_occupancy(beliefs: &[(&OccupancyBelief, f64)]) -> Result<SharedOccupancyBelief> {
    let Some((first, _)) = beliefs.first() else {
        return Err(Error::InvalidArgument("no beliefs to fuse".into()));
    };
    if beliefs.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("information traces must be finite and >= 0".into()));
    }
    let total: f64 = beliefs.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return Err(Error::AllZeroTrust);
    }
    let dims = first.dims();
    if let Some((b, _)) = beliefs.iter().find(|(b, _)| b.dims() != dims) {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", dims),
            found: format!("{:?}", b.dims()),
        });
    }
    let weights: Vec<f64> = beliefs.iter().map(|(_, w)| w / total).collect();
    let n = first.len();
    let mut p = vec![0.5; n];
    for (i, out) in p.iter_mut().enumerate() {
        let (mut num, mut den) = (0.0, 0.0);
        for ((b, _), w) in beliefs.iter().zip(&weights) {
            if b.observed(i) {
                num += w * b.p(i);
                den += w;
            }
        }
        if den > 0.0 {
            *out = num / den;
        }
    }
    Ok(SharedOccupancyBelief { width: dims.0, height: dims.1, p, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::GridMap;

    #[test]
    fn weighted_average() {
        let map = GridMap::open(2, 1, 1.0).unwrap();
        let mut a = OccupancyBelief::new(0, &map, 0.0);
        let mut b = OccupancyBelief::new(1, &map, 0.0);
        a.set(0, 1.0, 0.0);
        b.set(0, 0.0, 0.0);
        let f = fuse_occupancy(&[(&a, 3.0), (&b, 1.0)]).unwrap();
        assert!((f.p(0) - 0.75).abs() < 1e-12);
        assert_eq!(f.p(1), 0.5);
        assert_eq!(f.weights, vec![0.75, 0.25]);
    }

    #[test]
    fn single_source_is_identity() {
        let map = GridMap::open(3, 1, 1.0).unwrap();
        let mut a = OccupancyBelief::new(0, &map, 0.0);
        a.set(2, 0.2, 0.0);
        let f = fuse_occupancy(&[(&a, 5.0)]).unwrap();
        assert_eq!(f.probabilities(), a.probabilities());
        assert_eq!(f.weights, vec![1.0]);
    }

    #[test]
    fn zero_trust_rejected() {
        let map = GridMap::open(3, 1, 1.0).unwrap();
        let a = OccupancyBelief::new(0, &map, 0.0);
        assert!(matches!(fuse_occupancy(&[(&a, 0.0), (&a, 0.0)]), Err(Error::AllZeroTrust)));
    }
}
