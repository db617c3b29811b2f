#![allow(dead_code)]

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sat_core::world::GridMap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Posterior mean and variance of a 1-D Gaussian prior times a Gaussian
/// likelihood, integrated numerically on a uniform grid.
pub fn grid_bayes_1d(m0: f64, v0: f64, z: f64, r: f64) -> (f64, f64) {
    let lo = m0.min(z) - 10.0 * v0.max(r).sqrt();
    let hi = m0.max(z) + 10.0 * v0.max(r).sqrt();
    let n = 200_000;
    let dx = (hi - lo) / n as f64;
    let (mut w, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for k in 0..=n {
        let x = lo + k as f64 * dx;
        let p = (-(x - m0).powi(2) / (2.0 * v0)).exp() * (-(x - z).powi(2) / (2.0 * r)).exp();
        w += p;
        s1 += p * x;
        s2 += p * x * x;
    }
    let mean = s1 / w;
    (mean, s2 / w - mean * mean)
}

/// Random map with roughly `density` obstacles.
pub fn random_map(w: usize, h: usize, density: f64, rng: &mut impl Rng) -> GridMap {
    let obstacle = (0..w * h).map(|_| rng.random::<f64>() < density).collect();
    GridMap::new(w, h, 1.0, obstacle).unwrap()
}

/// Dijkstra with plain O(n²) node selection and the same move rules as the
/// planner: diagonal steps need both orthogonal neighbours free.
pub fn dijkstra_cost(map: &GridMap, s: usize, g: usize) -> Option<f64> {
    let (w, h) = (map.width() as isize, map.height() as isize);
    let n = map.len();
    let free = |r: isize, c: isize| r >= 0 && c >= 0 && r < h && c < w && map.is_free_index((r * w + c) as usize);
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[s] = 0.0;
    loop {
        let mut best = None;
        for i in 0..n {
            if !done[i] && dist[i].is_finite() && best.is_none_or(|b: usize| dist[i] < dist[b]) {
                best = Some(i);
            }
        }
        let Some(u) = best else { break };
        done[u] = true;
        let (r, c) = ((u / map.width()) as isize, (u % map.width()) as isize);
        for dr in -1..=1isize {
            for dc in -1..=1isize {
                if (dr, dc) == (0, 0) || !free(r + dr, c + dc) {
                    continue;
                }
                let diag = dr != 0 && dc != 0;
                if diag && !(free(r + dr, c) && free(r, c + dc)) {
                    continue;
                }
                let v = ((r + dr) * w + c + dc) as usize;
                let step = if diag { std::f64::consts::SQRT_2 } else { 1.0 };
                if dist[u] + step < dist[v] {
                    dist[v] = dist[u] + step;
                }
            }
        }
    }
    dist[g].is_finite().then_some(dist[g])
}

/// Frontier cells by direct predicate scan, grouped into 8-connected
/// components. Each component is returned as a sorted index list.
pub fn frontier_components(p: &[f64], map: &GridMap, band: f64) -> Vec<Vec<usize>> {
    let n = map.len();
    let is_f: Vec<bool> = (0..n)
        .map(|i| {
            if !map.is_free_index(i) || p[i] >= 0.5 - band {
                return false;
            }
            map.neighbors8(map.cell_at(i)).any(|c| {
                let j = map.index(c);
                map.is_free_index(j) && (p[j] - 0.5).abs() <= band
            })
        })
        .collect();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if !is_f[s] || seen[s] {
            continue;
        }
        let mut comp = vec![];
        let mut q = VecDeque::from([s]);
        seen[s] = true;
        while let Some(u) = q.pop_front() {
            comp.push(u);
            for c in map.neighbors8(map.cell_at(u)) {
                let v = map.index(c);
                if is_f[v] && !seen[v] {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        comp.sort();
        out.push(comp);
    }
    out.sort();
    out
}
