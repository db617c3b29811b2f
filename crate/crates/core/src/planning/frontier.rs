use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::belief::SharedOccupancyBelief;
use crate::world::{GridMap, Pose};

/// Connected group of frontier cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    /// Center of the member cell nearest to the members' mean position.
    pub centroid: Pose,
    pub member_cells: Vec<usize>,
    pub cluster_size: usize,
}

/// Known-empty free cell (`p < 0.5 - band`) with at least one free
/// 8-neighbour whose belief is within `band` of 0.5.
pub fn is_frontier_cell(p: &[f64], map: &GridMap, idx: usize, band: f64) -> bool {
    if !map.is_free_index(idx) || p[idx] >= 0.5 - band {
        return false;
    }
    map.neighbors8(map.cell_at(idx)).any(|n| {
        let j = map.index(n);
        map.is_free_index(j) && (p[j] - 0.5).abs() <= band
    })
}

/// Frontier cells grouped by 8-connectivity. Groups larger than
/// `max_cluster_cells` are cut into consecutive breadth-first chunks so that
/// every centroid stays close to its members.
pub fn extract_frontiers(b: &SharedOccupancyBelief, map: &GridMap, band: f64, max_cluster_cells: usize) -> Vec<Frontier> {
    let p = b.probabilities();
    let n = map.len();
    let is_f: Vec<bool> = (0..n).map(|i| is_frontier_cell(p, map, i, band)).collect();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if !is_f[start] || seen[start] {
            continue;
        }
        let mut members = Vec::new();
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            members.push(i);
            for nb in map.neighbors8(map.cell_at(i)) {
                let j = map.index(nb);
                if is_f[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        for chunk in members.chunks(max_cluster_cells.max(1)) {
            out.push(make_frontier(map, chunk));
        }
    }
    out
}

fn make_frontier(map: &GridMap, members: &[usize]) -> Frontier {
    let centers: Vec<Pose> = members.iter().map(|&i| map.center(map.cell_at(i))).collect();
    let k = centers.len() as f64;
    let mean = Pose::new(centers.iter().map(|c| c.x).sum::<f64>() / k, centers.iter().map(|c| c.y).sum::<f64>() / k);
    let best = centers
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.distance(&mean).total_cmp(&b.1.distance(&mean)).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut member_cells = members.to_vec();
    member_cells.sort_unstable();
    Frontier { centroid: centers[best], cluster_size: member_cells.len(), member_cells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{fuse_occupancy, OccupancyBelief};

    fn shared(map: &GridMap, cells: &[(usize, f64)]) -> SharedOccupancyBelief {
        let mut b = OccupancyBelief::new(0, map, 0.0);
        for &(i, p) in cells {
            b.set(i, p, 0.0);
        }
        fuse_occupancy(&[(&b, 1.0)]).unwrap()
    }

    #[test]
    fn nothing_known_means_no_frontier() {
        let map = GridMap::open(5, 5, 1.0).unwrap();
        assert!(extract_frontiers(&shared(&map, &[]), &map, 0.1, 16).is_empty());
    }

    #[test]
    fn single_known_cell() {
        let map = GridMap::open(3, 3, 1.0).unwrap();
        let f = extract_frontiers(&shared(&map, &[(4, 0.1)]), &map, 0.1, 16);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].centroid, Pose::new(1.5, 1.5));
        assert_eq!(f[0].member_cells, vec![4]);
    }

    #[test]
    fn fully_explored_has_no_frontier() {
        let map = GridMap::open(4, 4, 1.0).unwrap();
        let all: Vec<(usize, f64)> = (0..16).map(|i| (i, 0.01)).collect();
        assert!(extract_frontiers(&shared(&map, &all), &map, 0.1, 16).is_empty());
    }

    #[test]
    fn obstacles_do_not_count_as_unknown() {
        let map = GridMap::parse("3 1 1.0\n..#\n").unwrap();
        let f = extract_frontiers(&shared(&map, &[(0, 0.01), (1, 0.01)]), &map, 0.1, 16);
        assert!(f.is_empty());
    }

    #[test]
    fn large_clusters_are_split() {
        let map = GridMap::open(20, 3, 1.0).unwrap();
        let row: Vec<(usize, f64)> = (0..20).map(|c| (20 + c, 0.05)).collect();
        let f = extract_frontiers(&shared(&map, &row), &map, 0.1, 8);
        assert_eq!(f.iter().map(|f| f.cluster_size).sum::<usize>(), 20);
        assert!(f.len() >= 3 && f.iter().all(|f| f.cluster_size <= 8));
    }
}
