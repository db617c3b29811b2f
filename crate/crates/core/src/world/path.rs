use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{Cell, GridMap, Pose};
use crate::error::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Waypoints through free space, joined by obstacle-free straight segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Pose>,
    /// Grid-optimal cost in meters.
    pub length: f64,
}

impl Path {
    pub fn single(p: Pose) -> Self {
        Self { waypoints: vec![p], length: 0.0 }
    }

    /// Sum of straight segment lengths between consecutive waypoints.
    pub fn polyline_length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    /// Positions spaced `step` meters apart along the polyline, starting at the
    /// first waypoint and always including the last.
    pub fn resample(&self, step: f64) -> Vec<Pose> {
        resample_polyline(&self.waypoints, step)
    }
}

pub(crate) fn resample_polyline(points: &[Pose], step: f64) -> Vec<Pose> {
    let Some(first) = points.first() else { return Vec::new() };
    let mut out = vec![*first];
    if step <= 0.0 {
        out.extend_from_slice(&points[1..]);
        return out;
    }
    let mut carry = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let seg = a.distance(&b);
        if seg == 0.0 {
            continue;
        }
        let mut s = step - carry;
        while s <= seg + 1e-12 {
            let f = (s / seg).min(1.0);
            out.push(Pose::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)));
            s += step;
        }
        carry = seg - (s - step);
    }
    let last = *points.last().unwrap();
    if out.last().is_none_or(|p| p.distance(&last) > 1e-9) {
        out.push(last);
    }
    out
}

#[derive(Copy, Clone, PartialEq)]
struct Node {
    f: f64,
    idx: usize,
}

impl Eq for Node {}

impl Ord for Node {
    // min-heap on f, then lowest cell index
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// 8-connected moves from `idx` with their unit-cell cost. Diagonal moves are
/// only allowed when both orthogonal neighbours are free.
fn for_each_move(map: &GridMap, idx: usize, mut f: impl FnMut(usize, f64)) {
    let (w, h) = (map.width() as isize, map.height() as isize);
    let (r, c) = ((idx / map.width()) as isize, (idx % map.width()) as isize);
    let free = |rr: isize, cc: isize| {
        rr >= 0 && cc >= 0 && rr < h && cc < w && map.is_free_index((rr * w + cc) as usize)
    };
    for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
        if free(r + dr, c + dc) {
            f(((r + dr) * w + c + dc) as usize, 1.0);
        }
    }
    for (dr, dc) in [(-1, -1), (-1, 1), (1, -1), (1, 1)] {
        if free(r + dr, c + dc) && free(r + dr, c) && free(r, c + dc) {
            f(((r + dr) * w + c + dc) as usize, SQRT2);
        }
    }
}

fn octile(map: &GridMap, a: usize, b: usize) -> f64 {
    let (ca, cb) = (map.cell_at(a), map.cell_at(b));
    let dr = ca.row.abs_diff(cb.row) as f64;
    let dc = ca.col.abs_diff(cb.col) as f64;
    let (lo, hi) = if dr < dc { (dr, dc) } else { (dc, dr) };
    hi - lo + SQRT2 * lo
}

fn endpoint(map: &GridMap, p: &Pose, what: &str) -> Result<usize> {
    map.cell_of(p)
        .filter(|c| map.is_free_cell(*c))
        .map(|c| map.index(c))
        .ok_or_else(|| Error::InvalidArgument(format!("{what} {p} is not in free space")))
}

/// Minimum-cost 8-connected path from `start` to `goal` (A*, octile heuristic).
///
/// Waypoints are the centers of the start cell, every turn of the grid path,
/// and the goal cell, so the polyline length equals the grid cost.
pub fn plan_path(map: &GridMap, start: &Pose, goal: &Pose) -> Result<Path> {
    let s = endpoint(map, start, "start")?;
    let g = endpoint(map, goal, "goal")?;
    if s == g {
        return Ok(Path::single(map.center(map.cell_at(s))));
    }

    let n = map.len();
    let mut cost = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    cost[s] = 0.0;
    heap.push(Node { f: octile(map, s, g), idx: s });

    while let Some(Node { idx, .. }) = heap.pop() {
        if closed[idx] {
            continue;
        }
        if idx == g {
            break;
        }
        closed[idx] = true;
        let base = cost[idx];
        for_each_move(map, idx, |next, step| {
            let c = base + step;
            if c < cost[next] {
                cost[next] = c;
                parent[next] = idx;
                heap.push(Node { f: c + octile(map, next, g), idx: next });
            }
        });
    }
    if !cost[g].is_finite() {
        return Err(Error::NoPath { from: start.to_string(), to: goal.to_string() });
    }
    Ok(build_path(map, &parent, s, g, cost[g]))
}

fn build_path(map: &GridMap, parent: &[usize], s: usize, g: usize, cost_cells: f64) -> Path {
    let mut cells = vec![g];
    let mut cur = g;
    while cur != s {
        cur = parent[cur];
        cells.push(cur);
    }
    cells.reverse();
    Path { waypoints: compress(map, &cells), length: cost_cells * map.resolution() }
}

/// Keeps only the cells where the move direction changes.
fn compress(map: &GridMap, cells: &[usize]) -> Vec<Pose> {
    let dir = |a: usize, b: usize| {
        let (ca, cb) = (map.cell_at(a), map.cell_at(b));
        (cb.row as isize - ca.row as isize, cb.col as isize - ca.col as isize)
    };
    let mut out = vec![map.center(map.cell_at(cells[0]))];
    for i in 1..cells.len() {
        let last = i + 1 == cells.len();
        if last || dir(cells[i - 1], cells[i]) != dir(cells[i], cells[i + 1]) {
            out.push(map.center(map.cell_at(cells[i])));
        }
    }
    out
}

/// Single-source shortest-path costs to every cell (Dijkstra), used when one
/// agent needs paths to many goals.
#[derive(Debug, Clone)]
pub struct CostField {
    source: usize,
    cost: Vec<f64>,
    parent: Vec<usize>,
    resolution: f64,
}

impl CostField {
    pub fn new(map: &GridMap, start: &Pose) -> Result<Self> {
        let s = endpoint(map, start, "start")?;
        let n = map.len();
        let mut cost = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        cost[s] = 0.0;
        heap.push(Node { f: 0.0, idx: s });
        while let Some(Node { f, idx }) = heap.pop() {
            if f > cost[idx] {
                continue;
            }
            for_each_move(map, idx, |next, step| {
                let c = f + step;
                if c < cost[next] {
                    cost[next] = c;
                    parent[next] = idx;
                    heap.push(Node { f: c, idx: next });
                }
            });
        }
        Ok(Self { source: s, cost, parent, resolution: map.resolution() })
    }

    /// Path cost in meters to `cell`, `None` when unreachable.
    pub fn cost_to(&self, cell: Cell, map: &GridMap) -> Option<f64> {
        let c = self.cost[map.index(cell)];
        c.is_finite().then_some(c * self.resolution)
    }

    pub fn path_to(&self, map: &GridMap, goal: Cell) -> Option<Path> {
        let g = map.index(goal);
        let c = self.cost[g];
        if !c.is_finite() {
            return None;
        }
        if g == self.source {
            return Some(Path::single(map.center(goal)));
        }
        Some(build_path(map, &self.parent, self.source, g, c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::line_of_sight;

    #[test]
    fn same_start_and_goal() {
        let map = GridMap::open(5, 5, 1.0).unwrap();
        let p = Pose::new(2.5, 2.5);
        let path = plan_path(&map, &p, &p).unwrap();
        assert_eq!(path.waypoints.len(), 1);
        assert_eq!(path.length, 0.0);
    }

    #[test]
    fn open_corner_to_corner() {
        let map = GridMap::open(10, 10, 1.0).unwrap();
        let path = plan_path(&map, &Pose::new(0.5, 0.5), &Pose::new(9.5, 9.5)).unwrap();
        assert!((path.length - 9.0 * SQRT2).abs() < 1e-9);
        assert_eq!(path.waypoints.len(), 2);
        assert!((path.polyline_length() - path.length).abs() < 1e-9);
    }

    #[test]
    fn enclosed_goal_has_no_path() {
        let map = GridMap::parse("5 5 1.0\n.....\n.###.\n.#.#.\n.###.\n.....\n").unwrap();
        let err = plan_path(&map, &Pose::new(0.5, 0.5), &Pose::new(2.5, 2.5)).unwrap_err();
        assert!(matches!(err, Error::NoPath { .. }));
    }

    #[test]
    fn detour_segments_are_visible() {
        let map = GridMap::parse("6 5 1.0\n......\n.####.\n.#....\n.#.##.\n......\n").unwrap();
        let path = plan_path(&map, &Pose::new(0.5, 4.5), &Pose::new(2.5, 1.5)).unwrap();
        for w in path.waypoints.windows(2) {
            assert!(line_of_sight(&map, &w[0], &w[1]), "{} -> {}", w[0], w[1]);
        }
        assert!((path.polyline_length() - path.length).abs() < 1e-9);
    }

    #[test]
    fn cost_field_agrees_with_astar() {
        let map = GridMap::parse("6 5 1.0\n......\n.####.\n.#....\n.#.##.\n......\n").unwrap();
        let start = Pose::new(0.5, 4.5);
        let field = CostField::new(&map, &start).unwrap();
        for i in map.free_indices().collect::<Vec<_>>() {
            let goal = map.center(map.cell_at(i));
            let a = plan_path(&map, &start, &goal).unwrap();
            let b = field.path_to(&map, map.cell_at(i)).unwrap();
            assert!((a.length - b.length).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_spacing() {
        let pts = [Pose::new(0.0, 0.0), Pose::new(1.0, 0.0), Pose::new(1.0, 1.0)];
        let r = resample_polyline(&pts, 0.4);
        assert_eq!(r.first(), Some(&Pose::new(0.0, 0.0)));
        assert_eq!(r.last(), Some(&Pose::new(1.0, 1.0)));
        for w in r.windows(2) {
            assert!(w[0].distance(&w[1]) <= 0.4 + 1e-9);
        }
        assert_eq!(r.len(), 6);
    }
}
