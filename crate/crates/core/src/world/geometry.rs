use super::{GridMap, Pose};

const TIE_EPS: f64 = 1e-12;

/// True iff the segment `a → b` crosses no obstacle cell.
///
/// Grid ray traversal in cell units. When the segment passes exactly through
/// a cell corner both side cells are checked, so diagonal squeezes between two
/// obstacles touching at a corner are blocked.
pub fn line_of_sight(map: &GridMap, a: &Pose, b: &Pose) -> bool {
    if !map.is_free(a) || !map.is_free(b) {
        return false;
    }
    let res = map.resolution();
    let (u0, v0) = (a.x / res, a.y / res);
    let (u1, v1) = (b.x / res, b.y / res);
    let (mut cx, mut cy) = (u0.floor() as i64, v0.floor() as i64);
    let (ex, ey) = (u1.floor() as i64, v1.floor() as i64);
    let (du, dv) = (u1 - u0, v1 - v0);

    let step_x: i64 = if du > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dv > 0.0 { 1 } else { -1 };
    let t_delta_x = if du != 0.0 { 1.0 / du.abs() } else { f64::INFINITY };
    let t_delta_y = if dv != 0.0 { 1.0 / dv.abs() } else { f64::INFINITY };
    let mut t_max_x = if du > 0.0 {
        ((cx + 1) as f64 - u0) / du
    } else if du < 0.0 {
        (u0 - cx as f64) / -du
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dv > 0.0 {
        ((cy + 1) as f64 - v0) / dv
    } else if dv < 0.0 {
        (v0 - cy as f64) / -dv
    } else {
        f64::INFINITY
    };

    let free = |x: i64, y: i64| -> bool {
        if x < 0 || y < 0 || x as usize >= map.width() || y as usize >= map.height() {
            return false;
        }
        let row = map.height() - 1 - y as usize;
        map.is_free_index(row * map.width() + x as usize)
    };

    let budget = (ex - cx).unsigned_abs() + (ey - cy).unsigned_abs() + 2;
    let mut steps = 0;
    while (cx, cy) != (ex, ey) {
        if steps > budget {
            // numeric drift at an exact boundary; the end cell is checked below
            break;
        }
        steps += 1;
        if t_max_x < t_max_y - TIE_EPS {
            cx += step_x;
            t_max_x += t_delta_x;
        } else if t_max_y < t_max_x - TIE_EPS {
            cy += step_y;
            t_max_y += t_delta_y;
        } else {
            if !free(cx + step_x, cy) || !free(cx, cy + step_y) {
                return false;
            }
            cx += step_x;
            cy += step_y;
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        }
        if !free(cx, cy) {
            return false;
        }
    }
    free(ex, ey)
}

/// Reusable buffers for field-of-view queries.
#[derive(Debug, Default, Clone)]
pub struct FovScratch {
    offsets: Vec<(isize, isize)>,
    radius_cells: isize,
    cached_key: Option<(u64, u64)>,
}

impl FovScratch {
    fn offsets_for(&mut self, range: f64, res: f64) -> &[(isize, isize)] {
        let key = (range.to_bits(), res.to_bits());
        if self.cached_key != Some(key) {
            let r = (range / res).ceil() as isize + 1;
            self.radius_cells = r;
            self.offsets.clear();
            for dr in -r..=r {
                for dc in -r..=r {
                    self.offsets.push((dr, dc));
                }
            }
            self.cached_key = Some(key);
        }
        &self.offsets
    }
}

/// Appends to `out` the indices of free cells whose centers are within
/// `range` of `pose` and visible from it.
pub fn visible_cells(
    map: &GridMap,
    pose: &Pose,
    range: f64,
    scratch: &mut FovScratch,
    out: &mut Vec<usize>,
) {
    let Some(origin) = map.cell_of(pose) else { return };
    if !map.is_free_cell(origin) {
        return;
    }
    let res = map.resolution();
    let range_sq = range * range;
    let (h, w) = (map.height() as isize, map.width() as isize);
    let obstacles = map.has_obstacles();
    for &(dr, dc) in scratch.offsets_for(range, res) {
        let (r, c) = (origin.row as isize + dr, origin.col as isize + dc);
        if r < 0 || c < 0 || r >= h || c >= w {
            continue;
        }
        let idx = r as usize * map.width() + c as usize;
        if !map.is_free_index(idx) {
            continue;
        }
        let center = map.center(map.cell_at(idx));
        let (dx, dy) = (center.x - pose.x, center.y - pose.y);
        if dx * dx + dy * dy > range_sq {
            continue;
        }
        if obstacles && !line_of_sight(map, pose, &center) {
            continue;
        }
        out.push(idx);
    }
}
