//! Static environment: the a-priori known occupancy map, geometric queries
//! and global path planning.
//!
//! Cell `(row, col)` spans `x ∈ [col·res, (col+1)·res)` and
//! `y ∈ [(height-1-row)·res, (height-row)·res)`; row 0 is the top of the map.

mod geometry;
mod path;

use std::fmt;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use geometry::{line_of_sight, visible_cells, FovScratch};
pub use path::{plan_path, CostField, Path};
pub(crate) use path::resample_polyline;

/// A point in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

/// Grid cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Known static occupancy of the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    resolution: f64,
    obstacle: Vec<bool>,
    free_count: usize,
}

impl GridMap {
    /// Builds a map from a row-major obstacle mask (row 0 on top).
    pub fn new(width: usize, height: usize, resolution: f64, obstacle: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("map dimensions must be positive".into()));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidArgument(format!("resolution must be > 0, got {resolution}")));
        }
        if obstacle.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", width, height),
                found: format!("{} cells", obstacle.len()),
            });
        }
        let free_count = obstacle.iter().filter(|o| !**o).count();
        Ok(Self { width, height, resolution, obstacle, free_count })
    }

    /// An obstacle-free map.
    pub fn open(width: usize, height: usize, resolution: f64) -> Result<Self> {
        Self::new(width, height, resolution, vec![false; width * height])
    }

    /// Parses the ASCII map format: a `width height resolution` header followed
    /// by `height` rows of `width` characters from `{'.', '#'}`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::MapParse { line: 1, msg: "missing header".into() })?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::MapParse {
                line: hline + 1,
                msg: format!("expected `width height resolution`, got {header:?}"),
            });
        }
        let bad = |what: &str| Error::MapParse { line: hline + 1, msg: format!("bad {what}") };
        let width: usize = parts[0].parse().map_err(|_| bad("width"))?;
        let height: usize = parts[1].parse().map_err(|_| bad("height"))?;
        let resolution: f64 = parts[2].parse().map_err(|_| bad("resolution"))?;
        if width == 0 || height == 0 || !(resolution > 0.0) {
            return Err(bad("dimensions"));
        }

        let mut obstacle = Vec::with_capacity(width * height);
        let mut rows = 0;
        for (lineno, line) in lines {
            let row = line.trim_end();
            if rows == height {
                return Err(Error::DimensionMismatch {
                    expected: format!("{height} rows"),
                    found: format!("extra row at line {}", lineno + 1),
                });
            }
            if row.chars().count() != width {
                return Err(Error::MapParse {
                    line: lineno + 1,
                    msg: format!("row has {} characters, expected {width}", row.chars().count()),
                });
            }
            for ch in row.chars() {
                match ch {
                    '.' => obstacle.push(false),
                    '#' => obstacle.push(true),
                    other => {
                        return Err(Error::MapParse {
                            line: lineno + 1,
                            msg: format!("unexpected character {other:?}"),
                        })
                    }
                }
            }
            rows += 1;
        }
        if rows != height {
            return Err(Error::DimensionMismatch {
                expected: format!("{height} rows"),
                found: format!("{rows} rows"),
            });
        }
        Self::new(width, height, resolution, obstacle)
    }

    /// Renders the map back into the ASCII format.
    pub fn to_ascii(&self) -> String {
        let mut out = format!("{} {} {}\n", self.width, self.height, self.resolution);
        for row in 0..self.height {
            for col in 0..self.width {
                out.push(if self.obstacle[row * self.width + col] { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.obstacle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacle.is_empty()
    }

    /// Width and height in meters.
    pub fn extent(&self) -> (f64, f64) {
        (self.width as f64 * self.resolution, self.height as f64 * self.resolution)
    }

    pub fn free_count(&self) -> usize {
        self.free_count
    }

    pub fn obstacle_count(&self) -> usize {
        self.len() - self.free_count
    }

    pub fn has_obstacles(&self) -> bool {
        self.free_count != self.len()
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.width, index % self.width)
    }

    /// Cell containing `p`, or `None` when out of bounds.
    pub fn cell_of(&self, p: &Pose) -> Option<Cell> {
        if !p.is_finite() || p.x < 0.0 || p.y < 0.0 {
            return None;
        }
        let col = (p.x / self.resolution).floor() as usize;
        let vrow = (p.y / self.resolution).floor() as usize;
        if col >= self.width || vrow >= self.height {
            return None;
        }
        Some(Cell::new(self.height - 1 - vrow, col))
    }

    /// Center of a cell in world coordinates.
    pub fn center(&self, cell: Cell) -> Pose {
        Pose::new(
            (cell.col as f64 + 0.5) * self.resolution,
            ((self.height - 1 - cell.row) as f64 + 0.5) * self.resolution,
        )
    }

    #[inline]
    pub fn is_free_cell(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width && !self.obstacle[self.index(cell)]
    }

    #[inline]
    pub fn is_free_index(&self, index: usize) -> bool {
        !self.obstacle[index]
    }

    /// True iff `p` is in bounds and its cell is free.
    pub fn is_free(&self, p: &Pose) -> bool {
        self.cell_of(p).is_some_and(|c| self.is_free_cell(c))
    }

    /// Indices of all free cells in row-major order.
    pub fn free_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.obstacle.iter().enumerate().filter(|(_, o)| !**o).map(|(i, _)| i)
    }

    /// 8-connected neighbours inside the map.
    pub fn neighbors8(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        const OFFSETS: [(isize, isize); 8] =
            [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        OFFSETS.iter().filter_map(move |&(dr, dc)| {
            let r = cell.row as isize + dr;
            let c = cell.col as isize + dc;
            (r >= 0 && c >= 0 && (r as usize) < self.height && (c as usize) < self.width)
                .then(|| Cell::new(r as usize, c as usize))
        })
    }

    /// Free cell nearest to `p` (by center distance), ties to the lowest index.
    pub fn nearest_free(&self, p: &Pose) -> Option<Cell> {
        if let Some(c) = self.cell_of(p) {
            if self.is_free_cell(c) {
                return Some(c);
            }
        }
        let mut best: Option<(f64, usize)> = None;
        for i in self.free_indices() {
            let d = self.center(self.cell_at(i)).distance(p);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| self.cell_at(i))
    }
}

/// Reads a map file in the ASCII map format.
pub fn load_map(path: impl AsRef<FsPath>) -> Result<GridMap> {
    let text = std::fs::read_to_string(path)?;
    GridMap::parse(&text)
}

/// True iff `p` lies within bounds and its cell is free.
pub fn is_free(map: &GridMap, p: &Pose) -> bool {
    map.is_free(p)
}
