//! BEV occupancy grid and box rasterization.
//!
//! Cell `(i, j)` covers `[x_min + i·g, x_min + (i+1)·g) × [y_min + j·g, y_min + (j+1)·g)`.
//! The extent is widened on the max side to a whole number of cells.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::sat::overlaps_with_area;
use crate::error::{Error, Result};
use crate::types::OrientedBox;

/// Containment tolerance for cell centres lying on a box boundary.
const CENTER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Extent {
    fn default() -> Self {
        Extent {
            x_min: -20.0,
            x_max: 60.0,
            y_min: -40.0,
            y_max: 40.0,
        }
    }
}

/// How an obstacle box marks cells of the occupancy grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OccupancyRule {
    /// Any cell sharing positive area with the box.
    #[default]
    Cover,
    /// Cells whose centre lies inside the box (same rule as the ego footprint).
    Center,
}

pub type Cell = (usize, usize);

#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    grid_size: f64,
    extent: Extent,
    nx: usize,
    ny: usize,
    occupied: HashSet<Cell>,
}

impl OccupancyGrid {
    pub fn empty(grid_size: f64, extent: Extent) -> Result<Self> {
        if !(grid_size.is_finite() && grid_size > 0.0) {
            return Err(Error::config("grid_size", format!("must be > 0, got {grid_size}")));
        }
        let w = extent.x_max - extent.x_min;
        let h = extent.y_max - extent.y_min;
        if !(w > 0.0 && h > 0.0) {
            return Err(Error::config("extent", "must be non-empty"));
        }
        let nx = (w / grid_size - 1e-9).ceil() as usize;
        let ny = (h / grid_size - 1e-9).ceil() as usize;
        let extent = Extent {
            x_max: extent.x_min + nx as f64 * grid_size,
            y_max: extent.y_min + ny as f64 * grid_size,
            ..extent
        };
        Ok(OccupancyGrid {
            grid_size,
            extent,
            nx,
            ny,
            occupied: HashSet::new(),
        })
    }

    /// Grid with every box marked under `rule`; boxes outside the extent are clipped.
    pub fn from_boxes<'a>(
        grid_size: f64,
        extent: Extent,
        boxes: impl IntoIterator<Item = &'a OrientedBox>,
        rule: OccupancyRule,
    ) -> Result<Self> {
        let mut grid = OccupancyGrid::empty(grid_size, extent)?;
        for b in boxes {
            grid.mark_box(b, rule);
        }
        Ok(grid)
    }

    pub fn mark_box(&mut self, b: &OrientedBox, rule: OccupancyRule) {
        let cells = match rule {
            OccupancyRule::Cover => rasterize_box_cover(b, self),
            OccupancyRule::Center => rasterize_box(b, self),
        };
        self.occupied.extend(cells);
    }

    pub fn grid_size(&self) -> f64 {
        self.grid_size
    }

    pub fn extent(&self) -> Extent {
        self.extent
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.occupied.contains(&cell)
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.len()
    }

    pub fn cell_center(&self, (i, j): Cell) -> (f64, f64) {
        (
            self.extent.x_min + (i as f64 + 0.5) * self.grid_size,
            self.extent.y_min + (j as f64 + 0.5) * self.grid_size,
        )
    }

    /// Index range of cells along one axis whose centres fall in `[lo, hi]`.
    fn center_range(&self, lo: f64, hi: f64, origin: f64, n: usize) -> Option<(usize, usize)> {
        let g = self.grid_size;
        let first = ((lo - origin) / g - 0.5 - 1e-9).ceil().max(0.0);
        let last = ((hi - origin) / g - 0.5 + 1e-9).floor().min(n as f64 - 1.0);
        (first <= last).then_some((first as usize, last as usize))
    }

    /// Index range of cells along one axis whose span meets `(lo, hi)`.
    fn span_range(&self, lo: f64, hi: f64, origin: f64, n: usize) -> Option<(usize, usize)> {
        let g = self.grid_size;
        let first = ((lo - origin) / g).floor().max(0.0);
        let last = ((hi - origin) / g).ceil().min(n as f64) - 1.0;
        (first <= last).then_some((first as usize, last as usize))
    }
}

/// Cells whose centre lies inside or on the boundary of `b`, row-major sorted.
pub fn rasterize_box(b: &OrientedBox, grid: &OccupancyGrid) -> Vec<Cell> {
    let (x0, x1, y0, y1) = b.aabb();
    let e = grid.extent;
    let (Some((i0, i1)), Some((j0, j1))) = (
        grid.center_range(x0, x1, e.x_min, grid.nx),
        grid.center_range(y0, y1, e.y_min, grid.ny),
    ) else {
        return Vec::new();
    };
    let mut cells = Vec::new();
    for i in i0..=i1 {
        for j in j0..=j1 {
            let (cx, cy) = grid.cell_center((i, j));
            if b.contains(cx, cy, CENTER_TOL) {
                cells.push((i, j));
            }
        }
    }
    cells
}

/// Cells sharing positive area with `b`, row-major sorted.
pub fn rasterize_box_cover(b: &OrientedBox, grid: &OccupancyGrid) -> Vec<Cell> {
    let (x0, x1, y0, y1) = b.aabb();
    let e = grid.extent;
    let (Some((i0, i1)), Some((j0, j1))) = (
        grid.span_range(x0, x1, e.x_min, grid.nx),
        grid.span_range(y0, y1, e.y_min, grid.ny),
    ) else {
        return Vec::new();
    };
    let g = grid.grid_size;
    let mut cells = Vec::new();
    for i in i0..=i1 {
        for j in j0..=j1 {
            let (cx, cy) = grid.cell_center((i, j));
            let cell = OrientedBox {
                cx,
                cy,
                heading: 0.0,
                length: g,
                width: g,
            };
            if overlaps_with_area(&cell, b) {
                cells.push((i, j));
            }
        }
    }
    cells
}
