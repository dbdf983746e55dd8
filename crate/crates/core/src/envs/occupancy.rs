use alloc::vec;
use alloc::vec::Vec;

use crate::mdp::Extent;

pub const DEFAULT_RESOLUTION: usize = 20;

/// Square visitation grid over a planar extent.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    extent: Extent,
    resolution: usize,
    visited: Vec<bool>,
    count: usize,
}

impl OccupancyGrid {
    pub fn new(extent: Extent, resolution: usize) -> Self {
        let resolution = resolution.max(1);
        Self {
            extent,
            resolution,
            visited: vec![false; resolution * resolution],
            count: 0,
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn cells(&self) -> usize {
        self.visited.len()
    }

    fn axis_cell(&self, v: f64, lo: f64, hi: f64) -> usize {
        let n = self.resolution;
        let frac = (v - lo) / (hi - lo);
        if !(frac > 0.0) {
            return 0;
        }
        ((frac * n as f64) as usize).min(n - 1)
    }

    pub fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        (
            self.axis_cell(p[0], self.extent.min[0], self.extent.max[0]),
            self.axis_cell(p[1], self.extent.min[1], self.extent.max[1]),
        )
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        let w = self.extent.width() / self.resolution as f64;
        let h = self.extent.height() / self.resolution as f64;
        [
            self.extent.min[0] + (ix as f64 + 0.5) * w,
            self.extent.min[1] + (iy as f64 + 0.5) * h,
        ]
    }

    /// Marks the cell containing `p`; returns true if it was newly visited.
    pub fn mark(&mut self, p: [f64; 2]) -> bool {
        let (ix, iy) = self.cell_of(p);
        let cell = &mut self.visited[iy * self.resolution + ix];
        let fresh = !*cell;
        if fresh {
            *cell = true;
            self.count += 1;
        }
        fresh
    }

    pub fn visited_cells(&self) -> usize {
        self.count
    }

    pub fn fraction(&self) -> f64 {
        self.count as f64 / self.cells() as f64
    }

    pub fn clear(&mut self) {
        self.visited.iter_mut().for_each(|v| *v = false);
        self.count = 0;
    }
}

/// Fraction of `grid`'s cells containing at least one of `positions`, counting
/// cells already marked in `grid`.
pub fn coverage_fraction<I>(grid: &OccupancyGrid, positions: I) -> f64
where
    I: IntoIterator<Item = [f64; 2]>,
{
    let mut g = grid.clone();
    for p in positions {
        g.mark(p);
    }
    g.fraction()
}
