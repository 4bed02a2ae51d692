//! Structured discretization of axis-aligned rectangles and intervals,
//! with exact boundary distance and boundary-strip utilities.

use crate::{Error, Result};

/// Uniform tensor-product grid on an interval or rectangle.
///
/// Nodes are numbered row-major: index = `iy * nx + ix` in 2-D, `ix` in 1-D.
/// Cells sit between adjacent nodes; cell centers are strictly interior.
#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    extents: [(f64, f64); 2],
    resolution: [usize; 2],
    spacing: [f64; 2],
}

impl Grid {
    pub fn interval(a: f64, b: f64, resolution: usize) -> Result<Grid> {
        Self::build(1, [(a, b), (0.0, 0.0)], [resolution, 1])
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Grid> {
        Self::build(2, [x, y], [nx, ny])
    }

    fn build(dim: usize, extents: [(f64, f64); 2], resolution: [usize; 2]) -> Result<Grid> {
        for axis in 0..dim {
            let (a, b) = extents[axis];
            if !(b > a) || !a.is_finite() || !b.is_finite() {
                return Err(Error::Config(format!(
                    "degenerate extent [{a}, {b}] on axis {axis}"
                )));
            }
            if resolution[axis] < 3 {
                return Err(Error::Config(format!(
                    "resolution {} on axis {axis} is below the minimum of 3",
                    resolution[axis]
                )));
            }
        }
        let mut spacing = [0.0; 2];
        for axis in 0..dim {
            let (a, b) = extents[axis];
            spacing[axis] = (b - a) / (resolution[axis] - 1) as f64;
        }
        Ok(Grid {
            dim,
            extents,
            resolution,
            spacing,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn extents(&self) -> &[(f64, f64)] {
        &self.extents[..self.dim]
    }

    pub fn node_count(&self) -> usize {
        self.resolution[..self.dim].iter().product()
    }

    pub fn nx(&self) -> usize {
        self.resolution[0]
    }

    pub fn ny(&self) -> usize {
        if self.dim == 2 {
            self.resolution[1]
        } else {
            1
        }
    }

    pub fn cell_count(&self) -> usize {
        self.resolution[..self.dim].iter().map(|r| r - 1).product()
    }

    /// Volume of one cell (all cells are congruent).
    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    pub fn node_coord(&self, index: usize) -> [f64; 2] {
        let (ix, iy) = self.node_indices(index);
        [
            self.extents[0].0 + ix as f64 * self.spacing[0],
            if self.dim == 2 {
                self.extents[1].0 + iy as f64 * self.spacing[1]
            } else {
                0.0
            },
        ]
    }

    pub fn node_indices(&self, index: usize) -> (usize, usize) {
        (index % self.resolution[0], index / self.resolution[0])
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.resolution[0] + ix
    }

    pub fn is_boundary(&self, index: usize) -> bool {
        let (ix, iy) = self.node_indices(index);
        if ix == 0 || ix == self.resolution[0] - 1 {
            return true;
        }
        self.dim == 2 && (iy == 0 || iy == self.resolution[1] - 1)
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.node_count()).map(|i| self.is_boundary(i)).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| !self.is_boundary(i)).collect()
    }

    /// Cells are numbered row-major like nodes; returns the corner node
    /// indices, lower corner first.
    pub fn cell_corners(&self, cell: usize) -> Vec<usize> {
        if self.dim == 1 {
            vec![cell, cell + 1]
        } else {
            let cx = self.resolution[0] - 1;
            let ix = cell % cx;
            let iy = cell / cx;
            vec![
                self.node_index(ix, iy),
                self.node_index(ix + 1, iy),
                self.node_index(ix, iy + 1),
                self.node_index(ix + 1, iy + 1),
            ]
        }
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        if self.dim == 1 {
            let x = self.extents[0].0 + (cell as f64 + 0.5) * self.spacing[0];
            [x, 0.0]
        } else {
            let cx = self.resolution[0] - 1;
            let ix = cell % cx;
            let iy = cell / cx;
            [
                self.extents[0].0 + (ix as f64 + 0.5) * self.spacing[0],
                self.extents[1].0 + (iy as f64 + 0.5) * self.spacing[1],
            ]
        }
    }

    /// Exact Euclidean distance from a point to the boundary of the domain.
    /// Closed form for axis-aligned boxes: the smallest side distance.
    pub fn distance_to_boundary_at(&self, point: [f64; 2]) -> f64 {
        let mut d = f64::INFINITY;
        for axis in 0..self.dim {
            let (a, b) = self.extents[axis];
            d = d.min(point[axis] - a).min(b - point[axis]);
        }
        d.max(0.0)
    }

    /// d(x) sampled at every node. Zero exactly on boundary nodes.
    pub fn distance_to_boundary(&self) -> Vec<f64> {
        (0..self.node_count())
            .map(|i| {
                if self.is_boundary(i) {
                    0.0
                } else {
                    self.distance_to_boundary_at(self.node_coord(i))
                }
            })
            .collect()
    }

    /// Radius of the largest ball contained in the domain.
    pub fn inradius(&self) -> f64 {
        (0..self.dim)
            .map(|axis| (self.extents[axis].1 - self.extents[axis].0) / 2.0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Membership mask for the boundary strip of width `delta`, per node
    /// and per cell center.
    pub fn boundary_strip(&self, delta: f64) -> Result<StripMask> {
        if !(delta > 0.0) {
            return Err(Error::Config(format!("strip width {delta} must be positive")));
        }
        let covers_domain = delta >= self.inradius();
        let node_in_strip = (0..self.node_count())
            .map(|i| self.distance_to_boundary_at(self.node_coord(i)) < delta)
            .collect();
        let cell_in_strip = (0..self.cell_count())
            .map(|c| self.distance_to_boundary_at(self.cell_center(c)) < delta)
            .collect();
        Ok(StripMask {
            delta,
            node_in_strip,
            cell_in_strip,
            covers_domain,
        })
    }
}

/// Indicator of the boundary strip {x : d(x, boundary) < delta}.
#[derive(Debug, Clone)]
pub struct StripMask {
    pub delta: f64,
    pub node_in_strip: Vec<bool>,
    pub cell_in_strip: Vec<bool>,
    /// Set when delta reaches the inradius, so the strip swallows the whole
    /// domain and the sub/supersolution construction degenerates.
    pub covers_domain: bool,
}
