use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Region {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        if (0..3).any(|a| !(max[a] > min[a])) {
            return Err(Error::invalid(format!(
                "region max {max:?} must exceed min {min:?} on every axis"
            )));
        }
        Ok(Self { min, max })
    }

    /// Cube of side `side` centred at the origin.
    pub fn centered_cube(side: f64) -> Result<Self> {
        let h = 0.5 * side;
        Self::new([-h; 3], [h; 3])
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn volume(&self) -> f64 {
        self.extent().iter().product()
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }
}

/// Uniform cell-centred grid over a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub region: Region,
    pub dims: [usize; 3],
}

impl Grid {
    pub fn new(region: Region, dims: [usize; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid(format!("grid dimensions {dims:?} must be >= 1")));
        }
        Ok(Self { region, dims })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 3] {
        let e = self.region.extent();
        [
            e[0] / self.dims[0] as f64,
            e[1] / self.dims[1] as f64,
            e[2] / self.dims[2] as f64,
        ]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Linear index, x fastest.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn center(&self, idx: usize) -> Vector3<f64> {
        let [i, j, k] = self.unravel(idx);
        let h = self.spacing();
        Vector3::new(
            self.region.min[0] + (i as f64 + 0.5) * h[0],
            self.region.min[1] + (j as f64 + 0.5) * h[1],
            self.region.min[2] + (k as f64 + 0.5) * h[2],
        )
    }

    pub fn centers(&self) -> Vec<Vector3<f64>> {
        (0..self.len()).map(|i| self.center(i)).collect()
    }

    /// Cell containing `p`, using half-open cells `[lo, hi)`; the upper face
    /// of the region belongs to the last cell.
    pub fn locate(&self, p: &Vector3<f64>) -> Option<usize> {
        if !self.region.contains(p) {
            return None;
        }
        let h = self.spacing();
        let mut ijk = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.region.min[a]) / h[a]).floor() as isize;
            ijk[a] = f.clamp(0, self.dims[a] as isize - 1) as usize;
        }
        Some(self.index(ijk[0], ijk[1], ijk[2]))
    }
}
