use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of cells along each axis.
pub const MIN_CELLS: usize = 16;
/// Required clearance, in cells, between a shape and the grid frame.
pub const MARGIN_CELLS: f64 = 4.0;

/// Uniform cell-centred grid in 2 or 3 dimensions.
///
/// Cell `(i, j, k)` covers `origin + h·[i, i+1] × [j, j+1] × [k, k+1]`; the
/// flat index runs fastest along the first axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub cells_per_axis: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: f64,
}

impl GridSpec {
    pub fn new(dim: usize, cells_per_axis: Vec<usize>, origin: Vec<f64>, spacing: f64) -> Result<Self> {
        let spec = Self { dim, cells_per_axis, origin, spacing };
        spec.validate()?;
        Ok(spec)
    }

    /// `n` cells per axis covering the cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, n: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::Spec(format!("empty box [{lo}, {hi}]")));
        }
        Self::new(dim, vec![n; dim], vec![lo; dim], (hi - lo) / n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::Spec(format!("dimension must be 2 or 3, got {}", self.dim)));
        }
        if self.cells_per_axis.len() != self.dim || self.origin.len() != self.dim {
            return Err(Error::Spec("axis vectors do not match the dimension".into()));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::Spec(format!("spacing must be positive, got {}", self.spacing)));
        }
        if let Some(&n) = self.cells_per_axis.iter().find(|&&n| n < MIN_CELLS) {
            return Err(Error::Resolution(format!("at least {MIN_CELLS} cells per axis required, got {n}")));
        }
        if self.origin.iter().any(|x| !x.is_finite()) {
            return Err(Error::Spec("origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cells_per_axis.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `hⁿ`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Flat-index stride of each axis.
    pub fn strides(&self) -> [usize; 3] {
        let n = &self.cells_per_axis;
        match self.dim {
            2 => [1, n[0], 0],
            _ => [1, n[0], n[0] * n[1]],
        }
    }

    /// Cells per axis padded to three entries (`1` for an absent axis).
    pub fn shape3(&self) -> [usize; 3] {
        let n = &self.cells_per_axis;
        [n[0], n[1], if self.dim == 3 { n[2] } else { 1 }]
    }

    pub fn unflatten(&self, mut idx: usize) -> [usize; 3] {
        let s = self.shape3();
        let i = idx % s[0];
        idx /= s[0];
        let j = idx % s[1];
        [i, j, idx / s[1]]
    }

    pub fn flatten(&self, ijk: [usize; 3]) -> usize {
        let s = self.shape3();
        ijk[0] + s[0] * (ijk[1] + s[1] * ijk[2])
    }

    pub fn cell_center(&self, idx: usize) -> Vec<f64> {
        let ijk = self.unflatten(idx);
        (0..self.dim).map(|d| self.origin[d] + (ijk[d] as f64 + 0.5) * self.spacing).collect()
    }

    pub fn cell_lower(&self, ijk: [usize; 3]) -> Vec<f64> {
        (0..self.dim).map(|d| self.origin[d] + ijk[d] as f64 * self.spacing).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        (0..self.dim).map(|d| self.origin[d] + self.cells_per_axis[d] as f64 * self.spacing).collect()
    }

    /// Checks that the box `[lo, hi]` lies inside the grid with the required margin.
    pub fn check_fits(&self, lo: &[f64], hi: &[f64]) -> Result<()> {
        let margin = MARGIN_CELLS * self.spacing;
        let up = self.upper();
        for d in 0..self.dim {
            if lo[d] < self.origin[d] + margin - 1e-12 || hi[d] > up[d] - margin + 1e-12 {
                return Err(Error::Bounds(format!(
                    "extent [{:.4}, {:.4}] on axis {d} leaves less than {MARGIN_CELLS}h to the frame [{:.4}, {:.4}]",
                    lo[d], hi[d], self.origin[d], up[d]
                )));
            }
        }
        Ok(())
    }

    /// Whether the cell lies on the outermost layer of the grid.
    pub fn is_frame(&self, idx: usize) -> bool {
        let ijk = self.unflatten(idx);
        let s = self.shape3();
        (0..self.dim).any(|d| ijk[d] == 0 || ijk[d] + 1 == s[d])
    }

    pub fn same_grid(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::Spec("grid specs differ".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_coarse_or_bad_grids() {
        assert!(matches!(GridSpec::cube(2, 8, 0.0, 1.0), Err(Error::Resolution(_))));
        assert!(GridSpec::cube(4, 32, 0.0, 1.0).is_err());
        assert!(GridSpec::new(2, vec![32, 32], vec![0.0, 0.0], 0.0).is_err());
        assert!(GridSpec::new(2, vec![32], vec![0.0, 0.0], 0.1).is_err());
    }

    #[test]
    fn flat_index_roundtrip() {
        let g = GridSpec::new(3, vec![16, 17, 18], vec![0.0; 3], 0.1).unwrap();
        for idx in [0, 1, 16, 17 * 16, g.len() - 1] {
            assert_eq!(g.flatten(g.unflatten(idx)), idx);
        }
        assert_eq!(g.strides(), [1, 16, 16 * 17]);
    }

    #[test]
    fn fit_check_uses_margin() {
        let g = GridSpec::cube(2, 100, -1.0, 1.0).unwrap();
        assert!(g.check_fits(&[-0.9, -0.9], &[0.9, 0.9]).is_ok());
        assert!(g.check_fits(&[-0.95, 0.0], &[0.0, 0.1]).is_err());
    }
}
