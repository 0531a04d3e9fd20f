//! Scalar planes over the pixel lattice.
//!
//! [`Grid`] is any finite field on an `height x width` lattice, stored
//! row-major. Propagation works on grids because intermediate states of a
//! signed-affinity run may leave the nonnegative range. [`DepthGrid`] adds
//! the depth convention: values are meters, `> 0` is a measurement and `0`
//! marks a missing pixel.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape(
                "grid dims",
                "height >= 1 and width >= 1",
                format!("{height}x{width}"),
            ));
        }
        if values.len() != height * width {
            return Err(Error::shape(
                "grid values",
                format!("{} values for {height}x{width}", height * width),
                values.len(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid("grid values", format!("non-finite value at index {i}")));
        }
        Ok(Self { height, width, values })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                values.push(f(i, j));
            }
        }
        Self::new(height, width, values)
    }

    /// Kernel outputs are finite by construction; debug builds still check.
    pub(crate) fn from_kernel(height: usize, width: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        debug_assert!(
            values.iter().all(|v| v.is_finite()),
            "kernel produced a non-finite value"
        );
        Self { height, width, values }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Grid) -> f64 {
        assert_eq!(self.dims(), other.dims(), "grid dims differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Depth map in meters. Negative values are rejected; `0` means missing.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthGrid(Grid);

impl DepthGrid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Self::from_grid(Grid::new(height, width, values)?)
    }

    pub fn from_grid(grid: Grid) -> Result<Self> {
        if let Some(i) = grid.values.iter().position(|&v| v < 0.0) {
            return Err(Error::invalid(
                "depth values",
                format!("negative depth {} at index {i}", grid.values[i]),
            ));
        }
        Ok(Self(grid))
    }

    /// Maps negative values to the missing marker. Returns the grid and how
    /// many pixels were clamped.
    pub fn from_grid_clamped(grid: Grid) -> (Self, usize) {
        let mut clamped = 0;
        let (h, w) = grid.dims();
        let values = grid
            .into_values()
            .into_iter()
            .map(|v| {
                if v < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    v
                }
            })
            .collect();
        (
            Self(Grid {
                height: h,
                width: w,
                values,
            }),
            clamped,
        )
    }

    pub fn as_grid(&self) -> &Grid {
        &self.0
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }

    pub fn valid_count(&self) -> usize {
        self.0.values.iter().filter(|&&v| v > 0.0).count()
    }

    #[inline]
    pub fn is_valid(&self, index: usize) -> bool {
        self.0.values[index] > 0.0
    }
}

impl std::ops::Deref for DepthGrid {
    type Target = Grid;

    fn deref(&self) -> &Grid {
        &self.0
    }
}

impl AsRef<Grid> for DepthGrid {
    fn as_ref(&self) -> &Grid {
        &self.0
    }
}

impl AsRef<Grid> for Grid {
    fn as_ref(&self) -> &Grid {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::new(0, 3, vec![]).is_err());
        assert!(Grid::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Grid::new(1, 1, vec![f64::NAN]).is_err());
        assert!(Grid::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn depth_validity_convention() {
        assert!(DepthGrid::new(1, 2, vec![1.0, -0.5]).is_err());
        let d = DepthGrid::new(1, 3, vec![0.0, 2.0, 3.5]).unwrap();
        assert_eq!(d.valid_count(), 2);
        assert!(!d.is_valid(0));
        assert!(d.is_valid(1));
    }

    #[test]
    fn clamped_conversion_counts() {
        let g = Grid::new(1, 3, vec![-1.0, 0.0, 2.0]).unwrap();
        let (d, n) = DepthGrid::from_grid_clamped(g);
        assert_eq!(n, 1);
        assert_eq!(d.values(), &[0.0, 0.0, 2.0]);
    }
}
