//! Complex-valued fields sampled on a [`Grid1D`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// A complex field sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid1D,
    values: Vec<Complex64>,
}

impl ComplexField {
    /// Zero field on `grid`.
    pub fn zeros(grid: Grid1D) -> Self {
        ComplexField { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Field from explicit node values; checks length and finiteness.
    pub fn from_values(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::FieldLength { got: values.len(), want: grid.len() });
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteField);
        }
        Ok(ComplexField { grid, values })
    }

    /// Field sampled from a closure `x -> value`.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.nodes().map(f).collect();
        ComplexField { grid, values }
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Discrete L2 norm `sqrt(h * sum |psi_m|^2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.spacing() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Largest modulus over the nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Node-wise difference `self - other`; grids must match.
    pub fn difference(&self, other: &ComplexField) -> Result<ComplexField> {
        if self.grid != other.grid {
            return Err(Error::MismatchedLattices { what: "grids differ".into() });
        }
        let values =
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(ComplexField { grid: self.grid, values })
    }
}
