//! Uniform periodic spatial grid on `[-L, L)`.
//!
//! The node count is a power of two so FFT sizes stay fast and the spacing
//! `h = 2L / M` is exact in binary floating point. Node `m` sits at
//! `x_m = -L + m h`, so `x = 0` is always the node with index `M / 2`.

use crate::error::{Error, Result};

/// Uniform periodic grid on `[-L, L)` with a power-of-two node count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    half_width: f64,
    count: usize,
}

impl Grid1D {
    /// Builds a grid with half-width `l` and `m` nodes.
    ///
    /// `m` must be a power of two and `l` positive and finite.
    pub fn new(l: f64, m: usize) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::BadHalfWidth { l });
        }
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::NotPowerOfTwo { m });
        }
        Ok(Grid1D { half_width: l, count: m })
    }

    /// Half-width `L`; the domain is `[-L, L)`.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Number of nodes `M`.
    pub fn len(&self) -> usize {
        self.count
    }

    /// Grid spacing `h = 2L / M` (exact: division by a power of two).
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.count as f64
    }

    /// Position of node `m`.
    pub fn node(&self, m: usize) -> f64 {
        debug_assert!(m < self.count);
        -self.half_width + m as f64 * self.spacing()
    }

    /// Iterator over all node positions.
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |m| self.node(m))
    }

    /// Index of the node at position `x`, if `x` lies on the lattice.
    ///
    /// The match tolerance is a tiny fraction of the spacing, so genuinely
    /// off-lattice positions are rejected rather than silently rounded.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let h = self.spacing();
        let raw = (x + self.half_width) / h;
        let idx = raw.round();
        if idx < 0.0 || idx >= self.count as f64 {
            return None;
        }
        let m = idx as usize;
        if (self.node(m) - x).abs() <= 1e-9 * h {
            Some(m)
        } else {
            None
        }
    }
}
