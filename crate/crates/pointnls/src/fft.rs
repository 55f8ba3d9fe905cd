//! FFT plumbing: a per-grid spectral engine with the crate's conventions.
//!
//! Conventions, fixed once here so every consumer agrees:
//!
//! * forward transform is the unnormalized DFT `V_j = sum_m v_m e^{-2 pi i j m / M}`;
//! * the inverse applied by [`Spectral::inverse`] folds in the `1/M` factor;
//! * mode `j` carries the signed wavenumber `k_j = pi * n / L` with
//!   `n = j` for `j < M/2` and `n = j - M` otherwise.
//!
//! A plane wave `e^{i k x}` is an exact eigenvector of the discrete free
//! evolution with multiplier `e^{-i k^2 t}`, which is the sign convention of
//! `i d/dt psi = -psi_xx`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::field::ComplexField;
use crate::grid::Grid1D;

/// Planned FFTs plus the wavenumber table for one grid.
pub struct Spectral {
    grid: Grid1D,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

impl Spectral {
    pub fn new(grid: Grid1D) -> Self {
        let mut planner = FftPlanner::new();
        let m = grid.len();
        let l = grid.half_width();
        let k = (0..m)
            .map(|j| {
                let n = if j < m / 2 { j as f64 } else { j as f64 - m as f64 };
                std::f64::consts::PI * n / l
            })
            .collect();
        Spectral {
            grid,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
            k,
        }
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    /// Signed wavenumber of each mode.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    /// Scratch length sufficient for both transform directions.
    pub fn scratch_len(&self) -> usize {
        self.fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len())
    }

    /// In-place unnormalized forward DFT.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    /// In-place inverse DFT including the `1/M` normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        let scale = 1.0 / self.grid.len() as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }

    /// Forward DFT reusing caller-provided scratch.
    pub fn forward_with(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, scratch);
    }

    /// Inverse DFT (normalized) reusing caller-provided scratch.
    pub fn inverse_with(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, scratch);
        let scale = 1.0 / self.grid.len() as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }

    /// Spectral multiplier `e^{-i k^2 t}` of the free flow over time `t`.
    pub fn free_multiplier(&self, t: f64) -> Vec<Complex64> {
        self.k
            .iter()
            .map(|&k| {
                let (s, c) = (-k * k * t).sin_cos();
                Complex64::new(c, s)
            })
            .collect()
    }

    /// `||psi||^2` computed from an unnormalized spectrum.
    pub fn spectrum_mass(&self, spectrum: &[Complex64]) -> f64 {
        let w = self.grid.spacing() / self.grid.len() as f64;
        w * spectrum.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// `||psi'||^2` computed from an unnormalized spectrum.
    pub fn spectrum_kinetic(&self, spectrum: &[Complex64]) -> f64 {
        let w = self.grid.spacing() / self.grid.len() as f64;
        w * self
            .k
            .iter()
            .zip(spectrum)
            .map(|(&k, z)| k * k * z.norm_sqr())
            .sum::<f64>()
    }

    /// `(||psi||^2, ||psi'||^2)` of a field, via one forward transform.
    pub fn h1_parts(&self, field: &ComplexField) -> (f64, f64) {
        let mut buf = field.values().to_vec();
        self.forward(&mut buf);
        (self.spectrum_mass(&buf), self.spectrum_kinetic(&buf))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn round_trip_is_identity() {
        let grid = Grid1D::new(4.0, 64).unwrap();
        let sp = Spectral::new(grid);
        let field = ComplexField::from_fn(grid, |x| Complex64::new((-x * x).exp(), 0.3 * x));
        let mut buf = field.values().to_vec();
        sp.forward(&mut buf);
        sp.inverse(&mut buf);
        for (a, b) in buf.iter().zip(field.values()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn plane_wave_occupies_a_single_mode() {
        let grid = Grid1D::new(8.0, 32).unwrap();
        let sp = Spectral::new(grid);
        // k = pi * 3 / L lives in bin 3; k = -pi * 5 / L in bin M - 5.
        // Because x_0 = -L, the bin value carries the phase e^{-ikL} = (-1)^n.
        for &(n, bin) in &[(3i64, 3usize), (-5, 27)] {
            let k = std::f64::consts::PI * n as f64 / 8.0;
            let mut buf: Vec<Complex64> = grid
                .nodes()
                .map(|x| Complex64::new(0.0, k * x).exp())
                .collect();
            sp.forward(&mut buf);
            let expected = if n.rem_euclid(2) == 0 { 32.0 } else { -32.0 };
            for (j, z) in buf.iter().enumerate() {
                if j == bin {
                    assert_relative_eq!(z.re, expected, max_relative = 1e-12);
                    assert!(z.im.abs() < 1e-10);
                } else {
                    assert!(z.norm() < 1e-10, "leak into bin {j}: {z}");
                }
            }
            assert_relative_eq!(sp.wavenumbers()[bin], k, max_relative = 1e-15);
        }
    }

    #[test]
    fn h1_parts_of_a_single_mode() {
        // a e^{ikx}: ||psi||^2 = |a|^2 2L, ||psi'||^2 = k^2 |a|^2 2L.
        let grid = Grid1D::new(8.0, 64).unwrap();
        let sp = Spectral::new(grid);
        let a = Complex64::new(1.2, -0.5);
        let k = std::f64::consts::PI * 6.0 / 8.0;
        let field = ComplexField::from_fn(grid, |x| a * Complex64::new(0.0, k * x).exp());
        let (mass, kin) = sp.h1_parts(&field);
        assert_relative_eq!(mass, a.norm_sqr() * 16.0, max_relative = 1e-12);
        assert_relative_eq!(kin, k * k * a.norm_sqr() * 16.0, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_h1_parts_match_closed_forms() {
        // For e^{-x^2}: ||psi||^2 = sqrt(pi/2) and ||psi'||^2 = sqrt(pi/2).
        let grid = Grid1D::new(16.0, 1024).unwrap();
        let sp = Spectral::new(grid);
        let field = ComplexField::from_fn(grid, |x| Complex64::new((-x * x).exp(), 0.0));
        let exact = (std::f64::consts::PI / 2.0).sqrt();
        let (mass, kin) = sp.h1_parts(&field);
        assert_relative_eq!(mass, exact, max_relative = 1e-12);
        assert_relative_eq!(kin, exact, max_relative = 1e-12);
    }
}
