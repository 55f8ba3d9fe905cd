//! Free Schrodinger propagator: whole-line kernel values, periodic spectral
//! evolution, and time traces of the free flow at fixed sites.
//!
//! Sign convention throughout the crate: a plane wave `e^{ikx}` evolves as
//! `e^{ikx - ik^2 t}`. The whole-line kernel compatible with that choice is
//!
//! ```text
//! U(t, x) = (4 pi i t)^{-1/2} exp(i x^2 / (4 t)),
//! ```
//!
//! with the principal square root, i.e. `(4 pi i t)^{-1/2} =
//! (4 pi |t|)^{-1/2} e^{-i sign(t) pi/4}`. Its modulus depends only on `t`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Spectral;
use crate::field::ComplexField;

/// Whole-line kernel value `U(t, x)`; `t = 0` is rejected (distributional).
pub fn kernel_value(t: f64, x: f64) -> Result<Complex64> {
    if !t.is_finite() || !x.is_finite() {
        return Err(Error::BadParameter { name: "kernel argument", value: if t.is_finite() { x } else { t } });
    }
    if t == 0.0 {
        return Err(Error::ZeroTimeKernel);
    }
    let modulus = 1.0 / (4.0 * std::f64::consts::PI * t.abs()).sqrt();
    let phase = x * x / (4.0 * t) - t.signum() * std::f64::consts::FRAC_PI_4;
    let (s, c) = phase.sin_cos();
    Ok(Complex64::new(modulus * c, modulus * s))
}

/// Evolves `psi` by the free periodic flow for time `t` (any sign).
pub fn free_evolve(fft: &Spectral, psi: &ComplexField, t: f64) -> Result<ComplexField> {
    if psi.grid() != fft.grid() {
        return Err(Error::MismatchedLattices {
            what: "field grid differs from the transform grid".into(),
        });
    }
    if !t.is_finite() {
        return Err(Error::BadParameter { name: "t", value: t });
    }
    let mut buf = psi.values().to_vec();
    fft.forward(&mut buf);
    let mult = fft.free_multiplier(t);
    for (v, m) in buf.iter_mut().zip(&mult) {
        *v *= m;
    }
    fft.inverse(&mut buf);
    ComplexField::from_values(psi.grid(), buf)
}

/// Values of the free periodic flow of `psi0` at selected grid nodes, on the
/// uniform time lattice `t_n = n dt`, `n = 0..=steps`.
///
/// Returned as one row per requested node: `rows[j][n]` is the value at
/// `node_indices[j]`, time `t_n`. Each mode is advanced by multiplying with
/// its per-step rotation, and the rotations are recomputed from scratch on a
/// fixed cadence so phase drift cannot accumulate over long runs.
pub fn free_traces(
    fft: &Spectral,
    psi0: &ComplexField,
    node_indices: &[usize],
    dt: f64,
    steps: usize,
) -> Result<Vec<Vec<Complex64>>> {
    if psi0.grid() != fft.grid() {
        return Err(Error::MismatchedLattices {
            what: "field grid differs from the transform grid".into(),
        });
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::BadParameter { name: "dt", value: dt });
    }
    let m = fft.grid().len();
    for &i in node_indices {
        if i >= m {
            return Err(Error::MismatchedLattices {
                what: format!("node index {i} is outside a grid of {m} points"),
            });
        }
    }

    let mut spectrum = psi0.values().to_vec();
    fft.forward(&mut spectrum);

    // Per-site coefficient of mode j: (V_j / M) e^{2 pi i j m_site / M}.
    let coeffs: Vec<Vec<Complex64>> = node_indices
        .iter()
        .map(|&site| {
            let angle = 2.0 * std::f64::consts::PI * site as f64 / m as f64;
            spectrum
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let (s, c) = (angle * j as f64).sin_cos();
                    v * Complex64::new(c, s) / m as f64
                })
                .collect()
        })
        .collect();

    let step_phase: Vec<Complex64> = fft
        .wavenumbers()
        .iter()
        .map(|&k| {
            let (s, c) = (-k * k * dt).sin_cos();
            Complex64::new(c, s)
        })
        .collect();

    const REFRESH_EVERY: usize = 256;
    let mut rotation: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); fft.grid().len()];
    let mut rows: Vec<Vec<Complex64>> = vec![Vec::with_capacity(steps + 1); node_indices.len()];
    for n in 0..=steps {
        if n % REFRESH_EVERY == 0 {
            let t = n as f64 * dt;
            for (r, &k) in rotation.iter_mut().zip(fft.wavenumbers()) {
                let (s, c) = (-k * k * t).sin_cos();
                *r = Complex64::new(c, s);
            }
        }
        for (row, coeff) in rows.iter_mut().zip(&coeffs) {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, r) in coeff.iter().zip(&rotation) {
                acc += c * r;
            }
            row.push(acc);
        }
        for (r, p) in rotation.iter_mut().zip(&step_phase) {
            *r *= p;
        }
    }
    Ok(rows)
}
