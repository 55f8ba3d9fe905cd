//! Numerical lab for the 1D Schrödinger equation with narrow or
//! point-concentrated nonlinearities.
//!
//! Two flows are implemented side by side:
//!
//! * a **scaled flow**: `i d/dt psi = -psi_xx + (1/eps) V((x - y)/eps) |psi|^{2 mu} psi`,
//!   integrated by Strang splitting with an exact spectral free step and an
//!   exact nonlinear phase step;
//! * a **point flow**: the `eps -> 0` limit, where the nonlinearity acts only
//!   through the boundary values at the defect sites and the solution is
//!   recovered from a system of weakly singular Volterra integral equations
//!   for the site traces.
//!
//! The [`diagnostics`] and [`harness`] modules measure how fast the scaled
//! flow approaches the point flow as `eps` shrinks, which is the experiment
//! this crate exists to run.

pub mod abel;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod export;
pub mod grid;
pub mod harness;
pub mod field;
pub mod fft;
pub mod point;
pub mod potential;
pub mod problem;
pub mod propagator;
pub mod scaled;

pub use error::{Error, Result};
pub use field::ComplexField;
pub use grid::Grid1D;
