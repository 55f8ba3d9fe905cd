//! Norms, two-flow error ladders, power-law rate fits, and the
//! derivative-jump residual.
//!
//! The convergence statements this library is built to measure all have the
//! same shape: some error between the squeezed flow at width `epsilon` and
//! the point-defect limit flow decays like `c * epsilon^delta`. This module
//! turns a pile of finished runs into those numbers: [`error_ladder`]
//! extracts the sup-in-time errors per `epsilon`, [`fit_rate`] performs the
//! log-log least-squares fit, and [`jump_residual`] checks that a
//! reconstructed field actually satisfies the derivative-jump boundary
//! condition that defines a point defect.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Spectral;
use crate::field::ComplexField;
use crate::point::{charge_nonlinearity, reconstruct_at_nodes, PointRun};
use crate::problem::PointProblem;
use crate::scaled::ScaledRun;

/// Sobolev norm `sqrt(||psi||^2 + ||psi'||^2)` with the derivative taken
/// spectrally, so band-limited fields are measured exactly.
pub fn h1_norm(fft: &Spectral, field: &ComplexField) -> f64 {
    let (mass, kinetic) = fft.h1_parts(field);
    (mass + kinetic).sqrt()
}

/// Sup-in-time errors between one squeezed run and the limit run, at a
/// fixed defect width.
///
/// `pointwise` is the largest gap between a defect-site trace of the
/// squeezed field and the corresponding limit charge; `l2` and `h1` are the
/// largest field-difference norms. All three suprema range over the common
/// output-time lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub epsilon: f64,
    pub pointwise: f64,
    pub l2: f64,
    pub h1: f64,
}

/// Which error column of an [`ErrorSample`] a fit applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    Pointwise,
    L2,
    H1,
}

impl ErrorSample {
    pub fn get(&self, which: ErrorNorm) -> f64 {
        match which {
            ErrorNorm::Pointwise => self.pointwise,
            ErrorNorm::L2 => self.l2,
            ErrorNorm::H1 => self.h1,
        }
    }
}

/// Result of a least-squares power-law fit `err ~ prefactor * epsilon^delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub delta: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of the fit in log-log coordinates.
    pub residual: f64,
    /// Range of widths the fit actually used (after any exclusion).
    pub eps_min: f64,
    pub eps_max: f64,
    pub points_used: usize,
}

/// Collapses per-width squeezed runs against one limit run into error
/// samples, one per width.
///
/// Every squeezed run must live on the same step lattice as the limit run
/// (same `dt`, same defect count, same snapshot rows on the same grid);
/// any disagreement is reported rather than silently reconciled.
pub fn error_ladder(
    scaled: &[(f64, ScaledRun)],
    point: &PointRun,
) -> Result<Vec<ErrorSample>> {
    if point.output_rows.is_empty() {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    let grid = point.fields[0].grid();
    let fft = Spectral::new(grid.clone());
    let mut ladder = Vec::with_capacity(scaled.len());
    for (epsilon, run) in scaled {
        if run.dt != point.dt {
            return Err(Error::MismatchedLattices {
                what: format!(
                    "time step differs between flows: {} vs {}",
                    run.dt, point.dt
                ),
            });
        }
        if run.traces.len() != point.charges.len() {
            return Err(Error::MismatchedLattices {
                what: format!(
                    "defect count differs between flows: {} vs {}",
                    run.traces.len(),
                    point.charges.len()
                ),
            });
        }
        if run.snapshots.len() != point.output_rows.len()
            || run
                .snapshots
                .iter()
                .zip(&point.output_rows)
                .any(|((row, _), want)| row != want)
        {
            return Err(Error::MismatchedLattices {
                what: "output-time lattices differ between flows".into(),
            });
        }
        let mut sample = ErrorSample { epsilon: *epsilon, pointwise: 0.0, l2: 0.0, h1: 0.0 };
        for (i, &row) in point.output_rows.iter().enumerate() {
            for (trace, charge) in run.traces.iter().zip(&point.charges) {
                let missing = |len: usize| Error::MismatchedLattices {
                    what: format!("trace of length {len} does not cover output row {row}"),
                };
                let a = trace.get(row).ok_or_else(|| missing(trace.len()))?;
                let c = charge.get(row).ok_or_else(|| missing(charge.len()))?;
                sample.pointwise = sample.pointwise.max((a - c).norm());
            }
            let diff = run.snapshots[i].1.difference(&point.fields[i])?;
            sample.l2 = sample.l2.max(diff.l2_norm());
            let (mass, kinetic) = fft.h1_parts(&diff);
            sample.h1 = sample.h1.max((mass + kinetic).sqrt());
        }
        ladder.push(sample);
    }
    Ok(ladder)
}

/// Fits `err ~ prefactor * epsilon^delta` for the chosen error column.
///
/// By default the sample at the largest width is excluded when more than
/// three samples are supplied: the largest width is the one most likely to
/// sit outside the asymptotic regime the fit is meant to measure. Use
/// [`fit_rate_with`] to override.
pub fn fit_rate(samples: &[ErrorSample], which: ErrorNorm) -> Result<RateFit> {
    fit_rate_with(samples, which, true)
}

/// [`fit_rate`] with explicit control over the largest-width exclusion.
/// The exclusion is skipped when it would leave fewer than three points.
pub fn fit_rate_with(
    samples: &[ErrorSample],
    which: ErrorNorm,
    drop_largest: bool,
) -> Result<RateFit> {
    let mut pairs: Vec<(f64, f64)> =
        samples.iter().map(|s| (s.epsilon, s.get(which))).collect();
    for &(eps, err) in &pairs {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::BadParameter { name: "epsilon", value: eps });
        }
        if !err.is_finite() || err <= 0.0 {
            return Err(Error::DegenerateErrors);
        }
    }
    if drop_largest && pairs.len() > 3 {
        let largest = pairs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(i, _)| i)
            .expect("non-empty");
        pairs.remove(largest);
    }
    if pairs.len() < 3 {
        return Err(Error::TooFewSamples { need: 3, got: pairs.len() });
    }

    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|&(e, _)| e.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|&(_, v)| v.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    if sxx == 0.0 {
        // All widths coincide; no rate is identifiable.
        return Err(Error::DegenerateErrors);
    }
    let delta = sxy / sxx;
    let intercept = ybar - delta * xbar;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (delta * x + intercept);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    let (mut eps_min, mut eps_max) = (f64::INFINITY, 0.0f64);
    for &(e, _) in &pairs {
        eps_min = eps_min.min(e);
        eps_max = eps_max.max(e);
    }
    Ok(RateFit {
        delta,
        prefactor: intercept.exp(),
        residual,
        eps_min,
        eps_max,
        points_used: pairs.len(),
    })
}

/// How far a field is from satisfying the derivative-jump condition
/// `psi'(y+) - psi'(y-) = alpha |c|^(2 mu) c` at a defect site.
///
/// One-sided derivatives are estimated with fourth-order five-point
/// stencils, one strictly on each side of the site; `trace` supplies the
/// boundary value `c` for the nonlinear term. The residual is normalized
/// by `max(1, |c|)` so it stays meaningful for both small and large fields.
pub fn jump_residual(
    field: &ComplexField,
    site: f64,
    trace: Complex64,
    alpha: f64,
    mu: f64,
) -> Result<f64> {
    let grid = field.grid();
    let idx = grid.index_of(site).ok_or(Error::SiteOffGrid { site })?;
    let m = grid.len();
    let room = idx.min(m - 1 - idx);
    if room < 4 {
        return Err(Error::TooFewSamples { need: 4, got: room });
    }
    let v = &field.values()[idx - 4..=idx + 4];
    jump_residual_window(v, grid.spacing(), trace, alpha, mu)
}

/// Derivative-jump residuals of the limit flow at every defect and output
/// row, computed on nine-node windows reconstructed with the direct
/// line-kernel backend. The spectrally synthesized fields cannot feed the
/// stencils: they truncate a derivative-kinked function, and the resulting
/// Gibbs error keeps one-sided differences from converging.
///
/// Returns `residuals[k][i]` for defect `k` at output row position `i`.
pub fn point_jump_residuals(
    problem: &PointProblem,
    psi0: &ComplexField,
    run: &PointRun,
) -> Result<Vec<Vec<f64>>> {
    let grid = psi0.grid();
    let fft = Spectral::new(grid);
    let mut out = vec![Vec::with_capacity(run.output_rows.len()); problem.defects().len()];
    for &row in &run.output_rows {
        for (k, d) in problem.defects().iter().enumerate() {
            let idx = grid.index_of(d.site()).ok_or(Error::SiteOffGrid { site: d.site() })?;
            let room = idx.min(grid.len() - 1 - idx);
            if room < 4 {
                return Err(Error::TooFewSamples { need: 4, got: room });
            }
            let nodes: Vec<usize> = (idx - 4..=idx + 4).collect();
            let window =
                reconstruct_at_nodes(problem, &fft, psi0, &run.charges, run.dt, row, &nodes)?;
            out[k].push(jump_residual_window(
                &window,
                grid.spacing(),
                run.charges[k][row],
                d.alpha(),
                d.mu(),
            )?);
        }
    }
    Ok(out)
}

/// [`jump_residual`] on a nine-value window centered at the site (the site
/// value at index 4), for callers that reconstruct only the stencil nodes.
pub fn jump_residual_window(
    window: &[Complex64],
    h: f64,
    trace: Complex64,
    alpha: f64,
    mu: f64,
) -> Result<f64> {
    if window.len() != 9 {
        return Err(Error::FieldLength { got: window.len(), want: 9 });
    }
    let v = window;
    let scale = 1.0 / (12.0 * h);
    let right = scale
        * (-25.0 * v[4] + 48.0 * v[5] - 36.0 * v[6] + 16.0 * v[7] - 3.0 * v[8]);
    let left = scale
        * (25.0 * v[4] - 48.0 * v[3] + 36.0 * v[2] - 16.0 * v[1] + 3.0 * v[0]);
    let target = alpha * charge_nonlinearity(trace, mu);
    Ok((right - left - target).norm() / trace.norm().max(1.0))
}
