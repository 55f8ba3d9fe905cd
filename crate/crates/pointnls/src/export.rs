//! On-disk result formats: per-step trajectory CSVs, sup-in-time error
//! tables, and flat binary field snapshots with a one-line text header.
//!
//! All floating-point values are written with enough digits to round-trip
//! exactly, and every writer is deterministic: identical inputs produce
//! byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::diagnostics::{point_jump_residuals, ErrorSample};
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid1D;
use crate::point::{charge_nonlinearity, PointRun};
use crate::problem::PointProblem;
use crate::scaled::ScaledRun;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a squeezed-flow trajectory: one row per step with columns
/// `t, mass, energy, h1_norm` followed by `re/im` of each defect trace.
pub fn write_scaled_csv(path: impl AsRef<Path>, run: &ScaledRun) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "t,mass,energy,h1_norm")?;
    for k in 0..run.traces.len() {
        write!(out, ",re_trace_{k},im_trace_{k}")?;
    }
    writeln!(out)?;
    for n in 0..run.times.len() {
        write!(
            out,
            "{},{},{},{}",
            fmt(run.times[n]),
            fmt(run.mass[n]),
            fmt(run.energy[n]),
            fmt(run.h1_norm(n))
        )?;
        for trace in &run.traces {
            write!(out, ",{},{}", fmt(trace[n].re), fmt(trace[n].im))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the limit-flow boundary data: one row per step with `t` followed
/// per defect by `re/im` of the trace `c_k` and of the charge
/// `q_k = |c_k|^(2 mu_k) c_k`.
pub fn write_point_charges_csv(
    path: impl AsRef<Path>,
    problem: &PointProblem,
    run: &PointRun,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "t")?;
    for k in 0..run.charges.len() {
        write!(out, ",re_trace_{k},im_trace_{k},re_charge_{k},im_charge_{k}")?;
    }
    writeln!(out)?;
    let steps = run.charges.first().map_or(0, |c| c.len());
    for n in 0..steps {
        write!(out, "{}", fmt(n as f64 * run.dt))?;
        for (trace, defect) in run.charges.iter().zip(problem.defects()) {
            let c = trace[n];
            let q = charge_nonlinearity(c, defect.mu());
            write!(out, ",{},{},{},{}", fmt(c.re), fmt(c.im), fmt(q.re), fmt(q.im))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the limit-flow output-row observables: one row per synthesized
/// field with columns `t, mass, energy, h1_norm` followed by the
/// derivative-jump residual at each defect (computed on line-kernel
/// reconstructed stencil windows; see
/// [`crate::diagnostics::point_jump_residuals`]).
pub fn write_point_rows_csv(
    path: impl AsRef<Path>,
    problem: &PointProblem,
    psi0: &ComplexField,
    run: &PointRun,
) -> Result<()> {
    let jumps = point_jump_residuals(problem, psi0, run)?;
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "t,mass,energy,h1_norm")?;
    for k in 0..problem.defects().len() {
        write!(out, ",jump_residual_{k}")?;
    }
    writeln!(out)?;
    for i in 0..run.output_rows.len() {
        write!(
            out,
            "{},{},{},{}",
            fmt(run.times[i]),
            fmt(run.mass[i]),
            fmt(run.energy[i]),
            fmt(run.h1_norm(i))
        )?;
        for site_jumps in &jumps {
            write!(out, ",{}", fmt(site_jumps[i]))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the per-width error table with columns
/// `epsilon, err_pointwise, err_l2, err_h1`.
pub fn write_ladder_csv(path: impl AsRef<Path>, samples: &[ErrorSample]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "epsilon,err_pointwise,err_l2,err_h1")?;
    for s in samples {
        writeln!(
            out,
            "{},{},{},{}",
            fmt(s.epsilon),
            fmt(s.pointwise),
            fmt(s.l2),
            fmt(s.h1)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Writes one field snapshot: a single text header line
/// `t=<...> L=<...> M=<...>` followed by `M` little-endian complex doubles
/// (`re, im` per node).
pub fn write_snapshot(path: impl AsRef<Path>, t: f64, field: &ComplexField) -> Result<()> {
    let grid = field.grid();
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "t={} L={} M={}", fmt(t), fmt(grid.half_width()), grid.len())?;
    for v in field.values() {
        out.write_all(&v.re.to_le_bytes())?;
        out.write_all(&v.im.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`].
pub fn read_snapshot(path: impl AsRef<Path>) -> Result<(f64, ComplexField)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let mut t = None;
    let mut l = None;
    let mut m = None;
    for part in header.split_whitespace() {
        if let Some(v) = part.strip_prefix("t=") {
            t = v.parse::<f64>().ok();
        } else if let Some(v) = part.strip_prefix("L=") {
            l = v.parse::<f64>().ok();
        } else if let Some(v) = part.strip_prefix("M=") {
            m = v.parse::<usize>().ok();
        }
    }
    let (t, l, m) = match (t, l, m) {
        (Some(t), Some(l), Some(m)) => (t, l, m),
        _ => return Err(Error::Config(format!("malformed snapshot header: {header:?}"))),
    };
    let grid = Grid1D::new(l, m)?;
    let mut bytes = vec![0u8; m * 16];
    reader.read_exact(&mut bytes)?;
    let values: Vec<Complex64> = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("chunk size"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("chunk size"));
            Complex64::new(re, im)
        })
        .collect();
    Ok((t, ComplexField::from_values(grid, values)?))
}
