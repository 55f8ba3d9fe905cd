//! Experiment drivers that turn problem definitions into finished result
//! directories: width ladders with rate fits, self-convergence studies,
//! and domain-size validation.
//!
//! The drivers are deterministic by construction — no randomness, no
//! time-dependent state — so identical plans produce byte-identical CSV
//! outputs on the same platform.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use crate::config::{steps_for, InitialData, RunConfig};
use crate::diagnostics::{error_ladder, fit_rate_with, ErrorNorm, ErrorSample, RateFit};
use crate::error::{Error, Result};
use crate::export;
use crate::fft::Spectral;
use crate::grid::Grid1D;
use crate::point::{run_point, PointRun};
use crate::problem::{DefectSpec, PointDefect, PointProblem, ScaledProblem, SolverParams};
use crate::scaled::{run_scaled, ScaledRun};

/// Everything needed to run a family of experiments, grid-independent:
/// fields are realized per resolved grid, and coupling strengths always
/// come from the profile integrals, never from hand-entered numbers.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    /// Half-width of the periodic box.
    pub half_width: f64,
    /// Requested node count; a floor. The driver doubles it as needed so
    /// the grid resolves the smallest defect width (h <= min(eps)/8).
    pub min_points: usize,
    pub defects: Vec<DefectSpec>,
    pub psi0: InitialData,
    /// Strictly decreasing defect widths.
    pub epsilons: Vec<f64>,
    pub time_horizon: f64,
    pub dt: f64,
    /// Nominal output intervals in `[0, T]`. Suprema are reported on a
    /// lattice twice this fine; the gap between the two is the measured
    /// lattice sensitivity.
    pub output_count: usize,
    pub params: SolverParams,
    /// Exclude the largest width from rate fits.
    pub drop_largest_width: bool,
    /// Number of dt-halvings in self-convergence studies (>= 2).
    pub self_refine_levels: u32,
    pub override_admissibility: bool,
}

impl ExperimentPlan {
    /// Builds a plan from a parsed config; the config must carry an
    /// `[experiment]` section with a non-empty width ladder.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let exp = cfg.experiment.clone().ok_or_else(|| {
            Error::Config(
                "experiment drivers need an [experiment] section with `epsilons = [...]`".into(),
            )
        })?;
        if exp.epsilons.is_empty() {
            return Err(Error::Config("[experiment] `epsilons` must not be empty".into()));
        }
        let plan = ExperimentPlan {
            half_width: cfg.grid.half_width,
            min_points: cfg.grid.num_points,
            defects: cfg.defect_specs()?,
            psi0: cfg.psi0.clone(),
            epsilons: exp.epsilons,
            time_horizon: cfg.time_horizon,
            dt: cfg.dt,
            output_count: exp.output_count,
            params: cfg.solver_params(),
            drop_largest_width: exp.drop_largest_width,
            self_refine_levels: exp.self_refine_levels,
            override_admissibility: cfg.override_admissibility,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty()
            || self.epsilons.iter().any(|&e| !e.is_finite() || e <= 0.0)
            || self.epsilons.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::BadLadder);
        }
        if !self.min_points.is_power_of_two() || self.min_points < 2 {
            return Err(Error::NotPowerOfTwo { m: self.min_points });
        }
        if self.output_count == 0 {
            return Err(Error::BadParameter { name: "output_count", value: 0.0 });
        }
        if self.self_refine_levels < 2 {
            return Err(Error::BadParameter {
                name: "self_refine_levels",
                value: self.self_refine_levels as f64,
            });
        }
        self.steps()?;
        Ok(())
    }

    /// Steps covering `[0, T]` at the plan's `dt`.
    pub fn steps(&self) -> Result<usize> {
        steps_for(self.time_horizon, self.dt)
    }

    /// Smallest power-of-two node count that is at least `min_points` and
    /// resolves the narrowest defect width.
    pub fn resolved_points(&self) -> Result<usize> {
        let min_eps = *self.epsilons.last().expect("validated non-empty");
        let mut m = self.min_points;
        while 2.0 * self.half_width / (m as f64) > min_eps / 8.0 {
            m = m
                .checked_mul(2)
                .filter(|&m| m <= 1 << 26)
                .ok_or(Error::ResolutionTooCoarse {
                    h: 2.0 * self.half_width / (self.min_points as f64),
                    epsilon: min_eps,
                })?;
        }
        Ok(m)
    }

    fn resolved_grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.half_width, self.resolved_points()?)
    }

    fn point_problem(&self) -> Result<PointProblem> {
        let defects = self
            .defects
            .iter()
            .map(|d| PointDefect::new(d.site(), d.mu(), d.alpha()))
            .collect::<Result<Vec<_>>>()?;
        PointProblem::new(defects, self.override_admissibility)
    }
}

/// Evenly spaced output rows on `[0, steps]`: `intervals + 1` nominal
/// rows, deduplicated when the lattice is finer than the step count.
pub fn output_lattice(steps: usize, intervals: usize) -> Vec<usize> {
    (0..=intervals)
        .map(|i| ((i as f64 * steps as f64) / intervals as f64).round() as usize)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// A rate fit that either succeeded or was withheld: fitting noise at
/// roundoff would report a meaningless exponent, and fewer than three
/// widths cannot support a two-parameter fit with a residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitOutcome {
    Fitted(RateFit),
    AtRoundoff { max_error: f64 },
    TooFewWidths { have: usize },
}

/// Everything a width-ladder experiment measured.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub resolved_points: usize,
    pub steps: usize,
    pub output_rows: Vec<usize>,
    /// Per-width sup-in-time errors on the fine output lattice.
    pub samples: Vec<ErrorSample>,
    pub fits: Vec<(ErrorNorm, FitOutcome)>,
    /// Per width: the supremum over all steps of the squeezed flow's
    /// Sobolev norm (the monitored a-priori bound).
    pub sup_h1_per_width: Vec<(f64, f64)>,
    /// Relative spread of those suprema across the ladder.
    pub h1_spread: f64,
    /// Per width: relative change of the reported errors when the output
    /// lattice is coarsened back to the nominal interval count.
    pub lattice_gaps: Vec<f64>,
}

const ROUNDOFF_FLOOR: f64 = 1e-12;

fn norm_label(which: ErrorNorm) -> &'static str {
    match which {
        ErrorNorm::Pointwise => "pointwise",
        ErrorNorm::L2 => "l2",
        ErrorNorm::H1 => "h1",
    }
}

/// Runs the limit flow once and the squeezed flow per width, computes the
/// error ladder and rate fits, and writes `ladder.csv`, `fits.csv`,
/// `report.txt`, and per-run trajectory CSVs into `out_dir`.
pub fn run_convergence_experiment(
    plan: &ExperimentPlan,
    out_dir: impl AsRef<Path>,
) -> Result<ConvergenceReport> {
    plan.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let grid = plan.resolved_grid()?;
    let psi0 = plan.psi0.realize(&grid)?;
    let steps = plan.steps()?;
    let rows_fine = output_lattice(steps, 2 * plan.output_count);
    let rows_coarse = output_lattice(steps, plan.output_count);

    let point_problem = plan.point_problem()?;
    let point_run =
        run_point(&point_problem, grid.clone(), &psi0, plan.dt, steps, &plan.params, &rows_fine)?;
    export::write_point_charges_csv(out_dir.join("point_charges.csv"), &point_problem, &point_run)?;
    export::write_point_rows_csv(out_dir.join("point_rows.csv"), &point_problem, &psi0, &point_run)?;

    let mut runs: Vec<(f64, ScaledRun)> = Vec::with_capacity(plan.epsilons.len());
    for &eps in &plan.epsilons {
        let wrap = |source: Error| Error::WidthRunFailed { epsilon: eps, source: Box::new(source) };
        let problem =
            ScaledProblem::new(grid.clone(), plan.defects.clone(), eps, plan.override_admissibility)
                .map_err(wrap)?;
        let run = run_scaled(&problem, &psi0, plan.dt, steps, &plan.params, &rows_fine)
            .map_err(wrap)?;
        export::write_scaled_csv(out_dir.join(format!("scaled_eps_{eps}.csv")), &run)?;
        runs.push((eps, run));
    }

    let samples = error_ladder(&runs, &point_run)?;
    let lattice_gaps = lattice_sensitivity(&runs, &point_run, &rows_coarse, &samples)?;
    let sup_h1_per_width: Vec<(f64, f64)> = runs
        .iter()
        .map(|(eps, run)| {
            let sup = (0..run.times.len()).map(|n| run.h1_norm(n)).fold(0.0, f64::max);
            (*eps, sup)
        })
        .collect();
    let (lo, hi) = sup_h1_per_width
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(_, s)| (lo.min(s), hi.max(s)));
    let h1_spread = if lo > 0.0 { (hi - lo) / lo } else { 0.0 };

    let mut fits = Vec::new();
    for which in [ErrorNorm::Pointwise, ErrorNorm::L2, ErrorNorm::H1] {
        let max_error = samples.iter().map(|s| s.get(which)).fold(0.0, f64::max);
        let outcome = if max_error < ROUNDOFF_FLOOR {
            FitOutcome::AtRoundoff { max_error }
        } else if samples.len() < 3 {
            FitOutcome::TooFewWidths { have: samples.len() }
        } else {
            match fit_rate_with(&samples, which, plan.drop_largest_width) {
                Ok(fit) => FitOutcome::Fitted(fit),
                Err(Error::DegenerateErrors) => FitOutcome::AtRoundoff { max_error },
                Err(e) => return Err(e),
            }
        };
        fits.push((which, outcome));
    }

    let report = ConvergenceReport {
        resolved_points: grid.len(),
        steps,
        output_rows: rows_fine,
        samples,
        fits,
        sup_h1_per_width,
        h1_spread,
        lattice_gaps,
    };
    export::write_ladder_csv(out_dir.join("ladder.csv"), &report.samples)?;
    write_fits_csv(out_dir.join("fits.csv"), &report.fits)?;
    fs::write(out_dir.join("report.txt"), render_report(plan, &report))?;
    Ok(report)
}

/// Relative change of each sample's errors when the suprema are restricted
/// to the coarse output lattice (largest of the three norms' changes).
fn lattice_sensitivity(
    runs: &[(f64, ScaledRun)],
    point: &PointRun,
    rows_coarse: &[usize],
    fine: &[ErrorSample],
) -> Result<Vec<f64>> {
    let grid = point.fields[0].grid();
    let fft = Spectral::new(grid);
    let positions: Vec<usize> = rows_coarse
        .iter()
        .map(|row| {
            point
                .output_rows
                .binary_search(row)
                .map_err(|_| Error::MismatchedLattices {
                    what: format!("coarse output row {row} is not on the fine lattice"),
                })
        })
        .collect::<Result<_>>()?;
    let mut gaps = Vec::with_capacity(runs.len());
    for ((_, run), fine_sample) in runs.iter().zip(fine) {
        let mut coarse = ErrorSample { pointwise: 0.0, l2: 0.0, h1: 0.0, ..*fine_sample };
        for (&row, &i) in rows_coarse.iter().zip(&positions) {
            for (trace, charge) in run.traces.iter().zip(&point.charges) {
                coarse.pointwise = coarse.pointwise.max((trace[row] - charge[row]).norm());
            }
            let diff = run.snapshots[i].1.difference(&point.fields[i])?;
            coarse.l2 = coarse.l2.max(diff.l2_norm());
            let (mass, kinetic) = fft.h1_parts(&diff);
            coarse.h1 = coarse.h1.max((mass + kinetic).sqrt());
        }
        let gap = [
            (fine_sample.pointwise, coarse.pointwise),
            (fine_sample.l2, coarse.l2),
            (fine_sample.h1, coarse.h1),
        ]
        .iter()
        .map(|&(f, c)| if f > ROUNDOFF_FLOOR { (f - c).abs() / f } else { 0.0 })
        .fold(0.0, f64::max);
        gaps.push(gap);
    }
    Ok(gaps)
}

fn write_fits_csv(path: impl AsRef<Path>, fits: &[(ErrorNorm, FitOutcome)]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "norm,status,delta,prefactor,residual,eps_min,eps_max,points_used,max_error"
    )?;
    for (which, outcome) in fits {
        match outcome {
            FitOutcome::Fitted(fit) => writeln!(
                out,
                "{},fitted,{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},",
                norm_label(*which),
                fit.delta,
                fit.prefactor,
                fit.residual,
                fit.eps_min,
                fit.eps_max,
                fit.points_used
            )?,
            FitOutcome::AtRoundoff { max_error } => writeln!(
                out,
                "{},roundoff,,,,,,,{max_error:.16e}",
                norm_label(*which)
            )?,
            FitOutcome::TooFewWidths { have } => writeln!(
                out,
                "{},too-few-widths,,,,,,{have},",
                norm_label(*which)
            )?,
        }
    }
    out.flush()?;
    Ok(())
}

fn render_report(plan: &ExperimentPlan, report: &ConvergenceReport) -> String {
    let mut s = String::new();
    let h = 2.0 * plan.half_width / report.resolved_points as f64;
    let _ = writeln!(s, "width-ladder convergence experiment");
    let _ = writeln!(
        s,
        "grid: L = {}, M = {} (requested floor {}), h = {h:.6e}",
        plan.half_width, report.resolved_points, plan.min_points
    );
    let _ = writeln!(
        s,
        "time: T = {}, dt = {:.6e}, {} steps; {} output rows ({} nominal intervals, refined 2x)",
        plan.time_horizon,
        plan.dt,
        report.steps,
        report.output_rows.len(),
        plan.output_count
    );
    let _ = writeln!(s, "widths: {:?}", plan.epsilons);
    let _ = writeln!(s);
    for (sample, gap) in report.samples.iter().zip(&report.lattice_gaps) {
        let _ = writeln!(
            s,
            "eps = {:<8} pointwise = {:.6e}  l2 = {:.6e}  h1 = {:.6e}  lattice sensitivity = {:.3e}",
            sample.epsilon, sample.pointwise, sample.l2, sample.h1, gap
        );
    }
    let _ = writeln!(s);
    for (which, outcome) in &report.fits {
        match outcome {
            FitOutcome::Fitted(fit) => {
                let _ = writeln!(
                    s,
                    "fit {:<9} delta = {:.4}  prefactor = {:.4e}  log-log residual = {:.3e}  (widths [{}, {}], {} points)",
                    norm_label(*which),
                    fit.delta,
                    fit.prefactor,
                    fit.residual,
                    fit.eps_min,
                    fit.eps_max,
                    fit.points_used
                );
            }
            FitOutcome::AtRoundoff { max_error } => {
                let _ = writeln!(
                    s,
                    "fit {:<9} withheld: errors at roundoff (max {max_error:.3e})",
                    norm_label(*which)
                );
            }
            FitOutcome::TooFewWidths { have } => {
                let _ = writeln!(
                    s,
                    "fit {:<9} withheld: need at least 3 widths, have {have}",
                    norm_label(*which)
                );
            }
        }
    }
    let _ = writeln!(s);
    for (eps, sup) in &report.sup_h1_per_width {
        let _ = writeln!(s, "sup-in-time H1 at eps = {eps:<8}: {sup:.12}");
    }
    let _ = writeln!(
        s,
        "H1 supremum spread across widths: {:.4}% (uniform-bound monitor)",
        100.0 * report.h1_spread
    );
    s
}

/// Observed self-convergence of one solver under dt-halving.
#[derive(Debug, Clone)]
pub struct SelfOrder {
    /// Sup-in-time trace errors against the finest-dt reference, one per
    /// dt level (coarsest first).
    pub errors: Vec<f64>,
    /// Observed orders `log2(e_i / e_{i+1})` between consecutive levels.
    pub orders: Vec<f64>,
    /// All errors at or below roundoff; no meaningful order exists.
    pub saturated: bool,
    /// Some observed order fell below the solver's threshold.
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct SelfConvergenceReport {
    /// The dt levels compared (coarsest first); the reference ran one
    /// halving below the last entry.
    pub dts: Vec<f64>,
    pub scaled: SelfOrder,
    pub point: SelfOrder,
}

/// Threshold below which a squeezed-flow self-convergence order is flagged.
pub const SCALED_ORDER_THRESHOLD: f64 = 1.8;
/// Threshold below which a limit-flow self-convergence order is flagged.
pub const POINT_ORDER_THRESHOLD: f64 = 1.3;

fn assess(errors: Vec<f64>, threshold: f64) -> SelfOrder {
    let saturated = errors.iter().all(|&e| e < ROUNDOFF_FLOOR);
    let orders: Vec<f64> = if saturated {
        Vec::new()
    } else {
        errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
    };
    let flagged = !saturated && orders.iter().any(|&o| o < threshold);
    SelfOrder { errors, orders, saturated, flagged }
}

/// Validates the discretization before any width ladder is trusted: halves
/// dt `self_refine_levels` times at the smallest width, measures sup-in-time
/// trace errors against the finest run, and reports the observed orders of
/// both solvers. Grid spacing is left alone: both solvers evaluate space
/// spectrally, so their resolution-rule-compliant grids contribute errors
/// far below the dt terms being measured.
pub fn run_self_convergence(plan: &ExperimentPlan) -> Result<SelfConvergenceReport> {
    plan.validate()?;
    let grid = plan.resolved_grid()?;
    let psi0 = plan.psi0.realize(&grid)?;
    let steps0 = plan.steps()?;
    let eps = *plan.epsilons.last().expect("validated non-empty");
    let levels = plan.self_refine_levels;

    let scaled_problem =
        ScaledProblem::new(grid.clone(), plan.defects.clone(), eps, plan.override_admissibility)?;
    let point_problem = plan.point_problem()?;

    let mut scaled_traces: Vec<Vec<Vec<_>>> = Vec::new();
    let mut point_traces: Vec<Vec<Vec<_>>> = Vec::new();
    for i in 0..=levels {
        let factor = 1usize << i;
        let dt = plan.dt / factor as f64;
        let steps = steps0 * factor;
        let run = run_scaled(&scaled_problem, &psi0, dt, steps, &plan.params, &[])?;
        scaled_traces.push(run.traces);
        let run = run_point(&point_problem, grid.clone(), &psi0, dt, steps, &plan.params, &[])?;
        point_traces.push(run.charges);
    }

    let sup_gap = |coarse: &[Vec<num_complex::Complex64>],
                   stride_c: usize,
                   reference: &[Vec<num_complex::Complex64>],
                   stride_r: usize| {
        let mut sup = 0.0f64;
        for (tc, tr) in coarse.iter().zip(reference) {
            for n in 0..=steps0 {
                sup = sup.max((tc[n * stride_c] - tr[n * stride_r]).norm());
            }
        }
        sup
    };

    // Strides: run i stores steps0 * 2^i steps, so level-0 step n sits at
    // index n * 2^i there and at n * 2^levels in the reference.
    let reference = levels as usize;
    let mut scaled_errors = Vec::new();
    let mut point_errors = Vec::new();
    for i in 0..reference {
        let (sc, sr) = (1usize << i, 1usize << levels);
        scaled_errors.push(sup_gap(&scaled_traces[i], sc, &scaled_traces[reference], sr));
        point_errors.push(sup_gap(&point_traces[i], sc, &point_traces[reference], sr));
    }

    let dts = (0..levels).map(|i| plan.dt / (1 << i) as f64).collect();
    Ok(SelfConvergenceReport {
        dts,
        scaled: assess(scaled_errors, SCALED_ORDER_THRESHOLD),
        point: assess(point_errors, POINT_ORDER_THRESHOLD),
    })
}

/// Outcome of re-running the smallest width with the box doubled.
#[derive(Debug, Clone, Copy)]
pub struct DomainReport {
    pub base: ErrorSample,
    pub doubled: ErrorSample,
    /// Largest relative change across the three error columns.
    pub max_rel_change: f64,
    /// True when the change stays below one percent.
    pub passed: bool,
}

/// Checks that the periodic truncation is benign: repeats the smallest-width
/// run with the box doubled (same spacing) and compares the reported errors.
/// A change above one percent means wrap-around is polluting the
/// measurements and the box must be enlarged.
pub fn validate_domain(plan: &ExperimentPlan) -> Result<DomainReport> {
    plan.validate()?;
    let eps = *plan.epsilons.last().expect("validated non-empty");
    let steps = plan.steps()?;
    let rows = output_lattice(steps, plan.output_count);
    let mut samples = Vec::new();
    for doubling in [1usize, 2] {
        let grid = Grid1D::new(
            plan.half_width * doubling as f64,
            plan.resolved_points()? * doubling,
        )?;
        let psi0 = plan.psi0.realize(&grid)?;
        let problem = ScaledProblem::new(
            grid.clone(),
            plan.defects.clone(),
            eps,
            plan.override_admissibility,
        )?;
        let run = run_scaled(&problem, &psi0, plan.dt, steps, &plan.params, &rows)?;
        let point = run_point(
            &plan.point_problem()?,
            grid,
            &psi0,
            plan.dt,
            steps,
            &plan.params,
            &rows,
        )?;
        let ladder = error_ladder(&[(eps, run)], &point)?;
        samples.push(ladder[0]);
    }
    let (base, doubled) = (samples[0], samples[1]);
    let rel = |b: f64, d: f64| {
        if b.max(d) < ROUNDOFF_FLOOR {
            0.0
        } else {
            (d - b).abs() / b.max(ROUNDOFF_FLOOR)
        }
    };
    let max_rel_change = rel(base.pointwise, doubled.pointwise)
        .max(rel(base.l2, doubled.l2))
        .max(rel(base.h1, doubled.h1));
    Ok(DomainReport { base, doubled, max_rel_change, passed: max_rel_change < 0.01 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{PotentialProfile, ProfileKind};

    fn gaussian_defect(amplitude: f64) -> DefectSpec {
        let profile =
            PotentialProfile::new(ProfileKind::Gaussian { amplitude, width: 1.0 }).unwrap();
        DefectSpec::new(0.0, 0.5, profile).unwrap()
    }

    fn base_plan() -> ExperimentPlan {
        ExperimentPlan {
            half_width: 16.0,
            min_points: 512,
            defects: vec![gaussian_defect(std::f64::consts::PI.sqrt().recip())],
            psi0: InitialData::Gaussian {
                amplitude: 1.0,
                width: 1.0,
                center: 0.0,
                momentum: 0.0,
            },
            epsilons: vec![0.5, 0.4],
            time_horizon: 0.02,
            dt: 1e-3,
            output_count: 4,
            params: SolverParams::default(),
            drop_largest_width: true,
            self_refine_levels: 2,
            override_admissibility: false,
        }
    }

    #[test]
    fn plans_reject_non_decreasing_ladders() {
        let mut plan = base_plan();
        plan.epsilons = vec![0.4, 0.4];
        match plan.validate() {
            Err(Error::BadLadder) => {}
            other => panic!("expected a ladder error, got {other:?}"),
        }
    }

    #[test]
    fn resolved_points_honor_the_width_rule() {
        let mut plan = base_plan();
        // h = 32/512 = 0.0625 > 0.4/8 = 0.05, so one doubling is needed.
        assert_eq!(plan.resolved_points().unwrap(), 1024);
        plan.epsilons = vec![0.2, 0.1, 0.05, 0.025];
        plan.min_points = 4096;
        assert_eq!(plan.resolved_points().unwrap(), 16384);
        plan.epsilons = vec![0.5];
        assert_eq!(plan.resolved_points().unwrap(), 4096, "a fine floor is kept");
    }

    #[test]
    fn output_lattices_cover_both_endpoints_without_duplicates() {
        let rows = output_lattice(2000, 64);
        assert_eq!(rows.len(), 65);
        assert_eq!((rows[0], *rows.last().unwrap()), (0, 2000));
        assert!(rows.windows(2).all(|w| w[0] < w[1]));
        // A lattice finer than the step count collapses onto the steps.
        assert_eq!(output_lattice(4, 64), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn decoupled_experiment_reports_roundoff_and_writes_deterministic_files() {
        let mut plan = base_plan();
        plan.defects = vec![gaussian_defect(0.0)];
        let dir = std::env::temp_dir().join("pointnls_harness_decoupled");
        let report = run_convergence_experiment(&plan, &dir).unwrap();
        assert_eq!(report.resolved_points, 1024);
        for sample in &report.samples {
            assert!(sample.pointwise < 1e-12 && sample.l2 < 1e-12 && sample.h1 < 1e-12);
        }
        for (_, outcome) in &report.fits {
            assert!(matches!(outcome, FitOutcome::AtRoundoff { .. }));
        }
        for name in
            ["ladder.csv", "fits.csv", "report.txt", "scaled_eps_0.5.csv", "point_charges.csv"]
        {
            assert!(dir.join(name).exists(), "missing {name}");
        }
        let first = std::fs::read(dir.join("ladder.csv")).unwrap();
        let dir2 = std::env::temp_dir().join("pointnls_harness_decoupled_again");
        run_convergence_experiment(&plan, &dir2).unwrap();
        assert_eq!(first, std::fs::read(dir2.join("ladder.csv")).unwrap());
        for d in [dir, dir2] {
            std::fs::remove_dir_all(d).ok();
        }
    }

    #[test]
    fn coupled_experiment_produces_fits_and_monitors() {
        let mut plan = base_plan();
        plan.epsilons = vec![0.8, 0.6, 0.45, 0.3];
        plan.time_horizon = 0.1;
        plan.dt = 2e-3;
        plan.output_count = 8;
        let dir = std::env::temp_dir().join("pointnls_harness_coupled");
        let report = run_convergence_experiment(&plan, &dir).unwrap();
        std::fs::remove_dir_all(&dir).ok();
        assert_eq!(report.samples.len(), 4);
        for (_, outcome) in &report.fits {
            match outcome {
                FitOutcome::Fitted(fit) => {
                    assert!(fit.delta.is_finite());
                    assert_eq!(fit.points_used, 3, "largest width excluded");
                }
                other => panic!("expected a fit, got {other:?}"),
            }
        }
        assert!(report.h1_spread.is_finite() && report.h1_spread >= 0.0);
        assert_eq!(report.lattice_gaps.len(), 4);
    }

    #[test]
    fn self_convergence_saturates_on_a_decoupled_problem() {
        let mut plan = base_plan();
        plan.defects = vec![gaussian_defect(0.0)];
        plan.time_horizon = 0.01;
        let report = run_self_convergence(&plan).unwrap();
        assert!(report.scaled.saturated && report.point.saturated);
        assert!(!report.scaled.flagged && !report.point.flagged);
    }

    #[test]
    fn self_convergence_clears_thresholds_on_a_smooth_coupled_problem() {
        let mut plan = base_plan();
        plan.epsilons = vec![0.5];
        plan.time_horizon = 0.1;
        plan.dt = 2e-3;
        plan.self_refine_levels = 3;
        let report = run_self_convergence(&plan).unwrap();
        assert!(!report.scaled.saturated && !report.point.saturated);
        assert!(
            !report.scaled.flagged,
            "squeezed-flow orders {:?} (errors {:?})",
            report.scaled.orders, report.scaled.errors
        );
        assert!(
            !report.point.flagged,
            "limit-flow orders {:?} (errors {:?})",
            report.point.orders, report.point.errors
        );
    }

    #[test]
    fn domain_validation_passes_in_a_roomy_box() {
        let mut plan = base_plan();
        plan.epsilons = vec![0.5];
        plan.time_horizon = 0.05;
        plan.dt = 1e-3;
        let report = validate_domain(&plan).unwrap();
        assert!(
            report.passed,
            "expected sub-1% change, got {:.3e}",
            report.max_rel_change
        );
    }

    #[test]
    fn domain_validation_flags_a_cramped_box() {
        let mut plan = base_plan();
        plan.half_width = 2.0;
        plan.min_points = 64;
        plan.epsilons = vec![0.4];
        plan.psi0 = InitialData::Gaussian {
            amplitude: 1.0,
            width: 1.2,
            center: 0.0,
            momentum: 0.0,
        };
        plan.time_horizon = 0.2;
        plan.dt = 5e-3;
        let report = validate_domain(&plan).unwrap();
        assert!(
            !report.passed,
            "expected a flagged box, change was {:.3e}",
            report.max_rel_change
        );
    }
}
