//! Command-line front end: single solver runs, width-ladder convergence
//! experiments, domain validation, and a fast self-test.
//!
//! Exit codes: 0 on success, 1 on a failed self-test or domain check,
//! 2 on configuration or validation errors, 3 on solver failures
//! (blow-up guard, fixed-point stall). Errors also print one
//! machine-readable line on standard error:
//! `error kind=<kind> msg="<message>"`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use pointnls::config::{self, RunConfig};
use pointnls::export;
use pointnls::fft::Spectral;
use pointnls::harness::{self, ExperimentPlan};
use pointnls::point::run_point;
use pointnls::propagator;
use pointnls::scaled::run_scaled;
use pointnls::{ComplexField, Grid1D, Result};

#[derive(Parser)]
#[command(
    name = "pointnls",
    version,
    about = "Solvers and experiments for the 1D Schr\u{f6}dinger equation \
             with narrow or point-concentrated nonlinear defects"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the narrow-defect flow once; write observables and snapshots.
    RunScaled(RunArgs),
    /// Evolve the point-defect limit flow once; write charges, field
    /// diagnostics, and snapshots.
    RunPoint(RunArgs),
    /// Run the width-ladder convergence experiment (the config needs an
    /// [experiment] section).
    Converge(RunArgs),
    /// Re-run the smallest width with the box doubled and report how much
    /// the measured errors move.
    ValidateDomain(RunArgs),
    /// Fast end-to-end checks of every module; nonzero exit on any failure.
    SelfTest,
}

#[derive(Args)]
struct RunArgs {
    /// Path to a TOML problem definition.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the defect width from the config.
    #[arg(long, value_name = "EPS")]
    epsilon: Option<f64>,
    /// Override the time step.
    #[arg(long, value_name = "DT")]
    dt: Option<f64>,
    /// Override the time horizon.
    #[arg(long = "T", value_name = "T")]
    time_horizon: Option<f64>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "results")]
    out: PathBuf,
    /// Admit couplings outside the proven well-posedness window.
    #[arg(long)]
    override_admissibility: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error kind={} msg={:?}", e.kind(), e.to_string());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::RunScaled(a) => run_scaled_cmd(&a),
        Command::RunPoint(a) => run_point_cmd(&a),
        Command::Converge(a) => converge_cmd(&a),
        Command::ValidateDomain(a) => validate_domain_cmd(&a),
        Command::SelfTest => Ok(self_test_cmd()),
    }
}

/// Config with command-line overrides applied (overrides win).
fn effective_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = config::load_config(&args.config)?;
    if let Some(eps) = args.epsilon {
        cfg.epsilon = eps;
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(t) = args.time_horizon {
        cfg.time_horizon = t;
    }
    cfg.override_admissibility |= args.override_admissibility;
    Ok(cfg)
}

/// Writes the effective, fully-resolved config next to the results so a run
/// can be reproduced without the original file or flags.
fn echo_config(out: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config_resolved.toml"), cfg.to_toml()?)?;
    Ok(())
}

fn output_count(cfg: &RunConfig) -> usize {
    cfg.experiment.as_ref().map_or(64, |e| e.output_count)
}

/// Largest relative excursion of a conserved series from its initial value.
fn drift(series: &[f64]) -> f64 {
    let base = series[0];
    let scale = if base.abs() > 0.0 { base.abs() } else { 1.0 };
    series.iter().map(|v| (v - base).abs() / scale).fold(0.0, f64::max)
}

fn run_scaled_cmd(args: &RunArgs) -> Result<ExitCode> {
    let cfg = effective_config(args)?;
    echo_config(&args.out, &cfg)?;
    let problem = cfg.scaled_problem()?;
    let grid = cfg.build_grid()?;
    let psi0 = cfg.initial_field(&grid)?;
    let steps = cfg.steps()?;
    let rows = harness::output_lattice(steps, output_count(&cfg));
    let run = run_scaled(&problem, &psi0, cfg.dt, steps, &cfg.solver_params(), &rows)?;
    export::write_scaled_csv(args.out.join("scaled.csv"), &run)?;
    for (row, field) in &run.snapshots {
        let name = format!("psi_{row:08}.bin");
        export::write_snapshot(args.out.join(name), *row as f64 * run.dt, field)?;
    }
    let sup_h1 = (0..run.times.len()).map(|n| run.h1_norm(n)).fold(0.0, f64::max);
    println!(
        "narrow-defect run: eps = {}, {} steps at dt = {:.6e}, T = {}",
        cfg.epsilon, steps, cfg.dt, cfg.time_horizon
    );
    println!(
        "mass drift {:.3e}, energy drift {:.3e}, sup-in-time H1 {:.6}",
        drift(&run.mass),
        drift(&run.energy),
        sup_h1
    );
    println!(
        "wrote scaled.csv and {} snapshots to {}",
        run.snapshots.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run_point_cmd(args: &RunArgs) -> Result<ExitCode> {
    let cfg = effective_config(args)?;
    echo_config(&args.out, &cfg)?;
    let problem = cfg.point_problem()?;
    let grid = cfg.build_grid()?;
    let psi0 = cfg.initial_field(&grid)?;
    let steps = cfg.steps()?;
    let rows = harness::output_lattice(steps, output_count(&cfg));
    let run = run_point(&problem, grid, &psi0, cfg.dt, steps, &cfg.solver_params(), &rows)?;
    export::write_point_charges_csv(args.out.join("point_charges.csv"), &problem, &run)?;
    export::write_point_rows_csv(args.out.join("point_rows.csv"), &problem, &psi0, &run)?;
    for (i, &row) in run.output_rows.iter().enumerate() {
        let name = format!("psi_{row:08}.bin");
        export::write_snapshot(args.out.join(name), run.times[i], &run.fields[i])?;
    }
    let sup_h1 = (0..run.times.len()).map(|i| run.h1_norm(i)).fold(0.0, f64::max);
    println!(
        "point-defect run: {} defect(s), {} steps at dt = {:.6e}, T = {}",
        problem.defects().len(),
        steps,
        cfg.dt,
        cfg.time_horizon
    );
    println!(
        "mass drift {:.3e}, energy drift {:.3e}, sup-in-time H1 {:.6}",
        drift(&run.mass),
        drift(&run.energy),
        sup_h1
    );
    println!(
        "wrote point_charges.csv, point_rows.csv, and {} snapshots to {}",
        run.fields.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn converge_cmd(args: &RunArgs) -> Result<ExitCode> {
    let cfg = effective_config(args)?;
    let plan = ExperimentPlan::from_config(&cfg)?;
    let mut echoed = cfg.clone();
    echoed.grid.num_points = plan.resolved_points()?;
    echo_config(&args.out, &echoed)?;
    harness::run_convergence_experiment(&plan, &args.out)?;
    print!("{}", std::fs::read_to_string(args.out.join("report.txt"))?);
    println!("results written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn validate_domain_cmd(args: &RunArgs) -> Result<ExitCode> {
    let cfg = effective_config(args)?;
    let plan = ExperimentPlan::from_config(&cfg)?;
    let report = harness::validate_domain(&plan)?;
    println!(
        "base box   (L = {:>6}): pointwise = {:.6e}  l2 = {:.6e}  h1 = {:.6e}",
        plan.half_width, report.base.pointwise, report.base.l2, report.base.h1
    );
    println!(
        "doubled box (L = {:>6}): pointwise = {:.6e}  l2 = {:.6e}  h1 = {:.6e}",
        2.0 * plan.half_width,
        report.doubled.pointwise,
        report.doubled.l2,
        report.doubled.h1
    );
    println!("largest relative change: {:.4}%", 100.0 * report.max_rel_change);
    if report.passed {
        println!("domain check passed: wrap-around is not polluting the measurements");
        Ok(ExitCode::SUCCESS)
    } else {
        println!(
            "domain check FAILED: errors moved by 1% or more under box doubling; \
             enlarge the box (try L = {})",
            2.0 * plan.half_width
        );
        Ok(ExitCode::from(1))
    }
}

// ---------------------------------------------------------------------------
// self-test: one fast check per module, printable pass/fail lines
// ---------------------------------------------------------------------------

type Check = std::result::Result<(), String>;

fn ensure(cond: bool, why: &str) -> Check {
    if cond {
        Ok(())
    } else {
        Err(why.into())
    }
}

fn lib<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn gaussian_field(grid: Grid1D) -> ComplexField {
    ComplexField::from_fn(grid, |x| Complex64::new((-x * x).exp(), 0.0))
}

fn self_test_cmd() -> ExitCode {
    let checks: [(&str, fn() -> Check); 9] = [
        ("grid and fields", check_core),
        ("free propagator", check_propagator),
        ("defect profiles", check_potential),
        ("memory kernel", check_abel),
        ("narrow-defect flow", check_scaled),
        ("point-defect flow", check_point),
        ("diagnostics", check_diagnostics),
        ("config round-trip", check_config),
        ("experiment plans", check_harness),
    ];
    let mut failed = 0usize;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("self-test {name}: ok"),
            Err(why) => {
                failed += 1;
                println!("self-test {name}: FAILED - {why}");
            }
        }
    }
    if failed == 0 {
        println!("self-test: all checks passed");
        ExitCode::SUCCESS
    } else {
        println!("self-test: {failed} check(s) failed");
        ExitCode::from(1)
    }
}

fn check_core() -> Check {
    let grid = lib(Grid1D::new(8.0, 64))?;
    ensure(grid.node(0) == -8.0 && grid.spacing() == 0.25, "grid layout is wrong")?;
    ensure(grid.index_of(0.0) == Some(32), "origin is not a node")?;
    let psi = gaussian_field(grid);
    let want = (std::f64::consts::PI / 2.0).sqrt().sqrt();
    ensure(
        (psi.l2_norm() - want).abs() < 1e-12,
        "Gaussian L2 norm misses its closed form",
    )
}

fn check_propagator() -> Check {
    let grid = lib(Grid1D::new(16.0, 256))?;
    let fft = Spectral::new(grid);
    let psi = gaussian_field(grid);
    let whole = lib(propagator::free_evolve(&fft, &psi, 0.1))?;
    ensure(
        (whole.l2_norm() - psi.l2_norm()).abs() < 1e-12,
        "free flow is not unitary",
    )?;
    let half = lib(propagator::free_evolve(&fft, &psi, 0.05))?;
    let composed = lib(propagator::free_evolve(&fft, &half, 0.05))?;
    let gap = lib(composed.difference(&whole))?.sup_norm();
    ensure(gap < 1e-12, "free flow violates the composition law")
}

fn check_potential() -> Check {
    let pi = std::f64::consts::PI;
    let gauss = lib(pointnls::potential::PotentialProfile::gaussian(pi.sqrt().recip(), 1.0))?;
    ensure(
        (gauss.alpha() - 1.0).abs() < 1e-9,
        "normalized Gaussian profile should integrate to 1",
    )?;
    let boxy = lib(pointnls::potential::PotentialProfile::new(
        pointnls::potential::ProfileKind::Box { amplitude: 2.0, width: 0.5 },
    ))?;
    ensure(
        (boxy.alpha() - 1.0).abs() < 1e-12,
        "box profile moment should be exact",
    )
}

fn check_abel() -> Check {
    let (dt, n) = (0.01, 16usize);
    let kernel = lib(pointnls::abel::MemoryKernel::new(dt, 0.0, n))?;
    let ones = vec![Complex64::new(1.0, 0.0); n + 1];
    let t = n as f64 * dt;
    let want = Complex64::from_polar((t / std::f64::consts::PI).sqrt(), -std::f64::consts::FRAC_PI_4);
    ensure(
        (kernel.full_sum(&ones) - want).norm() < 1e-12,
        "flat-history memory row misses its closed form",
    )
}

fn check_scaled() -> Check {
    let grid = lib(Grid1D::new(8.0, 256))?;
    let profile = lib(pointnls::potential::PotentialProfile::gaussian(0.0, 1.0))?;
    let defect = lib(pointnls::problem::DefectSpec::new(0.0, 0.5, profile))?;
    let problem = lib(pointnls::problem::ScaledProblem::new(grid, vec![defect], 0.5, false))?;
    let psi0 = gaussian_field(grid);
    let params = pointnls::problem::SolverParams::default();
    let run = lib(run_scaled(&problem, &psi0, 1e-3, 10, &params, &[10]))?;
    ensure(drift(&run.mass) < 1e-12, "mass is not conserved")?;
    let fft = Spectral::new(grid);
    let free = lib(propagator::free_evolve(&fft, &psi0, 0.01))?;
    let gap = lib(run.snapshots[0].1.difference(&free))?.sup_norm();
    ensure(gap < 1e-10, "zero-strength defect does not reduce to the free flow")
}

fn check_point() -> Check {
    let grid = lib(Grid1D::new(8.0, 256))?;
    let psi0 = gaussian_field(grid);
    let defect = lib(pointnls::problem::PointDefect::new(0.0, 0.5, 0.0))?;
    let problem = lib(pointnls::problem::PointProblem::new(vec![defect], false))?;
    let params = pointnls::problem::SolverParams::default();
    let run = lib(run_point(&problem, grid, &psi0, 1e-3, 10, &params, &[]))?;
    let fft = Spectral::new(grid);
    let origin = grid.index_of(0.0).ok_or("origin is not a node")?;
    let traces = lib(propagator::free_traces(&fft, &psi0, &[origin], 1e-3, 10))?;
    let gap = run.charges[0]
        .iter()
        .zip(&traces[0])
        .map(|(c, f)| (c - f).norm())
        .fold(0.0, f64::max);
    ensure(gap < 1e-10, "zero-strength charge should equal the free trace")
}

fn check_diagnostics() -> Check {
    let samples: Vec<pointnls::diagnostics::ErrorSample> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&eps| pointnls::diagnostics::ErrorSample {
            epsilon: eps,
            pointwise: 3.0 * eps * eps,
            l2: 3.0 * eps * eps,
            h1: 3.0 * eps * eps,
        })
        .collect();
    let fit = lib(pointnls::diagnostics::fit_rate(
        &samples,
        pointnls::diagnostics::ErrorNorm::Pointwise,
    ))?;
    ensure(
        (fit.delta - 2.0).abs() < 1e-9 && fit.residual < 1e-12,
        "rate fit misses an exact power law",
    )
}

fn check_config() -> Check {
    let text = r#"
        epsilon = 0.5
        T = 0.01
        dt = 1e-3

        [grid]
        L = 8.0
        M = 256

        [[defects]]
        y = 0.0
        mu = 0.5
        potential = { kind = "gaussian", amplitude = 0.5641895835477563, width = 1.0 }

        [psi0]
        kind = "gaussian"
    "#;
    let cfg = lib(config::parse_config(text))?;
    let echoed = lib(cfg.to_toml())?;
    let back = lib(config::parse_config(&echoed))?;
    ensure(back == cfg, "config does not round-trip through TOML")
}

fn check_harness() -> Check {
    ensure(
        harness::output_lattice(10, 4) == vec![0, 3, 5, 8, 10],
        "output lattice rows are misplaced",
    )?;
    ensure(
        harness::output_lattice(2000, 64).len() == 65,
        "output lattice row count is wrong",
    )
}
