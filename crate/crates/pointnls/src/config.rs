//! TOML problem definitions.
//!
//! A run is described by a small structured config (note that the scalar
//! keys must precede the first table header, as in any TOML document):
//!
//! ```toml
//! epsilon = 0.1 # defect width of the squeezed flow
//! T = 0.5       # time horizon; must be an integer number of steps
//! dt = 2.5e-4
//!
//! [grid]
//! L = 16.0      # half-width of the periodic box [-L, L)
//! M = 4096      # number of nodes, a power of two
//!
//! [[defects]]
//! y = 0.0       # site, must land on a grid node
//! mu = 0.5      # nonlinearity exponent
//! potential = { kind = "gaussian", amplitude = 0.5641895835477563, width = 1.0 }
//!
//! [psi0]
//! kind = "gaussian"
//! amplitude = 1.0
//! width = 1.0
//! ```
//!
//! Optional sections: `[params]` (fixed-point damping/tolerance and the
//! blow-up guard), `[experiment]` (the width ladder and reporting knobs used
//! by the experiment drivers), and a top-level `override_admissibility`
//! flag for deliberately running outside the guaranteed-global regime.
//!
//! Potential kinds mirror [`ProfileKind`]: `gaussian` (amplitude, width),
//! `box` (amplitude, width), `double_well` (amplitude, width, separation),
//! and `samples` (start, step, values).

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid1D;
use crate::potential::{PotentialProfile, ProfileKind};
use crate::problem::{DefectSpec, PointProblem, ScaledProblem, SolverParams};

/// Closed-form initial data, realizable on any grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// `amplitude * exp(-((x - center)/width)^2) * exp(i momentum x)`.
    Gaussian {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        center: f64,
        #[serde(default)]
        momentum: f64,
    },
    /// The zero field (useful for plumbing tests).
    Zero,
}

fn one() -> f64 {
    1.0
}

impl InitialData {
    /// Samples the closed form on a grid.
    pub fn realize(&self, grid: &Grid1D) -> Result<ComplexField> {
        match self {
            InitialData::Gaussian { amplitude, width, center, momentum } => {
                for (name, &value) in
                    [("amplitude", amplitude), ("width", width), ("center", center), ("momentum", momentum)]
                {
                    if !value.is_finite() {
                        return Err(Error::BadParameter { name, value });
                    }
                }
                if *width <= 0.0 {
                    return Err(Error::BadParameter { name: "width", value: *width });
                }
                let (a, w, c, p) = (*amplitude, *width, *center, *momentum);
                Ok(ComplexField::from_fn(grid.clone(), |x| {
                    let u = (x - c) / w;
                    let (s, co) = (p * x).sin_cos();
                    a * (-u * u).exp() * Complex64::new(co, s)
                }))
            }
            InitialData::Zero => Ok(ComplexField::zeros(grid.clone())),
        }
    }
}

/// `[grid]` section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "M")]
    pub num_points: usize,
}

/// One `[[defects]]` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectConfig {
    #[serde(rename = "y")]
    pub site: f64,
    pub mu: f64,
    pub potential: PotentialConfig,
}

/// The `potential` table of a defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialConfig {
    Gaussian { amplitude: f64, width: f64 },
    Box { amplitude: f64, width: f64 },
    DoubleWell { amplitude: f64, width: f64, separation: f64 },
    Samples { start: f64, step: f64, values: Vec<f64> },
}

impl PotentialConfig {
    pub fn build(&self) -> Result<PotentialProfile> {
        let kind = match self.clone() {
            PotentialConfig::Gaussian { amplitude, width } => {
                ProfileKind::Gaussian { amplitude, width }
            }
            PotentialConfig::Box { amplitude, width } => ProfileKind::Box { amplitude, width },
            PotentialConfig::DoubleWell { amplitude, width, separation } => {
                ProfileKind::DoubleWell { amplitude, width, separation }
            }
            PotentialConfig::Samples { start, step, values } => {
                ProfileKind::Samples { start, step, values }
            }
        };
        PotentialProfile::new(kind)
    }
}

/// `[params]` section; every field defaults to [`SolverParams::default`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamsConfig {
    pub theta: f64,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub blowup_factor: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        let p = SolverParams::default();
        ParamsConfig {
            theta: p.theta,
            fp_tol: p.fp_tol,
            fp_max_iter: p.fp_max_iter,
            blowup_factor: p.blowup_factor,
        }
    }
}

impl ParamsConfig {
    pub fn build(&self) -> SolverParams {
        SolverParams {
            theta: self.theta,
            fp_tol: self.fp_tol,
            fp_max_iter: self.fp_max_iter,
            blowup_factor: self.blowup_factor,
        }
    }
}

/// `[experiment]` section: the width ladder and reporting knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Strictly decreasing defect widths for the convergence ladder.
    pub epsilons: Vec<f64>,
    /// Nominal number of output intervals in `[0, T]` for sup-in-time
    /// errors (the drivers sample twice this finely to measure lattice
    /// sensitivity).
    pub output_count: usize,
    /// Exclude the largest width from rate fits (it is the sample most
    /// likely to sit outside the asymptotic regime).
    pub drop_largest_width: bool,
    /// Number of dt-halvings in self-convergence studies.
    pub self_refine_levels: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            epsilons: Vec::new(),
            output_count: 64,
            drop_largest_width: true,
            self_refine_levels: 3,
        }
    }
}

/// A full problem definition as read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub defects: Vec<DefectConfig>,
    pub psi0: InitialData,
    pub epsilon: f64,
    #[serde(rename = "T")]
    pub time_horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub override_admissibility: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
}

/// Reads and parses a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_config(&text)
}

/// Parses config text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

impl RunConfig {
    /// Serializes the (possibly override-mutated) config back to TOML, for
    /// echoing the effective settings next to a run's outputs.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build_grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.grid.half_width, self.grid.num_points)
    }

    pub fn defect_specs(&self) -> Result<Vec<DefectSpec>> {
        self.defects
            .iter()
            .map(|d| DefectSpec::new(d.site, d.mu, d.potential.build()?))
            .collect()
    }

    pub fn solver_params(&self) -> SolverParams {
        self.params.build()
    }

    /// Number of steps covering `[0, T]`; `T` must sit on the step lattice.
    pub fn steps(&self) -> Result<usize> {
        steps_for(self.time_horizon, self.dt)
    }

    pub fn initial_field(&self, grid: &Grid1D) -> Result<ComplexField> {
        self.psi0.realize(grid)
    }

    /// The squeezed-flow problem this config describes.
    pub fn scaled_problem(&self) -> Result<ScaledProblem> {
        ScaledProblem::new(
            self.build_grid()?,
            self.defect_specs()?,
            self.epsilon,
            self.override_admissibility,
        )
    }

    /// The matching point-defect limit problem, with each coupling strength
    /// computed from its profile integral.
    pub fn point_problem(&self) -> Result<PointProblem> {
        PointProblem::from_scaled(&self.scaled_problem()?, self.override_admissibility)
    }
}

/// Checks that `t_end` is an integer number of steps and returns that number.
pub fn steps_for(t_end: f64, dt: f64) -> Result<usize> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::BadParameter { name: "dt", value: dt });
    }
    if !t_end.is_finite() || t_end <= 0.0 {
        return Err(Error::BadParameter { name: "T", value: t_end });
    }
    let steps = (t_end / dt).round();
    if steps < 1.0 || (steps * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
        return Err(Error::TimeOffLattice { t: t_end, dt });
    }
    Ok(steps as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANONICAL: &str = r#"
        epsilon = 0.1
        T = 0.5
        dt = 2.5e-4

        [grid]
        L = 16.0
        M = 4096

        [[defects]]
        y = 0.0
        mu = 0.5
        potential = { kind = "gaussian", amplitude = 0.5641895835477563, width = 1.0 }

        [psi0]
        kind = "gaussian"

        [experiment]
        epsilons = [0.2, 0.1, 0.05, 0.025]
    "#;

    #[test]
    fn canonical_config_round_trips_into_problems() {
        let cfg = parse_config(CANONICAL).unwrap();
        assert_eq!(cfg.steps().unwrap(), 2000);
        let scaled = cfg.scaled_problem().unwrap();
        assert_eq!(scaled.grid().len(), 4096);
        let point = cfg.point_problem().unwrap();
        // alpha comes from the profile integral, not from the file.
        assert!((point.defects()[0].alpha() - 1.0).abs() < 1e-9);
        let psi0 = cfg.initial_field(&scaled.grid()).unwrap();
        assert!((psi0.values()[4096 / 2].re - 1.0).abs() < 1e-15);
        let exp = cfg.experiment.unwrap();
        assert_eq!(exp.output_count, 64);
        assert!(exp.drop_largest_width);
    }

    #[test]
    fn defaults_fill_params_and_momentum() {
        let cfg = parse_config(CANONICAL).unwrap();
        assert_eq!(cfg.params.build(), SolverParams::default());
        match cfg.psi0 {
            InitialData::Gaussian { amplitude, width, center, momentum } => {
                assert_eq!((amplitude, width, center, momentum), (1.0, 1.0, 0.0, 0.0));
            }
            other => panic!("unexpected psi0 {other:?}"),
        }
    }

    #[test]
    fn effective_config_echo_round_trips() {
        let mut cfg = parse_config(CANONICAL).unwrap();
        cfg.epsilon = 0.05; // a CLI-style override
        let echoed = cfg.to_toml().unwrap();
        let back = parse_config(&echoed).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn parse_errors_are_reported_as_config_errors() {
        match parse_config("grid = 3") {
            Err(Error::Config(_)) => {}
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn time_horizon_must_sit_on_the_step_lattice() {
        match steps_for(0.5, 3e-4) {
            Err(Error::TimeOffLattice { .. }) => {}
            other => panic!("expected an off-lattice error, got {other:?}"),
        }
        assert_eq!(steps_for(0.5, 2.5e-4).unwrap(), 2000);
        // A horizon that is only roundoff away from the lattice is accepted.
        assert_eq!(steps_for(0.3, 1e-3).unwrap(), 300);
    }

    #[test]
    fn initial_data_with_momentum_realizes_the_plane_wave_factor() {
        let grid = Grid1D::new(8.0, 64).unwrap();
        let data = InitialData::Gaussian {
            amplitude: 2.0,
            width: 1.5,
            center: 0.5,
            momentum: 3.0,
        };
        let field = data.realize(&grid).unwrap();
        let x = grid.node(20);
        let u = (x - 0.5) / 1.5;
        let want = 2.0 * (-u * u).exp() * Complex64::new(0.0, 3.0 * x).exp();
        assert!((field.values()[20] - want).norm() < 1e-14);
    }

    #[test]
    fn zero_initial_data_is_zero() {
        let grid = Grid1D::new(8.0, 16).unwrap();
        let field = InitialData::Zero.realize(&grid).unwrap();
        assert!(field.values().iter().all(|v| v.norm() == 0.0));
    }
}
