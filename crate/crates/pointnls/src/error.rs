//! Error type shared across the crate.
//!
//! Errors split into two broad classes: *validation* errors (bad grids,
//! inadmissible nonlinearities, malformed configs — anything detectable
//! before time stepping starts) and *solver* errors (failures during a run,
//! such as a tripped blow-up guard or a stalled fixed-point iteration).
//! The CLI maps the former to exit code 2 and the latter to exit code 3.

use thiserror::Error;

/// Everything that can go wrong while setting up or running a solve.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size must be a power of two, got {m}")]
    NotPowerOfTwo { m: usize },

    #[error("grid half-width must be positive and finite, got {l}")]
    BadHalfWidth { l: f64 },

    #[error("parameter `{name}` is out of range: {value}")]
    BadParameter { name: &'static str, value: f64 },

    #[error("defect site {site} does not coincide with a grid node")]
    SiteOffGrid { site: f64 },

    #[error("duplicate defect site {site}")]
    DuplicateSite { site: f64 },

    #[error(
        "grid spacing {h} too coarse for epsilon {epsilon}: need h <= epsilon/8 \
         so the narrow potential is resolved"
    )]
    ResolutionTooCoarse { h: f64, epsilon: f64 },

    #[error("scaled supports of defects {first} and {second} overlap on the grid")]
    OverlappingSupports { first: usize, second: usize },

    #[error("scaled support of defect {defect} leaves the computational domain")]
    SupportOutsideDomain { defect: usize },

    #[error(
        "defect {defect}: nonlinearity exponent mu = {mu} is not admissible ({why}); \
         pass the admissibility override to run anyway"
    )]
    Inadmissible { defect: usize, mu: f64, why: String },

    #[error("potential profile is not integrable or contains non-finite samples")]
    BadProfile,

    #[error("field contains non-finite values")]
    NonFiniteField,

    #[error("field length {got} does not match grid size {want}")]
    FieldLength { got: usize, want: usize },

    #[error("free-propagator kernel is singular at t = 0")]
    ZeroTimeKernel,

    #[error("time {t} is not a node of the step lattice with dt = {dt}")]
    TimeOffLattice { t: f64, dt: f64 },

    #[error("trajectories were produced on different (grid, dt, output-time) lattices: {what}")]
    MismatchedLattices { what: String },

    #[error("epsilon ladder must be strictly decreasing and positive")]
    BadLadder,

    #[error("rate fit needs at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("errors are at or below roundoff; rate fit would be meaningless")]
    DegenerateErrors,

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(
        "solution norm {norm} exceeded the blow-up guard ({factor} x initial) \
         at step {step} (t = {t})"
    )]
    BlowUp { step: usize, t: f64, norm: f64, factor: f64 },

    #[error("fixed-point iteration stalled at step {step} (t = {t}), residual {residual}")]
    FixedPointStalled { step: usize, t: f64, residual: f64 },

    #[error("run at defect width epsilon = {epsilon} failed: {source}")]
    WidthRunFailed {
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BlowUp { .. } | Error::FixedPointStalled { .. } => 3,
            Error::WidthRunFailed { source, .. } => source.exit_code(),
            _ => 2,
        }
    }

    /// Short machine-readable tag for log lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotPowerOfTwo { .. }
            | Error::BadHalfWidth { .. }
            | Error::BadParameter { .. } => "parameter",
            Error::SiteOffGrid { .. } | Error::DuplicateSite { .. } => "site",
            Error::ResolutionTooCoarse { .. } => "resolution",
            Error::OverlappingSupports { .. } | Error::SupportOutsideDomain { .. } => "support",
            Error::Inadmissible { .. } => "admissibility",
            Error::BadProfile => "profile",
            Error::NonFiniteField | Error::FieldLength { .. } => "field",
            Error::ZeroTimeKernel | Error::TimeOffLattice { .. } => "time",
            Error::MismatchedLattices { .. } => "lattice",
            Error::BadLadder | Error::TooFewSamples { .. } | Error::DegenerateErrors => "ladder",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::BlowUp { .. } => "blowup",
            Error::FixedPointStalled { .. } => "fixed-point",
            Error::WidthRunFailed { source, .. } => source.kind(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
