use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the laboratory can report.
///
/// Variants are grouped by the process exit code the runners map them to:
/// configuration problems (2), violations of a mathematical structure the
/// model guarantees (3), and numerical breakdowns (4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("the step-threshold rate has no {0}")]
    NonSmoothModel(&'static str),

    #[error("a Dirac delay kernel has no pointwise density")]
    DiracNotDensity,

    #[error("operation needs a delay kernel with a density, got a Dirac mass")]
    KernelNotDensity,

    #[error("densities carry different masses ({left} vs {right})")]
    MassMismatch { left: f64, right: f64 },

    #[error("perturbation must have zero mass, got {mass:e}")]
    MassNotZero { mass: f64 },

    #[error("negative density {value:e} in cell {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("all survival weights underflowed on the grid")]
    QuadratureUnderflow,

    #[error("no steady state found for eps = {eps}")]
    NoRootFound { eps: f64 },

    #[error("eps * sup|d_mu a| = {bound} is not below 1")]
    ContractionViolated { bound: f64 },

    #[error("activity fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("time step {dt} differs from the cell width {dx}")]
    CflViolation { dt: f64, dx: f64 },

    #[error("decay window reaches the noise floor ({value:e} at t = {t})")]
    WindowBelowFloor { t: f64, value: f64 },

    #[error("kappa = {kappa} is not below 1, outside the weak connectivity regime")]
    KappaGeqOne { kappa: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the experiment runners.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Domain(_) => 2,
            Error::NonSmoothModel(_)
            | Error::DiracNotDensity
            | Error::KernelNotDensity
            | Error::MassMismatch { .. }
            | Error::MassNotZero { .. }
            | Error::NegativeDensity { .. }
            | Error::NoRootFound { .. }
            | Error::ContractionViolated { .. }
            | Error::CflViolation { .. }
            | Error::KappaGeqOne { .. } => 3,
            Error::QuadratureUnderflow
            | Error::NoConvergence { .. }
            | Error::WindowBelowFloor { .. }
            | Error::Eigensolver(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
