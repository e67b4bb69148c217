use thiserror::Error;

/// Errors produced by model construction, the PIDE solver, the oracles and the
/// Monte Carlo estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "boundary substitution denominator vanishes at theta = {theta} \
         (critical theta for this mesh is {critical_theta})"
    )]
    VanishingBoundaryDenominator { theta: f64, critical_theta: f64 },

    #[error("eigenvector for eigenvalue {eigenvalue} is not sign-definite")]
    NotSignDefinite { eigenvalue: f64 },

    #[error("eigen-solve failed: {0}")]
    Eigen(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("jump intensity {rate} at x = {x} exceeds the thinning bound {bound}")]
    IntensityBoundExceeded { x: f64, rate: f64, bound: f64 },

    #[error("implicit relation has a pole at psi = {psi}")]
    Pole { psi: f64 },

    #[error("theta = {theta} lies outside the principal branch{}", pole_note(.pole))]
    OutOfBranch { theta: f64, pole: Option<f64> },

    #[error("psi curve is not convex at grid index {index} (second difference {second_difference})")]
    NotConvex { index: usize, second_difference: f64 },

    #[error("solve failed at theta = {theta}: {source}")]
    SolveFailed {
        theta: f64,
        #[source]
        source: Box<Error>,
    },
}

fn pole_note(pole: &Option<f64>) -> String {
    match pole {
        Some(p) => format!(" (pole at psi = {p})"),
        None => String::new(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
