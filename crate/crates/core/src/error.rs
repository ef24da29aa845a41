use thiserror::Error;

/// Errors raised anywhere in the discretization pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("slab index {index} out of range 1..={count}")]
    SlabOutOfRange { index: usize, count: usize },

    #[error("conjugate gradients did not converge after {iterations} iterations (residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("operator is not positive definite (curvature {curvature:e} at iteration {iteration})")]
    NotPositiveDefinite { iteration: usize, curvature: f64 },

    #[error("non-finite nonlinearity value {value} at x = ({x}, {y}), u = {u}")]
    NonFinite { x: f64, y: f64, u: f64, value: f64 },

    #[error("per-step weight {weight} fell below 1 - rho = {bound} at x = ({x}, {y})")]
    MonotonicityViolated { weight: f64, bound: f64, x: f64, y: f64 },

    #[error("Newton failed in step {step} after {iterations} iterations (residual {residual:e})")]
    NewtonNotConverged { step: usize, iterations: usize, residual: f64 },

    #[error("time step {step} failed: {source}")]
    Step { step: usize, source: Box<Error> },

    #[error("time grid violates k <= rho/gamma (k = {k}, gamma = {gamma}, rho = {rho})")]
    StepTooLarge { k: f64, gamma: f64, rho: f64 },

    #[error("exact solution has nonzero trace {value:e} at boundary point ({x}, {y})")]
    BoundaryTrace { x: f64, y: f64, value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
