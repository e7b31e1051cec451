use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the analytic, numerical and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("p = {p} lies within the guard radius of the pole at lambda = {lambda}")]
    PoleAtLambda { p: Complex64, lambda: f64 },

    #[error("jump-law transform is undefined at p = {0}")]
    Domain(Complex64),

    #[error("resolvent transform has a pole at p = {0} (|D(p)| below guard)")]
    ResolventPole(Complex64),

    #[error("could not bracket the root of k(p) = {s} on (0, lambda)")]
    BracketFailure { s: f64 },

    #[error("Laplace inversion at x = {x} did not converge: {coarse} vs {fine}")]
    ConvergenceFailure { x: f64, coarse: f64, fine: f64 },

    #[error("Gaver-Stehfest weights of order {0} have lost all significant digits")]
    WeightOverflow(usize),

    #[error("quadrature on [{a}, {b}] did not reach tolerance (error estimate {error:e})")]
    QuadratureFailure { a: f64, b: f64, error: f64 },

    #[error("ill-conditioned partial fractions: poles {0} and {1} are closer than 1e-8")]
    IllConditioned(Complex64, Complex64),

    #[error("exit representations disagree: resolvent form {resolvent}, kernel form {kernel}")]
    RepresentationMismatch { resolvent: f64, kernel: f64 },

    #[error("total probability violated: residual {0:e}")]
    ClosureViolation(f64),

    #[error("simulated path exceeded the cap of {0} jumps")]
    CapExceeded(usize),

    #[error("unsupported: {0}")]
    Unsupported(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
