use thiserror::Error;

/// Errors raised by the numerical kernels and experiment drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration did not converge: achieved error {achieved:e} after {subdivisions} subdivisions")]
    Integration { achieved: f64, subdivisions: usize },

    #[error("incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")]
    Convergence { a: f64, b: f64, x: f64 },

    #[error("problem too large: {count} configurations exceed the cap of {cap}; {hint}")]
    Size { count: u128, cap: u128, hint: String },

    #[error("infeasible region: Monte Carlo acceptance rate {rate:e} below {floor:e}")]
    Infeasible { rate: f64, floor: f64 },

    #[error("Monte Carlo standard error {std_error:e} exceeds the ceiling {ceiling:e}")]
    Statistical { std_error: f64, ceiling: f64 },

    #[error("check failed: {0}")]
    Check(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
