//! Special functions, quadrature and summation primitives.

mod beta;
mod gamma;
mod logval;
mod quadrature;
mod sum;

pub use beta::{
    beta_segment, beta_segment_by_quadrature, incomplete_beta_pair, ln_beta, log_beta_segment,
    log_multivariate_beta, regularized_beta_segment, regularized_incomplete_beta,
};
pub use gamma::{log_binomial, log_factorial, log_gamma};
pub use logval::{log_sum_exp, LogValue, Sign};
pub use quadrature::{integrate, try_integrate, try_integrate_beta_weighted, QuadResult, QuadratureSettings};
pub use sum::{stable_sum, CompensatedSum, StableSum};
