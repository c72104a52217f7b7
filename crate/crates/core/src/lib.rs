//! Exact and asymptotic Kullback-Leibler prediction risks of Bayesian
//! predictive densities for the multinomial model under Dirichlet priors.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the experiment drivers use.

pub mod error;
pub mod expansion;
pub mod minimax;
pub mod model;
pub mod moments;
pub mod montecarlo;
pub mod numeric;
mod scalar;
pub mod risk;
pub mod simplex;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Prior = model::PriorSpec<f64>;
pub type Symmetric = model::SymmetricPrior<f64>;
pub type Truncation = model::TruncatedSimplex<f64>;
pub type Schedule = model::EpsilonSchedule<f64>;
pub type Theta = risk::ThetaPoint<f64>;
pub type Expansion = expansion::ExpansionTerms<f64>;
/// Moment polynomials with exact rational coefficients.
pub type ExactMomentPoly = moments::MomentPoly<num_rational::BigRational>;
