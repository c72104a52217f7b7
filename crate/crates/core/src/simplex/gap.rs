//! Bayes-risk gap between the full and the truncated predictive under the truncated weight.

use crate::error::{domain, Result};
use crate::model::{ModelSpec, SymmetricPrior, TruncatedSimplex};
use crate::montecarlo::MonteCarloSettings;
use crate::numeric::QuadratureSettings;
use crate::risk::{weight_expectation, BayesMode, PriorWeight, TruncatedPredictiveTable};
use crate::Real;

/// `R(π̄^(N), p_π̄) − R(π̄^(N), p_π̄^(N))` where `π̄^(N)` is the symmetric
/// Dirichlet renormalized to `Δ_ε`.
///
/// The two Bayes risks differ only through `ln I`-ratios, so the gap is
/// integrated directly as `E_π̄^(N) Σ_x p(x|θ) Σ_y θ_y ln[I(x+e_y+α)/I(x+α)]`
/// instead of subtracting two nearly equal risks.
pub fn theorem2_gap<T: Real>(
    alpha: &SymmetricPrior<T>,
    trunc: &TruncatedSimplex<T>,
    model: &ModelSpec,
    quad: &QuadratureSettings<T>,
    mc: &MonteCarloSettings,
) -> Result<T> {
    if model.k > 3 {
        return domain("the gap is computed by quadrature for k <= 3");
    }
    let table = TruncatedPredictiveTable::new(alpha, trunc, model, quad)?;
    let weight = PriorWeight::Truncated { prior: *alpha, trunc: *trunc };
    Ok(weight_expectation(&weight, BayesMode::Quadrature, quad, mc, |t| table.log_ratio_expectation(t))?.value)
}
