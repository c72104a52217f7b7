//! Exact KL prediction risk `R(θ, p_π(y|x)) = E_x Σ_y θ_y ln(θ_y / p(y|x))` of
//! Dirichlet predictive densities, its supremum over truncated simplices and
//! Bayes risks.
//!
//! The risk separates over coordinates: with `s_i = (a_i − Aθ_i)/((N+A)θ_i)` and
//! `w_i = (x_i − Nθ_i)/(Nθ_i + a_i)`,
//! `R = Σ_i θ_i [−ln(1+s_i) − E ln(1+w_i)]` where `x_i ~ Bin(N, θ_i)`.

mod bayes;
mod search;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{s_term, ModelSpec, PriorSpec};
use crate::numeric::{log_factorial, stable_sum, CompensatedSum, StableSum};
use crate::simplex::for_each_composition;
use crate::Real;

pub use bayes::{
    bayes_risk, bayes_risk_with_mode, weight_expectation, BayesMode, BayesRiskEstimate, PredictiveKind, PriorWeight,
    TruncatedPredictiveTable,
};
pub use search::{maximize_separable, sup_risk, sup_risk_with, SeparableMax, SupRiskReport, SupSearchSettings};

/// Default cap on the number of compositions visited by [`risk_enumeration`].
pub const ENUMERATION_CAP: u128 = 2_000_000;

/// A point in the open simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThetaPoint<T> {
    theta: Vec<T>,
}

impl<T: Real> ThetaPoint<T> {
    pub fn new(theta: Vec<T>) -> Result<Self> {
        if theta.len() < 2 {
            return domain("theta needs at least two coordinates");
        }
        if let Some(bad) = theta.iter().find(|&&t| !(t > T::zero() && t < T::one())) {
            return domain(format!("theta coordinates must lie in (0, 1), got {bad}"));
        }
        let total = stable_sum(theta.iter().copied());
        if (total - T::one()).abs() > T::lit(1e-14) {
            return domain(format!("theta must sum to 1, sums to {total}"));
        }
        Ok(Self { theta })
    }

    /// Completes `(θ_1..θ_{k−1})` with `θ_k = 1 − Σ θ_i`.
    pub fn from_leading(leading: &[T]) -> Result<Self> {
        let mut theta = leading.to_vec();
        theta.push(T::one() - stable_sum(leading.iter().copied()));
        Self::new(theta)
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![T::one() / T::count(k); k])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.theta
    }

    pub fn k(&self) -> usize {
        self.theta.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RiskMethod {
    Enumeration,
    Coordinatewise,
}

/// Risk in nats at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport<T> {
    pub exact_risk: T,
    /// `θ_i E_x ln(θ_i / p(i|x))`; sums to `exact_risk`.
    pub per_coordinate: Vec<T>,
    pub theta: ThetaPoint<T>,
    pub method: RiskMethod,
}

fn check_inputs<T: Real>(prior: &PriorSpec<T>, model: &ModelSpec, theta: &ThetaPoint<T>) -> Result<()> {
    prior.check_model(model)?;
    if theta.k() != model.k {
        return domain(format!("theta has {} coordinates but the model has k = {}", theta.k(), model.k));
    }
    Ok(())
}

/// `Bin(n, θ)` probabilities for `x = 0..=n`.
///
/// Built by the ratio recurrence outward from the mode and normalized, which
/// keeps relative errors near `n·ulp` instead of the `ulp·|ln C(n, x)|` of
/// log-domain evaluation. Tails below the smallest normal number are set to zero.
/// The normalizing sum and the risk's inner sum use compensated summation in
/// increasing-`x` order, which is deterministic and far cheaper than exact
/// rounding over a few thousand terms spanning hundreds of binades.
pub fn binomial_pmf<T: Real>(n: u64, theta: T) -> Vec<T> {
    let len = n as usize + 1;
    let mut p = vec![T::zero(); len];
    if theta <= T::zero() {
        p[0] = T::one();
        return p;
    }
    if theta >= T::one() {
        p[len - 1] = T::one();
        return p;
    }
    let nf = T::lit(n as f64);
    let mode = ((nf + T::one()) * theta).floor().to_usize().unwrap_or(0).min(n as usize);
    let odds = theta / (T::one() - theta);
    p[mode] = T::one();
    for x in mode..n as usize {
        let next = p[x] * odds * T::count(n as usize - x) / T::count(x + 1);
        // subnormal tails are negligible and very slow to compute with
        if next < T::min_positive_value() {
            break;
        }
        p[x + 1] = next;
    }
    for x in (1..=mode).rev() {
        let prev = p[x] / odds * T::count(x) / T::count(n as usize - x + 1);
        if prev < T::min_positive_value() {
            break;
        }
        p[x - 1] = prev;
    }
    let mut total = CompensatedSum::new();
    for &v in &p {
        total.add(v);
    }
    let total = total.value();
    for v in &mut p {
        *v /= total;
    }
    p
}

/// `θ [−ln(1+s) − Σ_x Bin(N,x,θ) ln(1+w(x))]`, one coordinate's share of the risk.
/// Zero at `θ = 0` (the `θ ln θ → 0` limit).
pub fn coordinate_risk<T: Real>(a: T, total: T, n: u64, theta: T) -> T {
    if theta <= T::zero() {
        return T::zero();
    }
    let nf = T::lit(n as f64);
    let s = s_term(a, total, nf, theta);
    let centre = nf * theta;
    let denom = centre + a;
    let pmf = binomial_pmf(n, theta);
    let mut acc = CompensatedSum::new();
    for (x, &p) in pmf.iter().enumerate() {
        if p > T::zero() {
            acc.add(p * ((T::count(x) - centre) / denom).ln_1p());
        }
    }
    theta * (-s.ln_1p() - acc.value())
}

/// Risk through the coordinatewise decomposition; `O(N k)`.
pub fn risk_coordinatewise<T: Real>(prior: &PriorSpec<T>, model: &ModelSpec, theta: &ThetaPoint<T>) -> Result<RiskReport<T>> {
    check_inputs(prior, model, theta)?;
    let per_coordinate: Vec<T> = prior
        .a()
        .iter()
        .zip(theta.as_slice())
        .map(|(&a, &t)| coordinate_risk(a, prior.total(), model.n, t))
        .collect();
    Ok(RiskReport {
        exact_risk: stable_sum(per_coordinate.iter().copied()),
        per_coordinate,
        theta: theta.clone(),
        method: RiskMethod::Coordinatewise,
    })
}

/// `C(n + k − 1, k − 1)`, saturating.
pub fn composition_count(n: u64, k: usize) -> u128 {
    let mut c: u128 = 1;
    for j in 1..k as u128 {
        c = match c.checked_mul(n as u128 + j) {
            Some(v) => v / j,
            None => return u128::MAX,
        };
    }
    c
}

/// Risk by summing over every data composition `x` and every outcome `y`.
pub fn risk_enumeration<T: Real>(prior: &PriorSpec<T>, model: &ModelSpec, theta: &ThetaPoint<T>) -> Result<RiskReport<T>> {
    risk_enumeration_with_cap(prior, model, theta, ENUMERATION_CAP)
}

pub fn risk_enumeration_with_cap<T: Real>(
    prior: &PriorSpec<T>,
    model: &ModelSpec,
    theta: &ThetaPoint<T>,
    cap: u128,
) -> Result<RiskReport<T>> {
    check_inputs(prior, model, theta)?;
    let count = composition_count(model.n, model.k);
    if count > cap {
        return Err(Error::Size {
            count,
            cap,
            hint: "use risk_coordinatewise, which is O(N k)".into(),
        });
    }
    let th = theta.as_slice();
    let log_theta: Vec<T> = th.iter().map(|t| t.ln()).collect();
    let log_n_fact = log_factorial::<T>(model.n);
    let denom = T::lit(model.n as f64) + prior.total();
    let mut sums: Vec<StableSum<T>> = (0..model.k).map(|_| StableSum::new()).collect();
    for_each_composition(model.n, model.k, &mut |x| {
        let mut log_p = log_n_fact;
        for (&xi, &lt) in x.iter().zip(&log_theta) {
            log_p -= log_factorial::<T>(xi);
            if xi > 0 {
                log_p += T::lit(xi as f64) * lt;
            }
        }
        let p = log_p.exp();
        for (y, acc) in sums.iter_mut().enumerate() {
            let q = (T::lit(x[y] as f64) + prior.a()[y]) / denom;
            acc.add(p * th[y] * (th[y] / q).ln());
        }
        Ok(())
    })?;
    let per_coordinate: Vec<T> = sums.iter().map(|s| s.value()).collect();
    Ok(RiskReport {
        exact_risk: stable_sum(per_coordinate.iter().copied()),
        per_coordinate,
        theta: theta.clone(),
        method: RiskMethod::Enumeration,
    })
}
