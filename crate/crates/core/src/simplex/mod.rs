//! Dirichlet integrals over the truncated simplex
//! `Δ_ε = {θ : θ_i ≥ ε, Σ θ_i = 1}` and the inequality checks built on them.
//!
//! Integrals over `Δ_ε` are evaluated by stick-breaking: θ_1 has a
//! Beta(α_1, α_2 + … + α_k) marginal and, given θ_1, the rescaled remainder
//! `(θ_2..θ_k)/(1 − θ_1)` is Dirichlet(α_2..α_k) on a simplex with floor
//! `ε/(1 − θ_1)`. The last level is a regularized incomplete beta difference.

mod gap;
mod lemmas;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::montecarlo::{dirichlet_rejection, MonteCarloSettings};
use crate::numeric::{log_multivariate_beta, regularized_beta_segment, stable_sum, try_integrate_beta_weighted, QuadResult, QuadratureSettings};
use crate::Real;

pub use gap::theorem2_gap;
pub use lemmas::{
    default_lemma_suite, for_each_composition, lemma1_check, lemma4_check, lemma5_check, lemma6_check, lemma7_check, lemma8_check, run_lemma_suite, LemmaCheck,
    LemmaReport, LemmaTolerances,
};

/// Acceptance rates below this make the rejection estimate meaningless.
pub const MIN_ACCEPTANCE_RATE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IntegralMethod {
    Exact1D,
    RecursiveQuad,
    MonteCarlo,
}

/// `B_{Δ_ε}(α)` held in log form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedDirichletIntegral<T> {
    pub alphas: Vec<T>,
    pub eps: T,
    /// `ln B_{Δ_ε}(α)`.
    pub value_log: T,
    pub method: IntegralMethod,
    /// Relative error estimate of the integral (three standard errors for Monte Carlo).
    pub error_estimate: T,
}

impl<T: Real> TruncatedDirichletIntegral<T> {
    /// `ln I_{Δ_ε}(α) = ln B_{Δ_ε}(α) − ln B(α)`.
    pub fn log_i(&self) -> T {
        self.value_log - log_multivariate_beta(&self.alphas).expect("validated parameters")
    }

    pub fn value(&self) -> T {
        self.value_log.exp()
    }
}

fn check_alphas<T: Real>(alphas: &[T]) -> Result<()> {
    if alphas.len() < 2 {
        return domain("simplex integrals need k >= 2");
    }
    if let Some(bad) = alphas.iter().find(|&&a| !(a > T::zero()) || !a.is_finite()) {
        return domain(format!("Dirichlet exponents must be positive, got {bad}"));
    }
    Ok(())
}

fn check_eps<T: Real>(eps: T, k: usize) -> Result<()> {
    if !(eps > T::zero() && eps < T::one() / T::count(k)) {
        return domain(format!("need 0 < eps < 1/k = {}, got {eps}", 1.0 / k as f64));
    }
    Ok(())
}

/// Mass of Dirichlet(α) on the simplex of total `scale` with coordinate floor `eps`.
fn truncated_mass<T: Real>(alphas: &[T], eps: T, scale: T, quad: &QuadratureSettings<T>) -> Result<QuadResult<T>> {
    let k = alphas.len();
    let (lo, hi) = if eps == T::zero() {
        (T::zero(), T::one())
    } else {
        (eps / scale, T::one() - T::count(k - 1) * eps / scale)
    };
    if !(lo < hi) {
        return Ok(QuadResult {
            value: T::zero(),
            error: T::zero(),
            subdivisions: 0,
        });
    }
    let rest: T = stable_sum(alphas[1..].iter().copied());
    if k == 2 {
        let value = regularized_beta_segment(alphas[0], rest, lo, hi, quad)?;
        return Ok(QuadResult {
            value,
            error: T::lit(64.0) * T::epsilon() * value,
            subdivisions: 0,
        });
    }
    let mut inner_error = T::zero();
    let mut r = try_integrate_beta_weighted(
        alphas[0],
        rest,
        lo,
        hi,
        |u| {
            let inner = truncated_mass(&alphas[1..], eps, scale * (T::one() - u), quad)?;
            inner_error = inner_error.max(inner.error);
            Ok(inner.value)
        },
        quad,
    )?;
    r.error += inner_error;
    Ok(r)
}

fn expectation_rec<T, F>(
    alphas: &[T],
    eps: T,
    scale: T,
    prefix: &mut Vec<T>,
    f: &mut F,
    quad: &QuadratureSettings<T>,
) -> Result<T>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    let k = alphas.len();
    if k == 1 {
        prefix.push(scale);
        let v = f(prefix);
        prefix.pop();
        return v;
    }
    let (lo, hi) = if eps == T::zero() {
        (T::zero(), T::one())
    } else {
        (eps / scale, T::one() - T::count(k - 1) * eps / scale)
    };
    if !(lo < hi) {
        return Ok(T::zero());
    }
    let rest: T = stable_sum(alphas[1..].iter().copied());
    let r = try_integrate_beta_weighted(
        alphas[0],
        rest,
        lo,
        hi,
        |u| {
            prefix.push(scale * u);
            let v = expectation_rec(&alphas[1..], eps, scale * (T::one() - u), prefix, f, quad);
            prefix.pop();
            v
        },
        quad,
    )?;
    Ok(r.value)
}

/// `E_{Dirichlet(α)}[f(θ) · 1{θ ∈ Δ_ε}]` by nested adaptive quadrature.
///
/// `eps = 0` integrates over the whole simplex. `f` receives all `k` coordinates.
pub fn truncated_dirichlet_expectation<T, F>(alphas: &[T], eps: T, mut f: F, quad: &QuadratureSettings<T>) -> Result<T>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    check_alphas(alphas)?;
    if !(eps >= T::zero() && eps < T::one() / T::count(alphas.len())) {
        return domain(format!("need 0 <= eps < 1/k, got {eps}"));
    }
    let mut prefix = Vec::with_capacity(alphas.len());
    expectation_rec(alphas, eps, T::one(), &mut prefix, &mut f, quad)
}

/// `(ln I_{Δ_ε}(α), relative error estimate)` by deterministic quadrature,
/// exact incomplete-beta evaluation for `k = 2`.
pub fn log_i_trunc<T: Real>(alphas: &[T], eps: T, quad: &QuadratureSettings<T>) -> Result<(T, T)> {
    check_alphas(alphas)?;
    if eps == T::zero() {
        return Ok((T::zero(), T::zero()));
    }
    check_eps(eps, alphas.len())?;
    let r = truncated_mass(alphas, eps, T::one(), quad)?;
    if !(r.value > T::zero()) {
        return Err(Error::Domain(format!("truncated Dirichlet mass underflowed for alphas {alphas:?}")));
    }
    Ok((r.value.ln(), r.error / r.value))
}

fn monte_carlo_i<T: Real>(alphas: &[T], eps: T, mc: &MonteCarloSettings) -> Result<(T, T)> {
    let est = dirichlet_rejection(alphas, mc, |theta| {
        let inside = theta.iter().all(|&t| t >= eps);
        Some(if inside { T::one() } else { T::zero() })
    })?;
    let rate = est.mean;
    if !(rate >= MIN_ACCEPTANCE_RATE) {
        return Err(Error::Infeasible {
            rate,
            floor: MIN_ACCEPTANCE_RATE,
        });
    }
    Ok((T::lit(rate.ln()), T::lit(3.0 * est.std_error / rate)))
}

/// `B_{Δ_ε}(α)` with an explicit method.
pub fn b_trunc_with<T: Real>(
    alphas: &[T],
    eps: T,
    method: IntegralMethod,
    quad: &QuadratureSettings<T>,
    mc: &MonteCarloSettings,
) -> Result<TruncatedDirichletIntegral<T>> {
    check_alphas(alphas)?;
    check_eps(eps, alphas.len())?;
    let k = alphas.len();
    let (log_i, error_estimate) = match method {
        IntegralMethod::Exact1D => {
            if k != 2 {
                return domain("the exact one-dimensional route only applies to k = 2");
            }
            log_i_trunc(alphas, eps, quad)?
        }
        IntegralMethod::RecursiveQuad => {
            if k == 2 {
                let rest = alphas[1];
                let r = try_integrate_beta_weighted(alphas[0], rest, eps, T::one() - eps, |_| Ok(T::one()), quad)?;
                (r.value.ln(), r.error / r.value)
            } else {
                log_i_trunc(alphas, eps, quad)?
            }
        }
        IntegralMethod::MonteCarlo => monte_carlo_i(alphas, eps, mc)?,
    };
    Ok(TruncatedDirichletIntegral {
        alphas: alphas.to_vec(),
        eps,
        value_log: log_i + log_multivariate_beta(alphas)?,
        method,
        error_estimate,
    })
}

/// Default method for `k`: exact for 2, nested quadrature for 3, rejection Monte Carlo beyond.
pub fn default_method(k: usize) -> IntegralMethod {
    match k {
        2 => IntegralMethod::Exact1D,
        3 => IntegralMethod::RecursiveQuad,
        _ => IntegralMethod::MonteCarlo,
    }
}

/// `B_{Δ_ε}(α) = ∫_{Δ_ε} Π θ_i^(α_i − 1) dθ_1 … dθ_{k−1}`.
pub fn b_trunc<T: Real>(alphas: &[T], eps: T, quad: &QuadratureSettings<T>) -> Result<TruncatedDirichletIntegral<T>> {
    b_trunc_with(alphas, eps, default_method(alphas.len()), quad, &MonteCarloSettings::default())
}

/// `I_{Δ_ε}(α) = B_{Δ_ε}(α) / B(α)`, the Dirichlet mass retained on `Δ_ε`.
pub fn i_trunc<T: Real>(alphas: &[T], eps: T, quad: &QuadratureSettings<T>) -> Result<T> {
    Ok(b_trunc(alphas, eps, quad)?.log_i().exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q() -> QuadratureSettings<f64> {
        QuadratureSettings::default()
    }

    #[test]
    fn uniform_two_categories() {
        for &eps in &[0.01, 0.1, 0.3, 0.45] {
            let b = b_trunc(&[1.0, 1.0], eps, &q()).unwrap();
            assert!((b.value() - (1.0 - 2.0 * eps)).abs() < 1e-14);
            assert_eq!(b.method, IntegralMethod::Exact1D);
            assert!((i_trunc(&[1.0, 1.0], eps, &q()).unwrap() - (1.0 - 2.0 * eps)).abs() < 1e-14);
        }
    }

    #[test]
    fn uniform_three_categories_is_a_shrunken_simplex() {
        let b = b_trunc(&[1.0, 1.0, 1.0], 0.1, &q()).unwrap();
        assert_eq!(b.method, IntegralMethod::RecursiveQuad);
        assert!((b.value() - 0.7f64.powi(2) * 0.5).abs() < 1e-11, "{}", b.value());
    }

    #[test]
    fn small_eps_recovers_full_integral() {
        for alphas in [vec![2.0f64, 3.0], vec![1.5, 0.7, 2.0]] {
            let full = log_multivariate_beta(&alphas).unwrap().exp();
            let b = b_trunc(&alphas, 1e-12, &q()).unwrap();
            assert!((b.value() - full).abs() < 1e-7 * full);
        }
    }

    #[test]
    fn rejects_bad_eps() {
        assert!(b_trunc(&[1.0, 1.0, 1.0], 0.34, &q()).is_err());
        assert!(b_trunc(&[1.0, 1.0], 0.0, &q()).is_err());
        assert!(b_trunc_with(&[1.0, 1.0, 1.0], 0.1, IntegralMethod::Exact1D, &q(), &MonteCarloSettings::default()).is_err());
    }

    #[test]
    fn monte_carlo_route_and_infeasible_guard() {
        let mc = MonteCarloSettings::default().with_draws(200_000);
        let b = b_trunc_with(&[1.0, 1.0, 1.0, 1.0], 0.05, IntegralMethod::MonteCarlo, &q(), &mc).unwrap();
        // uniform Dirichlet: I = (1 − kε)^(k−1)
        let want = 0.8f64.powi(3);
        assert!((b.log_i().exp() - want).abs() < b.error_estimate * want + 1e-12);
        let err = b_trunc_with(&[0.05, 0.05, 0.05, 0.05], 0.24, IntegralMethod::MonteCarlo, &q(), &mc).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }

    #[test]
    fn k2_exact_and_quadrature_routes_agree() {
        let mc = MonteCarloSettings::default();
        for &(a, b, eps) in &[(0.5, 0.5, 0.01), (3.0, 0.2, 0.1), (1.4, 1.4, 0.3), (12.0, 30.0, 0.05)] {
            let e = b_trunc_with(&[a, b], eps, IntegralMethod::Exact1D, &q(), &mc).unwrap();
            let r = b_trunc_with(&[a, b], eps, IntegralMethod::RecursiveQuad, &q(), &mc).unwrap();
            assert!((e.value() - r.value()).abs() <= 1e-9 * e.value(), "{a},{b},{eps}");
        }
    }

    #[test]
    fn expectation_of_one_is_retained_mass() {
        let alphas = [0.8, 1.3, 2.2];
        let e = truncated_dirichlet_expectation(&alphas, 0.05, |_| Ok(1.0), &q()).unwrap();
        let i = i_trunc(&alphas, 0.05, &q()).unwrap();
        assert!((e - i).abs() < 1e-10);
        // full simplex: E[θ_2] = α_2 / Σα
        let m = truncated_dirichlet_expectation(&alphas, 0.0, |t| Ok(t[1]), &q()).unwrap();
        assert!((m - 1.3 / 4.3).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn i_trunc_is_a_proper_fraction_and_monotone(a in prop::collection::vec(0.2f64..4.0, 2..4), f1 in 0.01f64..0.9, f2 in 0.01f64..0.9) {
            let k = a.len() as f64;
            let (lo, hi) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
            let i_lo = i_trunc(&a, lo / k, &q()).unwrap();
            let i_hi = i_trunc(&a, hi / k, &q()).unwrap();
            prop_assert!(i_lo > 0.0 && i_lo < 1.0);
            prop_assert!(i_hi <= i_lo + 1e-10);
        }
    }
}
