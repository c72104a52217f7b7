//! Numerical checks of the inequalities and identities that the truncated-prior
//! analysis rests on. Every check reports `max_violation = lhs − rhs − slack`
//! (identities: relative disagreement minus the tolerance); a value ≤ 0 passes.

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::{b_trunc_with, IntegralMethod};
use crate::error::{domain, Result};
use crate::montecarlo::{stream_rng, MonteCarloSettings, DEFAULT_SEED};
use crate::numeric::{ln_beta, log_binomial, log_gamma, log_multivariate_beta, regularized_beta_segment, stable_sum, QuadratureSettings};
use crate::Real;

/// Multiplier applied to integrator error estimates before a check may fail.
pub const SLACK_FACTOR: f64 = 10.0;
/// Relative tolerance for the exact identities.
pub const IDENTITY_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaTolerances {
    pub slack_factor: f64,
    pub identity_rel_tol: f64,
    pub quad_rel_tol: f64,
    pub quad_abs_tol: f64,
}

impl LemmaTolerances {
    fn from_quad<T: Real>(quad: &QuadratureSettings<T>) -> Self {
        Self {
            slack_factor: SLACK_FACTOR,
            identity_rel_tol: IDENTITY_REL_TOL,
            quad_rel_tol: quad.rel_tol.as_f64(),
            quad_abs_tol: quad.abs_tol.as_f64(),
        }
    }
}

/// One inequality or identity evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub violation: f64,
}

impl LemmaCheck {
    fn inequality(lhs: f64, rhs: f64, slack: f64) -> Self {
        Self {
            lhs,
            rhs,
            slack,
            violation: lhs - rhs - slack,
        }
    }

    fn identity(lhs: f64, rhs: f64) -> Self {
        let scale = rhs.abs().max(lhs.abs()).max(f64::MIN_POSITIVE);
        Self {
            lhs,
            rhs,
            slack: IDENTITY_REL_TOL,
            violation: (lhs - rhs).abs() / scale - IDENTITY_REL_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub lemma: String,
    /// Individual checks evaluated; one draw can contribute several.
    pub trials: usize,
    pub max_violation: f64,
    /// Parameters and sides of the worst evaluation.
    pub witness: Value,
    pub seed: Option<u64>,
    pub tolerances: LemmaTolerances,
}

impl LemmaReport {
    fn new(lemma: u8, tolerances: LemmaTolerances) -> Self {
        Self {
            lemma: format!("lemma{lemma}"),
            trials: 0,
            max_violation: f64::NEG_INFINITY,
            witness: Value::Null,
            seed: None,
            tolerances,
        }
    }

    fn record(&mut self, check: LemmaCheck, params: Value) {
        self.trials += 1;
        // NaN violations are failures, never silently dropped
        let worse = check.violation.is_nan() || check.violation > self.max_violation;
        if worse && !self.max_violation.is_nan() {
            self.max_violation = check.violation;
            self.witness = json!({ "params": params, "check": check });
        }
    }

    fn absorb(&mut self, other: LemmaReport) {
        self.trials += other.trials;
        let worse = other.max_violation.is_nan() || other.max_violation > self.max_violation;
        if worse && !self.max_violation.is_nan() {
            self.max_violation = other.max_violation;
            self.witness = other.witness;
        }
    }

    pub fn passed(&self) -> bool {
        self.max_violation <= 0.0
    }
}

fn fv<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

/// Alternating partial sums of `ln(1+x)`: lower bound with the `2m`-term sum
/// plus `x^(2m+1)/((2m+1)(1+x))`, upper bound with the `(2m+1)`-term sum.
pub fn lemma1_check<T: Real>(m: u32, x_grid: &[T]) -> Result<LemmaReport> {
    let mut report = LemmaReport::new(1, LemmaTolerances::from_quad(&QuadratureSettings::<f64>::default()));
    for &x in x_grid {
        if !(x > -T::one()) || !x.is_finite() {
            return domain(format!("log bounds need x > -1, got {x}"));
        }
        let terms: Vec<T> = (1..=2 * m + 1)
            .map(|i| {
                let sign = if i % 2 == 1 { T::one() } else { -T::one() };
                sign * x.powi(i as i32) / T::lit(f64::from(i))
            })
            .collect();
        let n_low = (2 * m) as usize;
        let tail = x.powi(2 * m as i32 + 1) / (T::lit(f64::from(2 * m + 1)) * (T::one() + x));
        let lower = stable_sum(terms[..n_low].iter().copied()) + tail;
        let upper = stable_sum(terms.iter().copied());
        let mid = x.ln_1p();
        let magnitude: f64 = terms.iter().map(|t| t.as_f64().abs()).sum::<f64>() + tail.as_f64().abs() + mid.as_f64().abs();
        let slack = 8.0 * T::epsilon().as_f64() * magnitude;
        let params = json!({ "m": m, "x": x.as_f64() });
        report.record(LemmaCheck::inequality(lower.as_f64(), mid.as_f64(), slack), params.clone());
        report.record(LemmaCheck::inequality(mid.as_f64(), upper.as_f64(), slack), params);
    }
    Ok(report)
}

fn log_i_with_error<T: Real>(alphas: &[T], eps: T, quad: &QuadratureSettings<T>) -> Result<(f64, f64)> {
    let method = if alphas.len() == 2 { IntegralMethod::Exact1D } else { IntegralMethod::RecursiveQuad };
    let b = b_trunc_with(alphas, eps, method, quad, &MonteCarloSettings::default())?;
    let err = b.error_estimate.as_f64().max(64.0 * T::epsilon().as_f64());
    Ok((b.log_i().as_f64(), err))
}

fn check_lemma_alphas<T: Real>(alphas: &[T], eps: T) -> Result<()> {
    if alphas.len() < 2 || alphas.iter().any(|&a| !(a > T::zero())) {
        return domain("need k >= 2 positive exponents");
    }
    if !(eps > T::zero() && eps < T::one() / T::count(alphas.len())) {
        return domain(format!("need 0 < eps < 1/k, got {eps}"));
    }
    Ok(())
}

/// `I_Δε(α_1+1, α_2..) − I_Δε(α) ≤ Γ(Σα)/(Γ(α_1+1)Γ(Σ_{i≥2}α_i)) · ε^α_1 (1−ε)^(Σ_{i≥2}α_i)`.
pub fn lemma4_check<T: Real>(alphas: &[T], eps: T, quad: &QuadratureSettings<T>) -> Result<LemmaReport> {
    check_lemma_alphas(alphas, eps)?;
    let mut raised = alphas.to_vec();
    raised[0] += T::one();
    let (li_raised, e_raised) = log_i_with_error(&raised, eps, quad)?;
    let (li, e) = log_i_with_error(alphas, eps, quad)?;
    let (i_raised, i) = (li_raised.exp(), li.exp());
    let a1 = alphas[0];
    let rest: T = stable_sum(alphas[1..].iter().copied());
    let log_rhs = log_gamma(a1 + rest)? - log_gamma(a1 + T::one())? - log_gamma(rest)? + a1 * eps.ln() + rest * (-eps).ln_1p();
    let rhs = log_rhs.as_f64().exp();
    let slack = SLACK_FACTOR * (e_raised * i_raised + e * i);
    let mut report = LemmaReport::new(4, LemmaTolerances::from_quad(quad));
    report.record(
        LemmaCheck::inequality(i_raised - i, rhs, slack),
        json!({ "alphas": fv(alphas), "eps": eps.as_f64() }),
    );
    Ok(report)
}

/// `E[θ | θ ∈ [s,t]]` under Beta(α, β), i.e. `B_[s,t](α+1,β)/B_[s,t](α,β)`.
fn segment_mean<T: Real>(alpha: T, beta: T, s: T, t: T, quad: &QuadratureSettings<T>) -> Result<T> {
    let num = regularized_beta_segment(alpha + T::one(), beta, s, t, quad)?;
    let den = regularized_beta_segment(alpha, beta, s, t, quad)?;
    if !(den > T::zero()) {
        return domain(format!("Beta({alpha}, {beta}) has no resolvable mass on [{s}, {t}]"));
    }
    Ok(alpha / (alpha + beta) * num / den)
}

/// Conditional Beta means are monotone in the interval:
/// `B_[s,t](α+1,β)/B_[s,t](α,β) ≤ B_[u,v](α+1,β)/B_[u,v](α,β)` for `s ≤ u`, `t ≤ v`.
pub fn lemma5_check<T: Real>(alpha: T, beta: T, s: T, t: T, u: T, v: T, quad: &QuadratureSettings<T>) -> Result<LemmaReport> {
    if !(s <= u && t <= v && s < t && u < v && s >= T::zero() && v <= T::one()) {
        return domain("need 0 <= s <= u, t <= v <= 1, s < t, u < v");
    }
    let lhs = segment_mean(alpha, beta, s, t, quad)?.as_f64();
    let rhs = segment_mean(alpha, beta, u, v, quad)?.as_f64();
    let slack = SLACK_FACTOR * quad.rel_tol.as_f64() * (lhs.abs() + rhs.abs());
    let mut report = LemmaReport::new(5, LemmaTolerances::from_quad(quad));
    report.record(
        LemmaCheck::inequality(lhs, rhs, slack),
        json!({ "alpha": alpha.as_f64(), "beta": beta.as_f64(), "s": s.as_f64(), "t": t.as_f64(), "u": u.as_f64(), "v": v.as_f64() }),
    );
    Ok(report)
}

/// `B_Δε(α_1+1, α_2..)/B_Δε(α) ≤ B_[ε,1](α_1+1, S)/B_[ε,1](α_1, S)` with `S = Σ_{i≥2} α_i`.
pub fn lemma6_check<T: Real>(alphas: &[T], eps: T, quad: &QuadratureSettings<T>) -> Result<LemmaReport> {
    check_lemma_alphas(alphas, eps)?;
    let mut raised = alphas.to_vec();
    raised[0] += T::one();
    let (li_raised, e_raised) = log_i_with_error(&raised, eps, quad)?;
    let (li, e) = log_i_with_error(alphas, eps, quad)?;
    let a1 = alphas[0];
    let rest: T = stable_sum(alphas[1..].iter().copied());
    let mean = (a1 / (a1 + rest)).as_f64();
    let lhs = mean * (li_raised - li).exp();
    let rhs = segment_mean(a1, rest, eps, T::one(), quad)?.as_f64();
    let slack = SLACK_FACTOR * ((e_raised + e) * lhs + quad.rel_tol.as_f64() * rhs);
    let mut report = LemmaReport::new(6, LemmaTolerances::from_quad(quad));
    report.record(
        LemmaCheck::inequality(lhs, rhs, slack),
        json!({ "alphas": fv(alphas), "eps": eps.as_f64() }),
    );
    Ok(report)
}

/// Calls `f` with every composition of `n` into `parts` nonnegative parts, in lexicographic order.
pub fn for_each_composition(n: u64, parts: usize, f: &mut dyn FnMut(&[u64]) -> Result<()>) -> Result<()> {
    fn rec(remaining: u64, slot: usize, buf: &mut Vec<u64>, f: &mut dyn FnMut(&[u64]) -> Result<()>) -> Result<()> {
        if slot + 1 == buf.len() {
            buf[slot] = remaining;
            return f(buf);
        }
        for v in 0..=remaining {
            buf[slot] = v;
            rec(remaining - v, slot + 1, buf, f)?;
        }
        Ok(())
    }
    if parts == 0 {
        return Ok(());
    }
    let mut buf = vec![0; parts];
    rec(n, 0, &mut buf, f)
}

/// Marginal of the Dirichlet-multinomial in its first coordinate:
/// `Σ_{x_2..x_k} B(x+α)/B(α)·(N choose x) = B(x_1+α_1, N−x_1+S)/B(α_1, S)·C(N, x_1)`.
pub fn lemma7_check<T: Real>(alphas: &[T], n: u64, x1: u64) -> Result<LemmaReport> {
    if alphas.len() < 2 || alphas.iter().any(|&a| !(a > T::zero())) {
        return domain("need k >= 2 positive exponents");
    }
    if x1 > n {
        return domain(format!("x1 = {x1} exceeds N = {n}"));
    }
    let k = alphas.len();
    let log_b_alpha = log_multivariate_beta(alphas)?;
    let log_n_fact = crate::numeric::log_factorial::<T>(n);
    let mut terms = Vec::new();
    let mut shifted = alphas.to_vec();
    for_each_composition(n - x1, k - 1, &mut |rest| {
        shifted[0] = alphas[0] + T::count(x1 as usize);
        let mut log_multinom = log_n_fact - crate::numeric::log_factorial::<T>(x1);
        for (j, &xj) in rest.iter().enumerate() {
            shifted[j + 1] = alphas[j + 1] + T::lit(xj as f64);
            log_multinom -= crate::numeric::log_factorial::<T>(xj);
        }
        terms.push((log_multivariate_beta(&shifted)? - log_b_alpha + log_multinom).exp());
        Ok(())
    })?;
    let lhs = stable_sum(terms.into_iter());
    let a1 = alphas[0];
    let rest: T = stable_sum(alphas[1..].iter().copied());
    let xs = T::lit(x1 as f64);
    let rhs = (ln_beta(xs + a1, T::lit((n - x1) as f64) + rest)? - ln_beta(a1, rest)? + log_binomial::<T>(n, x1)?).exp();
    let mut report = LemmaReport::new(7, LemmaTolerances::from_quad(&QuadratureSettings::<f64>::default()));
    report.record(
        LemmaCheck::identity(lhs.as_f64(), rhs.as_f64()),
        json!({ "alphas": fv(alphas), "N": n, "x1": x1 }),
    );
    Ok(report)
}

/// The truncated Beta mean: the identity
/// `B_[ε,1](α+1,β)/B_[ε,1](α,β) = α/(α+β) + ε^α(1−ε)^β/((α+β)B_[ε,1](α,β))`
/// and the bound `≤ (1−ε)α/(α+β) + ε`. The bound holds for `α ≥ 1`; below that
/// the check can (correctly) report a violation while the identity still holds.
pub fn lemma8_check<T: Real>(alpha: T, beta: T, eps: T, quad: &QuadratureSettings<T>) -> Result<LemmaReport> {
    if !(alpha > T::zero() && beta > T::zero() && eps >= T::zero() && eps < T::one()) {
        return domain("need alpha, beta > 0 and 0 <= eps < 1");
    }
    let ratio = segment_mean(alpha, beta, eps, T::one(), quad)?;
    let mass = regularized_beta_segment(alpha, beta, eps, T::one(), quad)?;
    let boundary = if eps == T::zero() {
        T::zero()
    } else {
        (alpha * eps.ln() + beta * (-eps).ln_1p() - (alpha + beta).ln() - ln_beta(alpha, beta)? - mass.ln()).exp()
    };
    let mean = alpha / (alpha + beta);
    let identity_rhs = mean + boundary;
    let bound = (T::one() - eps) * mean + eps;
    let params = json!({ "alpha": alpha.as_f64(), "beta": beta.as_f64(), "eps": eps.as_f64() });
    let mut report = LemmaReport::new(8, LemmaTolerances::from_quad(quad));
    report.record(LemmaCheck::identity(ratio.as_f64(), identity_rhs.as_f64()), params.clone());
    let slack = SLACK_FACTOR * quad.rel_tol.as_f64() * ratio.as_f64();
    report.record(LemmaCheck::inequality(ratio.as_f64(), bound.as_f64(), slack), params);
    Ok(report)
}

/// Runs `trials` seeded random instances of one lemma (1, 4, 5, 6, 7 or 8).
pub fn run_lemma_suite(lemma: u8, trials: usize, seed: u64, quad: &QuadratureSettings<f64>) -> Result<LemmaReport> {
    let mut rng = stream_rng(seed, u64::from(lemma));
    let mut report = LemmaReport::new(lemma, LemmaTolerances::from_quad(quad));
    for _ in 0..trials {
        let one = match lemma {
            1 => {
                let m = rng.random_range(0..=5u32);
                let x = rng.random_range(-0.99..=10.0f64);
                lemma1_check(m, &[x])?
            }
            4 | 6 => {
                let k = rng.random_range(2..=3usize);
                let alphas: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..5.0)).collect();
                let eps = rng.random_range(1e-3..0.95) / k as f64;
                if lemma == 4 {
                    lemma4_check(&alphas, eps, quad)?
                } else {
                    lemma6_check(&alphas, eps, quad)?
                }
            }
            5 => {
                let alpha = rng.random_range(0.2..8.0);
                let beta = rng.random_range(0.2..8.0);
                let (p, q) = (rng.random_range(0.0..0.999), rng.random_range(0.0..0.999));
                let (s, u) = if p <= q { (p, q) } else { (q, p) };
                let t = rng.random_range(s + 1e-3..=1.0);
                let v = rng.random_range(f64::max(t, u + 1e-3)..=1.0);
                lemma5_check(alpha, beta, s, t, u, v, quad)?
            }
            7 => {
                let k = rng.random_range(2..=4usize);
                let n = rng.random_range(1..=20u64);
                let x1 = rng.random_range(0..=n);
                let alphas: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..5.0)).collect();
                lemma7_check(&alphas, n, x1)?
            }
            8 => {
                // the bound uses θ^(α−1) ≥ ε^(α−1) on [ε, 1], so it needs α ≥ 1
                let alpha = rng.random_range(1.0..20.0);
                let beta = rng.random_range(0.05..20.0);
                let eps = rng.random_range(0.0..0.99);
                lemma8_check(alpha, beta, eps, quad)?
            }
            other => return domain(format!("no randomized suite for lemma {other}; choose 1, 4, 5, 6, 7 or 8")),
        };
        report.absorb(one);
    }
    report.seed = Some(seed);
    Ok(report)
}

/// The suite with the fixed default seed.
pub fn default_lemma_suite(lemma: u8, trials: usize) -> Result<LemmaReport> {
    run_lemma_suite(lemma, trials, DEFAULT_SEED, &QuadratureSettings::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadratureSettings<f64> {
        QuadratureSettings::default()
    }

    #[test]
    fn log_bounds_examples() {
        let r = lemma1_check(0, &[0.0f64]).unwrap();
        assert!(r.passed());
        let c = &r.witness["check"];
        assert_eq!((c["lhs"].as_f64(), c["rhs"].as_f64()), (Some(0.0), Some(0.0)));
        // m = 0 at x = 1: 1/2 <= ln 2 <= 1
        let r = lemma1_check(0, &[1.0f64]).unwrap();
        assert!(r.passed() && r.max_violation < -0.19);
        let grid: Vec<f64> = (0..=1099).map(|i| -0.99 + i as f64 * 0.01).collect();
        for m in 0..6 {
            assert!(lemma1_check(m, &grid).unwrap().passed());
        }
        assert!(lemma1_check(1, &[-1.0f64]).is_err());
    }

    #[test]
    fn lemma4_two_categories_and_vanishing_eps() {
        let r = lemma4_check(&[1.5, 2.5], 0.1, &q()).unwrap();
        assert!(r.passed(), "{r:?}");
        let r = lemma4_check(&[1.5, 2.5], 1e-12, &q()).unwrap();
        let c = &r.witness["check"];
        assert!(c["lhs"].as_f64().unwrap().abs() < 1e-10 && c["rhs"].as_f64().unwrap() < 1e-10);
        assert!(lemma4_check(&[0.7, 1.2, 3.0], 0.2, &q()).unwrap().passed());
    }

    #[test]
    fn lemma5_examples() {
        let same = lemma5_check(2.0, 3.0, 0.2, 0.6, 0.2, 0.6, &q()).unwrap();
        assert!(same.passed());
        assert_eq!(same.witness["check"]["lhs"], same.witness["check"]["rhs"]);
        let r = lemma5_check(1.0, 1.0, 0.0, 0.5, 0.5, 1.0, &q()).unwrap();
        let c = &r.witness["check"];
        assert!((c["lhs"].as_f64().unwrap() - 0.25).abs() < 1e-14);
        assert!((c["rhs"].as_f64().unwrap() - 0.75).abs() < 1e-14);
        assert!(lemma5_check(1.0, 1.0, 0.5, 0.4, 0.5, 1.0, &q()).is_err());
    }

    #[test]
    fn lemma6_examples() {
        let r = lemma6_check(&[2.0, 3.0], 0.1, &q()).unwrap();
        assert!(r.max_violation < -1e-3, "strict for k = 2: {r:?}");
        let r = lemma6_check(&[2.0, 3.0, 1.0], 1e-10, &q()).unwrap();
        let c = &r.witness["check"];
        assert!((c["lhs"].as_f64().unwrap() - 2.0 / 6.0).abs() < 1e-8);
        assert!((c["rhs"].as_f64().unwrap() - 2.0 / 6.0).abs() < 1e-8);
    }

    #[test]
    fn lemma7_exact_rational_case() {
        let r = lemma7_check(&[1.0, 1.0, 1.0], 6, 2).unwrap();
        assert!(r.passed());
        // both sides equal 5 compositions × 2/((N+1)(N+2)) = 5/28
        assert!((r.witness["check"]["rhs"].as_f64().unwrap() - 5.0 / 28.0).abs() < 1e-14);
        assert!(lemma7_check(&[0.3, 2.0], 9, 4).unwrap().passed());
        assert!(lemma7_check(&[0.3, 2.0, 0.9, 1.7], 12, 5).unwrap().passed());
    }

    #[test]
    fn lemma8_examples() {
        let r = lemma8_check(2.0, 5.0, 0.0, &q()).unwrap();
        assert!(r.passed());
        let r = lemma8_check(1.0, 1.0, 0.5, &q()).unwrap();
        assert!(r.passed());
        assert_eq!(r.trials, 2);
    }

    #[test]
    fn lemma8_bound_needs_alpha_at_least_one() {
        let r = lemma8_check(0.07, 0.69, 0.29, &q()).unwrap();
        assert!(r.max_violation > 0.2, "{r:?}");
        assert_eq!(r.witness["check"]["rhs"].as_f64().map(|b| b < 0.36), Some(true));
        // the identity part is still exact
        let ratio = r.witness["check"]["lhs"].as_f64().unwrap();
        assert!(ratio > 0.6);
    }

    #[test]
    fn compositions_are_enumerated_in_order() {
        let mut seen = Vec::new();
        for_each_composition(2, 3, &mut |c| {
            seen.push(c.to_vec());
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![vec![0, 0, 2], vec![0, 1, 1], vec![0, 2, 0], vec![1, 0, 1], vec![1, 1, 0], vec![2, 0, 0]]);
    }

    #[test]
    fn report_serializes_with_expected_keys() {
        let r = run_lemma_suite(8, 5, 24397, &q()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in ["lemma", "trials", "max_violation", "witness", "seed", "tolerances"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["seed"], 24397);
        assert!(run_lemma_suite(2, 1, 1, &q()).is_err());
    }

    #[test]
    fn suites_are_deterministic() {
        let a = run_lemma_suite(5, 20, 7, &q()).unwrap();
        let b = run_lemma_suite(5, 20, 7, &q()).unwrap();
        assert_eq!(a, b);
    }
}
