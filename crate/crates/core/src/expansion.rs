//! Four-order asymptotic expansion of the risk of Dirichlet-prior predictive
//! densities in `1/N`, and its specializations.
//!
//! Every term of the expansion is `Σ_i c(a_i)/θ_i^p` or a polynomial in
//! `A = Σ a_i` and `k`, so the whole thing lives in one coefficient table and
//! is separable across coordinates.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::model::{alpha_hat, EpsilonSchedule, ModelSpec, PriorSpec};
use crate::numeric::stable_sum;
use crate::risk::{coordinate_risk, maximize_separable, SupSearchSettings, ThetaPoint};
use crate::Real;

/// Relative tolerance for the closed-form identities satisfied by `α̂`.
pub const IDENTITY_TOL: f64 = 1e-13;

/// `Σ_i poly(a_i) / (denom · θ_i^theta_power)` contributing at `N^(-order)`.
struct BoundaryTerm {
    order: usize,
    theta_power: i32,
    denom: f64,
    /// Ascending powers of `a`.
    poly: &'static [f64],
}

/// `(poly(A) + k_coeff · k)` contributing at `N^(-order)`.
struct BulkTerm {
    order: usize,
    /// Ascending powers of `A`.
    poly: &'static [f64],
    k_coeff: f64,
}

const BOUNDARY_TERMS: [BoundaryTerm; 6] = [
    BoundaryTerm { order: 2, theta_power: 1, denom: 12.0, poly: &[5.0, -12.0, 6.0] },
    BoundaryTerm { order: 3, theta_power: 2, denom: 12.0, poly: &[9.0, -24.0, 18.0, -4.0] },
    BoundaryTerm { order: 3, theta_power: 1, denom: 4.0, poly: &[-5.0, 12.0, -6.0] },
    BoundaryTerm { order: 4, theta_power: 3, denom: 120.0, poly: &[251.0, -720.0, 660.0, -240.0, 30.0] },
    BoundaryTerm { order: 4, theta_power: 2, denom: 2.0, poly: &[-9.0, 24.0, -18.0, 4.0] },
    BoundaryTerm { order: 4, theta_power: 1, denom: 12.0, poly: &[35.0, -84.0, 42.0] },
];

const BULK_TERMS: [BulkTerm; 3] = [
    BulkTerm { order: 2, poly: &[1.0 / 12.0, 1.0, -0.5], k_coeff: -0.5 },
    BulkTerm { order: 3, poly: &[0.0, -1.0, 0.0, 1.0 / 3.0], k_coeff: 0.5 },
    BulkTerm { order: 4, poly: &[-1.0 / 120.0, 1.0, 0.0, 0.0, -0.25], k_coeff: -0.5 },
];

/// Which terms of the table are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExpansionMode {
    /// All terms; remainder `O(N^-5 ε^-4)` on `Δ_ε` when `N ε_N → ∞`.
    Full,
    /// Only the terms that are not `o(N^-2)` once `N^(3/4) ε_N → ∞`: the whole
    /// second order plus the most singular boundary term of orders 3 and 4.
    Corollary1,
}

impl ExpansionMode {
    fn keeps_boundary(self, t: &BoundaryTerm) -> bool {
        match self {
            Self::Full => true,
            Self::Corollary1 => t.order == 2 || t.theta_power == t.order as i32 - 1,
        }
    }

    fn keeps_bulk(self, t: &BulkTerm) -> bool {
        match self {
            Self::Full => true,
            Self::Corollary1 => t.order == 2,
        }
    }
}

/// Terms of the expansion at orders `N^-1 .. N^-4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionTerms<T> {
    pub t1: T,
    pub t2: T,
    pub t3: T,
    pub t4: T,
    pub truncation_order: usize,
}

impl<T: Real> ExpansionTerms<T> {
    pub fn terms(&self) -> [T; 4] {
        [self.t1, self.t2, self.t3, self.t4]
    }

    /// `t1 + … + t_order`.
    pub fn partial_sum(&self, order: usize) -> T {
        self.terms().iter().take(order.min(4)).copied().sum()
    }

    /// The expansion truncated at `truncation_order`.
    pub fn value(&self) -> T {
        self.partial_sum(self.truncation_order)
    }
}

fn horner<T: Real>(poly: &[f64], x: T) -> T {
    poly.iter().rev().fold(T::zero(), |acc, &c| acc * x + T::lit(c))
}

/// The part of the order-`order` coefficient (before the `N^-order` factor)
/// that depends on coordinate `(a, θ)`.
fn boundary_coefficient<T: Real>(order: usize, mode: ExpansionMode, a: T, theta: T) -> T {
    BOUNDARY_TERMS
        .iter()
        .filter(|t| t.order == order && mode.keeps_boundary(t))
        .map(|t| horner(t.poly, a) / (T::lit(t.denom) * theta.powi(t.theta_power)))
        .sum()
}

fn bulk_coefficient<T: Real>(order: usize, mode: ExpansionMode, total: T, k: usize) -> T {
    BULK_TERMS
        .iter()
        .filter(|t| t.order == order && mode.keeps_bulk(t))
        .map(|t| horner(t.poly, total) + T::lit(t.k_coeff) * T::count(k))
        .sum()
}

/// Contribution of coordinate `(a, θ)` to the expansion truncated at `order`.
pub fn expansion_coordinate_part<T: Real>(a: T, theta: T, n: u64, order: usize, mode: ExpansionMode) -> T {
    let nf = T::lit(n as f64);
    (2..=order.min(4))
        .map(|j| boundary_coefficient(j, mode, a, theta) / nf.powi(j as i32))
        .sum()
}

/// The θ-free part of the expansion truncated at `order`, including `(k−1)/(2N)`.
pub fn expansion_constant_part<T: Real>(total: T, k: usize, n: u64, order: usize, mode: ExpansionMode) -> T {
    let nf = T::lit(n as f64);
    let t1 = T::count(k - 1) / (T::lit(2.0) * nf);
    if order == 0 {
        return T::zero();
    }
    t1 + (2..=order.min(4))
        .map(|j| bulk_coefficient(j, mode, total, k) / nf.powi(j as i32))
        .sum::<T>()
}

fn check(prior: &PriorSpec<impl Real>, model: &ModelSpec, k: usize) -> Result<()> {
    prior.check_model(model)?;
    if model.n == 0 {
        return domain("the expansion in 1/N needs N >= 1");
    }
    if k != model.k {
        return domain(format!("theta has {k} coordinates but the model has k = {}", model.k));
    }
    Ok(())
}

pub fn theorem1_expansion_with<T: Real>(
    prior: &PriorSpec<T>,
    model: &ModelSpec,
    theta: &ThetaPoint<T>,
    mode: ExpansionMode,
) -> Result<ExpansionTerms<T>> {
    check(prior, model, theta.k())?;
    let nf = T::lit(model.n as f64);
    let term = |j: usize| {
        let boundary = stable_sum(
            prior
                .a()
                .iter()
                .zip(theta.as_slice())
                .map(|(&a, &t)| boundary_coefficient(j, mode, a, t)),
        );
        (boundary + bulk_coefficient(j, mode, prior.total(), model.k)) / nf.powi(j as i32)
    };
    Ok(ExpansionTerms {
        t1: T::count(model.k - 1) / (T::lit(2.0) * nf),
        t2: term(2),
        t3: term(3),
        t4: term(4),
        truncation_order: 4,
    })
}

/// All four orders of the expansion for a general Dirichlet prior.
pub fn theorem1_expansion<T: Real>(prior: &PriorSpec<T>, model: &ModelSpec, theta: &ThetaPoint<T>) -> Result<ExpansionTerms<T>> {
    theorem1_expansion_with(prior, model, theta, ExpansionMode::Full)
}

/// The expansion with only the terms that survive at `o(N^-2)` accuracy when `N^(3/4) ε_N → ∞`.
pub fn corollary1_expansion<T: Real>(prior: &PriorSpec<T>, model: &ModelSpec, theta: &ThetaPoint<T>) -> Result<ExpansionTerms<T>> {
    theorem1_expansion_with(prior, model, theta, ExpansionMode::Corollary1)
}

/// Closed form of [`corollary1_expansion`] at `a = α̂·1`, written directly in `√6`.
pub fn corollary2_expansion<T: Real>(k: usize, n: u64, theta: &ThetaPoint<T>) -> Result<ExpansionTerms<T>> {
    if k < 2 || theta.k() != k {
        return domain(format!("need k >= 2 matching theta, got k = {k}, theta of length {}", theta.k()));
    }
    if n == 0 {
        return domain("the expansion in 1/N needs N >= 1");
    }
    let nf = T::lit(n as f64);
    let s6 = T::lit(6.0).sqrt();
    let kf = T::count(k);
    let inv_pow = |p: i32| stable_sum(theta.as_slice().iter().map(|&t| t.powi(-p)));
    Ok(ExpansionTerms {
        t1: (kf - T::one()) / (T::lit(2.0) * nf),
        t2: -(kf - T::one()) / T::lit(12.0) * (T::one() + (T::lit(7.0) + T::lit(2.0) * s6) * kf) / (nf * nf),
        t3: -inv_pow(2) / (T::lit(18.0) * s6) / nf.powi(3),
        t4: -(T::one() / (T::lit(6.0) * s6) - T::lit(11.0 / 720.0)) * inv_pow(3) / nf.powi(4),
        truncation_order: 4,
    })
}

/// `(1/24) / (N² ε)`: the excess of the Jeffreys risk over `(k−1)/(2N)` at
/// `θ = (ε, (1−ε)/(k−1), …)` is at least this, up to `o(N^-2 ε^-1)`.
pub fn jeffreys_lower_bound<T: Real>(k: usize, n: u64, eps: T) -> Result<T> {
    if k < 2 || n == 0 {
        return domain(format!("need k >= 2 and N >= 1, got k = {k}, N = {n}"));
    }
    if !(eps > T::zero() && eps < T::one() / T::count(k)) {
        return domain(format!("need 0 < eps < 1/k, got {eps}"));
    }
    let nf = T::lit(n as f64);
    Ok(T::one() / (T::lit(24.0) * nf * nf * eps))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / max(1, |rhs|)`.
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
    pub passed: bool,
}

impl IdentityReport {
    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| !(c.rel_err <= IDENTITY_TOL))
    }
}

/// The polynomial identities in `α̂` that turn the general expansion into the
/// closed form of [`corollary2_expansion`], evaluated from the coefficient table.
pub fn alpha_hat_identities() -> IdentityReport {
    let a: f64 = alpha_hat();
    let s6 = 6f64.sqrt();
    let mut checks = Vec::new();
    let mut push = |name: String, lhs: f64, rhs: f64| {
        let rel_err = (lhs - rhs).abs() / rhs.abs().max(1.0);
        checks.push(IdentityCheck { name, lhs, rhs, rel_err });
    };
    push("6a^2 - 12a + 5 = 0".into(), horner(BOUNDARY_TERMS[0].poly, a), 0.0);
    push("-4a^3 + 18a^2 - 24a + 9 = -sqrt6/9".into(), horner(BOUNDARY_TERMS[1].poly, a), -s6 / 9.0);
    push(
        "30a^4 - 240a^3 + 660a^2 - 720a + 251 = -(20 sqrt6 - 11)/6".into(),
        horner(BOUNDARY_TERMS[3].poly, a),
        -(20.0 * s6 - 11.0) / 6.0,
    );
    for k in 2..=8usize {
        let kf = k as f64;
        push(
            format!("-A^2/2 + A - k/2 + 1/12 = -(k-1)(1 + (7 + 2 sqrt6)k)/12, k = {k}"),
            bulk_coefficient(2, ExpansionMode::Full, kf * a, k),
            -(kf - 1.0) * (1.0 + (7.0 + 2.0 * s6) * kf) / 12.0,
        );
    }
    let passed = checks.iter().all(|c| c.rel_err <= IDENTITY_TOL);
    IdentityReport { checks, passed }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionErrorRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub eps: f64,
    pub sup_abs_residual: f64,
    pub scaled_residual: f64,
    pub argmax_theta: Vec<f64>,
}

/// Scale applied to the sup-residual so that the claimed remainder rate becomes `O(1)`
/// (`o(1)` in [`ExpansionMode::Corollary1`]).
pub fn residual_scale(n: u64, eps: f64, order: usize, mode: ExpansionMode) -> f64 {
    let nf = n as f64;
    match (mode, order) {
        (ExpansionMode::Corollary1, _) => nf * nf,
        (ExpansionMode::Full, 4) => nf.powi(5) * eps.powi(4),
        (ExpansionMode::Full, j) => nf.powi(j as i32 + 1),
    }
}

/// `sup_{Δ_ε} |R(θ) − expansion(θ)|` for each `N`, found with the same separable
/// search used for the risk itself, applied to the residual and its negation.
pub fn expansion_error_profile(
    prior: &PriorSpec<f64>,
    schedule: &EpsilonSchedule<f64>,
    n_list: &[u64],
    truncation_order: usize,
    mode: ExpansionMode,
    settings: &SupSearchSettings,
) -> Result<Vec<ExpansionErrorRow>> {
    if !(1..=4).contains(&truncation_order) {
        return domain(format!("truncation order must be in 1..=4, got {truncation_order}"));
    }
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return domain("N list must be non-empty and strictly increasing");
    }
    let k = prior.k();
    let a = prior.a();
    let total = prior.total();
    let symmetric = prior.symmetric_alpha().is_some();
    n_list
        .par_iter()
        .map(|&n| {
            let model = ModelSpec::new(k, n)?;
            prior.check_model(&model)?;
            let eps = schedule.eps(n, k)?;
            let constant = expansion_constant_part(total, k, n, truncation_order, mode) / k as f64;
            let residual = |i: usize, t: f64| {
                coordinate_risk(a[i], total, n, t) - expansion_coordinate_part(a[i], t, n, truncation_order, mode) - constant
            };
            let neg = |i: usize, t: f64| -residual(i, t);
            let up = maximize_separable(k, eps, symmetric, &residual, settings)?;
            let down = maximize_separable(k, eps, symmetric, &neg, settings)?;
            let best = if down.value > up.value { down } else { up };
            Ok(ExpansionErrorRow {
                n,
                eps,
                sup_abs_residual: best.value,
                scaled_residual: best.value * residual_scale(n, eps, truncation_order, mode),
                argmax_theta: best.argmax,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ScheduleMode, SymmetricPrior};
    use crate::risk::risk_coordinatewise;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    /// Direct transcription of the general coefficients, independent of the table.
    fn literal_terms(a: &[f64], theta: &[f64], n: f64) -> [f64; 4] {
        let k = a.len() as f64;
        let big: f64 = a.iter().sum();
        let mut s2 = 0.0;
        let mut s3 = 0.0;
        let mut s4 = 0.0;
        for (&a, &t) in a.iter().zip(theta) {
            s2 += (6.0 * a * a - 12.0 * a + 5.0) / (12.0 * t);
            s3 += (-4.0 * a.powi(3) + 18.0 * a * a - 24.0 * a + 9.0) / (12.0 * t * t)
                + (-6.0 * a * a + 12.0 * a - 5.0) / (4.0 * t);
            s4 += (30.0 * a.powi(4) - 240.0 * a.powi(3) + 660.0 * a * a - 720.0 * a + 251.0) / (120.0 * t.powi(3))
                + (4.0 * a.powi(3) - 18.0 * a * a + 24.0 * a - 9.0) / (2.0 * t * t)
                + (42.0 * a * a - 84.0 * a + 35.0) / (12.0 * t);
        }
        [
            (k - 1.0) / (2.0 * n),
            (s2 - big * big / 2.0 + big - k / 2.0 + 1.0 / 12.0) / (n * n),
            (s3 + big.powi(3) / 3.0 - big + k / 2.0) / n.powi(3),
            (s4 - big.powi(4) / 4.0 + big - k / 2.0 - 1.0 / 120.0) / n.powi(4),
        ]
    }

    #[test]
    fn table_matches_literal_transcription() {
        let prior = PriorSpec::new(vec![0.3, 1.7, 2.2]).unwrap();
        let model = ModelSpec::new(3, 37).unwrap();
        let theta = ThetaPoint::new(vec![0.15, 0.5, 0.35]).unwrap();
        let e = theorem1_expansion(&prior, &model, &theta).unwrap();
        let want = literal_terms(prior.a(), theta.as_slice(), 37.0);
        for (got, want) in e.terms().iter().zip(want) {
            assert!(rel(*got, want) < 1e-13, "{got} vs {want}");
        }
    }

    #[test]
    fn minimax_prior_reduces_to_closed_form() {
        for k in 2..=6 {
            let prior = SymmetricPrior::<f64>::minimax(k).unwrap().to_prior();
            let model = ModelSpec::new(k, 1000).unwrap();
            let mut th: Vec<f64> = (0..k).map(|i| 1.0 + i as f64).collect();
            let s: f64 = th.iter().sum();
            th.iter_mut().for_each(|t| *t /= s);
            let theta = ThetaPoint::new(th).unwrap();
            let c1 = corollary1_expansion(&prior, &model, &theta).unwrap();
            let c2 = corollary2_expansion(k, 1000, &theta).unwrap();
            for (a, b) in c1.terms().iter().zip(c2.terms()) {
                assert!(rel(*a, b) < 1e-13, "k={k}: {a} vs {b}");
            }
            // the first two orders coincide with the full expansion too
            let full = theorem1_expansion(&prior, &model, &theta).unwrap();
            assert!(rel(full.t1, c2.t1) < 1e-15 && rel(full.t2, c2.t2) < 1e-13);
        }
    }

    #[test]
    fn corollary2_examples() {
        let th = ThetaPoint::new(vec![0.5, 0.5]).unwrap();
        let e = corollary2_expansion(2, 1, &th).unwrap();
        assert!((e.t2 + (15.0 + 4.0 * 6f64.sqrt()) / 12.0).abs() < 1e-14);
        assert!((e.t2 + 2.06649658).abs() < 1e-8);
        assert!(e.t4 < 0.0);
        let th = ThetaPoint::<f64>::uniform(3).unwrap();
        let e = corollary2_expansion(3, 10, &th).unwrap();
        assert!(rel(e.t3, -27.0 / (18.0 * 6f64.sqrt()) / 1000.0) < 1e-14);
    }

    #[test]
    fn jeffreys_specialization() {
        let prior = SymmetricPrior::<f64>::jeffreys(2).unwrap().to_prior();
        let model = ModelSpec::new(2, 50).unwrap();
        let theta = ThetaPoint::new(vec![0.2, 0.8]).unwrap();
        let e = theorem1_expansion(&prior, &model, &theta).unwrap();
        let want = (1.0 / (24.0 * 0.2) + 1.0 / (24.0 * 0.8) - 5.0 / 12.0) / 2500.0;
        assert!(rel(e.t2, want) < 1e-14);
        let b = jeffreys_lower_bound(2, 1000, 0.01).unwrap();
        assert!(rel(b, 1.0 / (24.0 * 1e6 * 0.01)) < 1e-15);
        let b4 = jeffreys_lower_bound(2, 2000, 0.01).unwrap();
        assert!(rel(b / b4, 4.0) < 1e-15);
        assert!(jeffreys_lower_bound(2, 10, 0.5).is_err());
    }

    #[test]
    fn uniform_prior_boundary_sign() {
        assert_eq!(horner(BOUNDARY_TERMS[0].poly, 1.0) / 12.0, -1.0 / 12.0);
    }

    #[test]
    fn identities_hold() {
        let r = alpha_hat_identities();
        assert!(r.passed, "{:?}", r.failures().collect::<Vec<_>>());
        assert_eq!(r.checks.len(), 3 + 7);
        let other = 1.0 - 1.0 / 6f64.sqrt();
        assert!(horner::<f64>(BOUNDARY_TERMS[0].poly, other).abs() < 1e-14);
    }

    #[test]
    fn truncation_and_validation() {
        let prior = PriorSpec::new(vec![1.0, 2.0]).unwrap();
        let theta = ThetaPoint::new(vec![0.3, 0.7]).unwrap();
        let mut e = theorem1_expansion(&prior, &ModelSpec::new(2, 10).unwrap(), &theta).unwrap();
        assert_eq!(e.t1, 0.05);
        e.truncation_order = 1;
        assert_eq!(e.value(), 0.05);
        assert!(theorem1_expansion(&prior, &ModelSpec::new(2, 0).unwrap(), &theta).is_err());
        assert!(theorem1_expansion(&prior, &ModelSpec::new(3, 10).unwrap(), &theta).is_err());
    }

    #[test]
    fn separable_parts_reassemble() {
        let prior = PriorSpec::new(vec![0.4, 1.1, 3.0]).unwrap();
        let theta = ThetaPoint::new(vec![0.2, 0.3, 0.5]).unwrap();
        let model = ModelSpec::new(3, 64).unwrap();
        for mode in [ExpansionMode::Full, ExpansionMode::Corollary1] {
            let e = theorem1_expansion_with(&prior, &model, &theta, mode).unwrap();
            for order in 1..=4 {
                let parts: f64 = prior
                    .a()
                    .iter()
                    .zip(theta.as_slice())
                    .map(|(&a, &t)| expansion_coordinate_part(a, t, 64, order, mode))
                    .sum::<f64>()
                    + expansion_constant_part(prior.total(), 3, 64, order, mode);
                assert!(rel(parts, e.partial_sum(order)) < 1e-13);
            }
        }
    }

    #[test]
    fn second_order_limit_at_interior_point() {
        let prior = SymmetricPrior::<f64>::minimax(2).unwrap().to_prior();
        let theta = ThetaPoint::new(vec![0.3, 0.7]).unwrap();
        let model = ModelSpec::new(2, 4096).unwrap();
        let r = risk_coordinatewise(&prior, &model, &theta).unwrap().exact_risk;
        let e = theorem1_expansion(&prior, &model, &theta).unwrap();
        let n2 = 4096f64 * 4096.0;
        assert!(rel((r - e.t1) * n2, e.t2 * n2) < 0.05);
    }

    #[test]
    fn fourth_order_residual_slope() {
        // log-log regression of |exact − 4-term expansion| at the centre over a decade of N
        let prior = PriorSpec::new(vec![0.8, 1.5]).unwrap();
        let theta = ThetaPoint::<f64>::uniform(2).unwrap();
        let pts: Vec<(f64, f64)> = [40u64, 60, 90, 135, 200, 300, 400]
            .iter()
            .map(|&n| {
                let model = ModelSpec::new(2, n).unwrap();
                let r = risk_coordinatewise(&prior, &model, &theta).unwrap().exact_risk;
                let e = theorem1_expansion(&prior, &model, &theta).unwrap();
                ((n as f64).ln(), (r - e.value()).abs().ln())
            })
            .collect();
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (mx, my) = (sx / m, sy / m);
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((-5.5..=-4.5).contains(&slope), "slope {slope}");
    }

    #[test]
    fn error_profile_rows() {
        let prior = SymmetricPrior::<f64>::minimax(2).unwrap().to_prior();
        let schedule = EpsilonSchedule::new(1.0, 0.5, ScheduleMode::Corollary1).unwrap();
        let rows = expansion_error_profile(&prior, &schedule, &[64, 256], 1, ExpansionMode::Full, &SupSearchSettings::default()).unwrap();
        assert_eq!(rows.len(), 2);
        // order-1 residual is dominated by the constant second-order term
        let t2 = (15.0 + 4.0 * 6f64.sqrt()) / 12.0;
        assert!(rel(rows[1].scaled_residual, t2) < 0.1, "{rows:?}");
        assert!(expansion_error_profile(&prior, &schedule, &[256, 64], 1, ExpansionMode::Full, &SupSearchSettings::default()).is_err());
    }

    #[test]
    fn corollary1_residual_vanishes_faster_than_second_order() {
        // with ε_N = N^(-1/2) the dropped terms are O(N^(-9/4)); close to r = 3/4 the decay is invisible at this scale
        let prior = SymmetricPrior::<f64>::minimax(2).unwrap().to_prior();
        let schedule = EpsilonSchedule::new(1.0, 0.5, ScheduleMode::Corollary1).unwrap();
        let settings = SupSearchSettings::default();
        let rows = expansion_error_profile(&prior, &schedule, &[256, 1024, 4096], 4, ExpansionMode::Corollary1, &settings).unwrap();
        assert!(rows.windows(2).all(|w| w[1].scaled_residual < 0.5 * w[0].scaled_residual), "{rows:?}");
        let full = expansion_error_profile(&prior, &schedule, &[256, 1024, 4096], 4, ExpansionMode::Full, &settings).unwrap();
        let first = full[0].scaled_residual;
        assert!(full.iter().all(|r| r.scaled_residual <= 1.05 * first), "{full:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn permutation_equivariant(
            a in prop::collection::vec(0.1f64..5.0, 3),
            raw in prop::collection::vec(0.05f64..1.0, 3),
            n in 1u64..500,
        ) {
            let s: f64 = raw.iter().sum();
            let th: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let model = ModelSpec::new(3, n).unwrap();
            let e = theorem1_expansion(&PriorSpec::new(a.clone()).unwrap(), &model, &ThetaPoint::new(th.clone()).unwrap()).unwrap();
            let perm = [2usize, 0, 1];
            let pa: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
            let pt: Vec<f64> = perm.iter().map(|&i| th[i]).collect();
            let f = theorem1_expansion(&PriorSpec::new(pa).unwrap(), &model, &ThetaPoint::new(pt).unwrap()).unwrap();
            for (x, y) in e.terms().iter().zip(f.terms()) {
                prop_assert!((x - y).abs() <= 1e-13 * x.abs().max(y.abs()) + 1e-300);
            }
        }
    }
}
