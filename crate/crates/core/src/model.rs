//! Multinomial model, Dirichlet priors and their closed-form predictive densities.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numeric::{stable_sum, QuadratureSettings};
use crate::simplex::log_i_trunc;
use crate::Real;

/// `1 + 1/√6`, the concentration of the asymptotically minimax Dirichlet prior.
pub fn alpha_hat<T: Real>() -> T {
    T::one() + T::one() / T::lit(6.0).sqrt()
}

/// Category count `k` and observed sample size `N`.
///
/// `N = 0` is accepted (prior-predictive case).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub k: usize,
    #[serde(rename = "N")]
    pub n: u64,
}

impl ModelSpec {
    pub fn new(k: usize, n: u64) -> Result<Self> {
        if k < 2 {
            return domain(format!("model needs k >= 2 categories, got {k}"));
        }
        Ok(Self { k, n })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawPrior<T> {
    a: Vec<T>,
}

/// Dirichlet parameters `a = (a_1..a_k)` with cached total `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "RawPrior<T>",
    try_from = "RawPrior<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct PriorSpec<T> {
    a: Vec<T>,
    total: T,
}

impl<T: Real> From<PriorSpec<T>> for RawPrior<T> {
    fn from(p: PriorSpec<T>) -> Self {
        RawPrior { a: p.a }
    }
}

impl<T: Real> TryFrom<RawPrior<T>> for PriorSpec<T> {
    type Error = crate::Error;
    fn try_from(raw: RawPrior<T>) -> Result<Self> {
        PriorSpec::new(raw.a)
    }
}

impl<T: Real> PriorSpec<T> {
    pub fn new(a: Vec<T>) -> Result<Self> {
        if a.len() < 2 {
            return domain("Dirichlet prior needs at least two parameters");
        }
        if let Some(bad) = a.iter().find(|&&v| !(v > T::zero()) || !v.is_finite()) {
            return domain(format!("Dirichlet parameters must be positive and finite, got {bad}"));
        }
        let total = stable_sum(a.iter().copied());
        Ok(Self { a, total })
    }

    pub fn symmetric(k: usize, alpha: T) -> Result<Self> {
        Self::new(vec![alpha; k])
    }

    pub fn a(&self) -> &[T] {
        &self.a
    }

    /// `A = Σ a_i`.
    pub fn total(&self) -> T {
        self.total
    }

    pub fn k(&self) -> usize {
        self.a.len()
    }

    /// The common value when all parameters are equal.
    pub fn symmetric_alpha(&self) -> Option<T> {
        let first = self.a[0];
        self.a.iter().all(|&v| v == first).then_some(first)
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::new(perm.iter().map(|&i| self.a[i]).collect()).expect("permutation of a valid prior")
    }

    pub(crate) fn check_model(&self, model: &ModelSpec) -> Result<()> {
        if self.k() != model.k {
            return domain(format!("prior has {} parameters but the model has k = {}", self.k(), model.k));
        }
        Ok(())
    }
}

/// Symmetric Dirichlet prior with common concentration `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricPrior<T> {
    pub alpha: T,
    pub k: usize,
}

impl<T: Real> SymmetricPrior<T> {
    pub fn new(alpha: T, k: usize) -> Result<Self> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return domain(format!("symmetric prior needs alpha > 0, got {alpha}"));
        }
        if k < 2 {
            return domain(format!("symmetric prior needs k >= 2, got {k}"));
        }
        Ok(Self { alpha, k })
    }

    pub fn jeffreys(k: usize) -> Result<Self> {
        Self::new(T::lit(0.5), k)
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(T::one(), k)
    }

    pub fn minimax(k: usize) -> Result<Self> {
        Self::new(alpha_hat(), k)
    }

    pub fn to_prior(&self) -> PriorSpec<T> {
        PriorSpec::symmetric(self.k, self.alpha).expect("validated symmetric prior")
    }
}

/// The truncated simplex `{θ : θ_i ≥ eps for all i}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSimplex<T> {
    pub k: usize,
    pub eps: T,
}

impl<T: Real> TruncatedSimplex<T> {
    pub fn new(k: usize, eps: T) -> Result<Self> {
        if k < 2 {
            return domain(format!("truncated simplex needs k >= 2, got {k}"));
        }
        if !(eps > T::zero() && eps < T::one() / T::count(k)) {
            return domain(format!("truncation floor must satisfy 0 < eps < 1/k = {}, got {eps}", 1.0 / k as f64));
        }
        Ok(Self { k, eps })
    }

    /// Membership of a point given by its first `k − 1` coordinates or all `k`.
    pub fn contains(&self, theta: &[T]) -> bool {
        let last = if theta.len() == self.k {
            theta[self.k - 1]
        } else if theta.len() + 1 == self.k {
            T::one() - stable_sum(theta.iter().copied())
        } else {
            return false;
        };
        theta.iter().take(self.k - 1).all(|&t| t >= self.eps) && last >= self.eps
    }
}

/// Which asymptotic statement a truncation schedule is meant to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScheduleMode {
    /// `N ε_N → ∞`: r < 1.
    Theorem1,
    /// `N^(3/4) ε_N → ∞`: r < 3/4.
    Corollary1,
    /// `1/α̂ < r < 3/4`.
    Theorem3,
}

/// Truncation floors `ε_N = c · N^(−r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule<T> {
    pub c: T,
    pub r: T,
    pub mode: ScheduleMode,
}

impl<T: Real> EpsilonSchedule<T> {
    pub fn new(c: T, r: T, mode: ScheduleMode) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return domain(format!("schedule scale c must be positive, got {c}"));
        }
        if !(r > T::zero()) {
            return domain(format!("schedule exponent r must be positive so that eps -> 0, got {r}"));
        }
        let ok = match mode {
            ScheduleMode::Theorem1 => r < T::one(),
            ScheduleMode::Corollary1 => r < T::lit(0.75),
            ScheduleMode::Theorem3 => r > T::one() / alpha_hat::<T>() && r < T::lit(0.75),
        };
        if !ok {
            return domain(format!("exponent r = {r} is outside the admissible band for {mode:?}"));
        }
        Ok(Self { c, r, mode })
    }

    /// `c = 1, r = 0.73`, inside the band (1/α̂, 3/4).
    pub fn theorem3_default() -> Self {
        Self::new(T::one(), T::lit(0.73), ScheduleMode::Theorem3).expect("default schedule is admissible")
    }

    pub fn eps_raw(&self, n: u64) -> T {
        self.c * T::lit(n as f64).powf(-self.r)
    }

    /// `ε_N`, checked to satisfy `0 < ε_N < 1/k`.
    pub fn eps(&self, n: u64, k: usize) -> Result<T> {
        if n == 0 {
            return domain("schedule needs N >= 1");
        }
        let e = self.eps_raw(n);
        if !(e > T::zero() && e < T::one() / T::count(k)) {
            return domain(format!("eps_N = {e} at N = {n} is not in (0, 1/{k})"));
        }
        Ok(e)
    }

    pub fn simplex(&self, n: u64, k: usize) -> Result<TruncatedSimplex<T>> {
        TruncatedSimplex::new(k, self.eps(n, k)?)
    }
}

/// Observed counts `x` with `Σ x_i = N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<u64>,
}

impl Observation {
    pub fn new(x: Vec<u64>, model: &ModelSpec) -> Result<Self> {
        if x.len() != model.k {
            return domain(format!("observation has {} counts, model has k = {}", x.len(), model.k));
        }
        let total: u64 = x.iter().sum();
        if total != model.n {
            return domain(format!("counts sum to {total}, expected N = {}", model.n));
        }
        Ok(Self { x })
    }
}

/// The category of the one-hot next outcome `y` (zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeLabel(pub usize);

impl OutcomeLabel {
    pub fn new(i: usize, model: &ModelSpec) -> Result<Self> {
        if i >= model.k {
            return domain(format!("outcome index {i} out of range for k = {}", model.k));
        }
        Ok(Self(i))
    }
}

fn check_xy(model: &ModelSpec, x: &Observation, y: OutcomeLabel) -> Result<()> {
    if x.x.len() != model.k || x.x.iter().sum::<u64>() != model.n {
        return domain("observation does not match the model");
    }
    if y.0 >= model.k {
        return domain(format!("outcome index {} out of range for k = {}", y.0, model.k));
    }
    Ok(())
}

/// `p(y | x) = (x_i + a_i) / (N + A)` for the Dirichlet prior `a`.
pub fn predictive_density<T: Real>(
    prior: &PriorSpec<T>,
    model: &ModelSpec,
    x: &Observation,
    y: OutcomeLabel,
) -> Result<T> {
    prior.check_model(model)?;
    check_xy(model, x, y)?;
    let i = y.0;
    Ok((T::lit(x.x[i] as f64) + prior.a[i]) / (T::lit(model.n as f64) + prior.total))
}

/// Predictive density for the symmetric prior renormalized to the truncated simplex:
/// `(x_i + α)/(N + kα) · I(x + e_i + α) / I(x + α)`.
pub fn truncated_predictive_density<T: Real>(
    alpha: &SymmetricPrior<T>,
    trunc: &TruncatedSimplex<T>,
    model: &ModelSpec,
    x: &Observation,
    y: OutcomeLabel,
    quad: &QuadratureSettings<T>,
) -> Result<T> {
    if alpha.k != model.k || trunc.k != model.k {
        return domain("prior, truncation and model disagree on k");
    }
    check_xy(model, x, y)?;
    let base: Vec<T> = x.x.iter().map(|&c| T::lit(c as f64) + alpha.alpha).collect();
    let mut bumped = base.clone();
    bumped[y.0] += T::one();
    let log_ratio = log_i_trunc(&bumped, trunc.eps, quad)?.0 - log_i_trunc(&base, trunc.eps, quad)?.0;
    let full = base[y.0] / (T::lit(model.n as f64) + T::count(model.k) * alpha.alpha);
    Ok(full * log_ratio.exp())
}

/// `s_i = (a_i − A θ_i) / (N θ_i + A θ_i)`.
pub fn si_term<T: Real>(prior: &PriorSpec<T>, model: &ModelSpec, theta_i: T, i: usize) -> Result<T> {
    prior.check_model(model)?;
    if i >= model.k {
        return domain(format!("category index {i} out of range for k = {}", model.k));
    }
    if !(theta_i > T::zero() && theta_i <= T::one()) {
        return domain(format!("s_i needs theta_i in (0, 1], got {theta_i}"));
    }
    Ok(s_term(prior.a[i], prior.total, T::lit(model.n as f64), theta_i))
}

#[inline]
pub(crate) fn s_term<T: Real>(a: T, total: T, n: T, theta: T) -> T {
    (a - total * theta) / ((n + total) * theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q() -> QuadratureSettings<f64> {
        QuadratureSettings::default()
    }

    #[test]
    fn predictive_examples() {
        let m = ModelSpec::new(2, 2).unwrap();
        let p = PriorSpec::symmetric(2, 1.0).unwrap();
        let x = Observation::new(vec![1, 1], &m).unwrap();
        assert_eq!(predictive_density(&p, &m, &x, OutcomeLabel(0)).unwrap(), 0.5);

        let m = ModelSpec::new(2, 1).unwrap();
        let j = SymmetricPrior::<f64>::jeffreys(2).unwrap().to_prior();
        let x = Observation::new(vec![1, 0], &m).unwrap();
        assert_eq!(predictive_density(&j, &m, &x, OutcomeLabel(0)).unwrap(), 0.75);

        let m = ModelSpec::new(3, 0).unwrap();
        let p = PriorSpec::new(vec![0.3, 1.2, 2.5]).unwrap();
        let x = Observation::new(vec![0, 0, 0], &m).unwrap();
        for i in 0..3 {
            let v: f64 = predictive_density(&p, &m, &x, OutcomeLabel(i)).unwrap();
            assert!((v - p.a()[i] / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn constants() {
        assert!((alpha_hat::<f64>() - 1.408_248_290_463_863).abs() < 1e-15);
        assert_eq!(SymmetricPrior::<f64>::jeffreys(3).unwrap().alpha, 0.5);
        assert_eq!(SymmetricPrior::<f64>::uniform(3).unwrap().alpha, 1.0);
    }

    #[test]
    fn validation() {
        assert!(ModelSpec::new(1, 5).is_err());
        assert!(PriorSpec::new(vec![1.0, -1.0]).is_err());
        assert!(PriorSpec::new(vec![1.0]).is_err());
        assert!(TruncatedSimplex::new(3, 0.34f64).is_err());
        assert!(TruncatedSimplex::new(3, 0.0f64).is_err());
        let m = ModelSpec::new(3, 4).unwrap();
        assert!(Observation::new(vec![1, 1, 1], &m).is_err());
        assert!(Observation::new(vec![4, 0], &m).is_err());
        assert!(OutcomeLabel::new(3, &m).is_err());
        assert!(EpsilonSchedule::new(1.0f64, 0.70, ScheduleMode::Theorem3).is_err());
        assert!(EpsilonSchedule::new(1.0f64, 0.76, ScheduleMode::Theorem3).is_err());
        assert!(EpsilonSchedule::new(1.0f64, 0.9, ScheduleMode::Corollary1).is_err());
        assert!(EpsilonSchedule::new(1.0f64, 0.9, ScheduleMode::Theorem1).is_ok());
        let s = EpsilonSchedule::<f64>::theorem3_default();
        assert!((s.eps(1024, 2).unwrap() - 1024f64.powf(-0.73)).abs() < 1e-15);
        assert!(s.eps(1, 2).is_err());
    }

    #[test]
    fn truncated_simplex_membership() {
        let t = TruncatedSimplex::new(3, 0.1f64).unwrap();
        assert!(t.contains(&[0.2, 0.3]));
        assert!(t.contains(&[0.2, 0.3, 0.5]));
        assert!(!t.contains(&[0.05, 0.3]));
        assert!(!t.contains(&[0.5, 0.45]));
    }

    #[test]
    fn json_field_names() {
        let m = ModelSpec::new(3, 7).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"k":3,"N":7}"#);
        let p = PriorSpec::new(vec![0.5, 1.5]).unwrap();
        let js = serde_json::to_string(&p).unwrap();
        assert_eq!(js, r#"{"a":[0.5,1.5]}"#);
        let back: PriorSpec<f64> = serde_json::from_str(&js).unwrap();
        assert_eq!(back.total(), 2.0);
        assert!(serde_json::from_str::<PriorSpec<f64>>(r#"{"a":[0.5,-1.0]}"#).is_err());
        let t = TruncatedSimplex::new(2, 0.25f64).unwrap();
        assert_eq!(serde_json::to_string(&t).unwrap(), r#"{"k":2,"eps":0.25}"#);
        let s = EpsilonSchedule::<f64>::theorem3_default();
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"c":1.0,"r":0.73,"mode":"THEOREM3"}"#);
        let sp = SymmetricPrior::new(1.0f64, 2).unwrap();
        assert_eq!(serde_json::to_string(&sp).unwrap(), r#"{"alpha":1.0,"k":2}"#);
    }

    #[test]
    fn si_examples() {
        let m = ModelSpec::new(2, 10).unwrap();
        let u = PriorSpec::symmetric(2, 1.0).unwrap();
        assert_eq!(si_term(&u, &m, 0.5, 0).unwrap(), 0.0);
        let j = PriorSpec::symmetric(2, 0.5).unwrap();
        let s: f64 = si_term(&j, &m, 0.1, 0).unwrap();
        assert!((s - 0.4 / 1.1).abs() < 1e-15);
        assert!(si_term(&j, &m, 0.0, 0).is_err());
        // numerator vanishes when a_i = A θ_i
        let p = PriorSpec::new(vec![0.6, 1.4]).unwrap();
        assert_eq!(si_term(&p, &m, 0.3, 0).unwrap(), 0.0);
    }

    #[test]
    fn truncated_predictive_examples() {
        // ε → 0 recovers the ordinary predictive
        let m = ModelSpec::new(2, 4).unwrap();
        let a = SymmetricPrior::new(1.0, 2).unwrap();
        let t = TruncatedSimplex::new(2, 1e-6).unwrap();
        let x = Observation::new(vec![3, 1], &m).unwrap();
        for i in 0..2 {
            let tr = truncated_predictive_density(&a, &t, &m, &x, OutcomeLabel(i), &q()).unwrap();
            let full = predictive_density(&a.to_prior(), &m, &x, OutcomeLabel(i)).unwrap();
            assert!((tr - full).abs() < 1e-8);
        }

        // k = 2, N = 1, x = (1, 0), α = 1, ε = 1/4: ratio of polynomial antiderivatives
        let m = ModelSpec::new(2, 1).unwrap();
        let t = TruncatedSimplex::new(2, 0.25).unwrap();
        let x = Observation::new(vec![1, 0], &m).unwrap();
        let b31 = |u: f64| u.powi(3) / 3.0; // ∫ θ² dθ
        let b21 = |u: f64| u.powi(2) / 2.0; // ∫ θ dθ
        let want = (b31(0.75) - b31(0.25)) / (b21(0.75) - b21(0.25));
        let got = truncated_predictive_density(&a, &t, &m, &x, OutcomeLabel(0), &q()).unwrap();
        assert!((got - want).abs() < 1e-13, "{got} vs {want}");

        // symmetric counts give symmetric predictions
        let m = ModelSpec::new(2, 6).unwrap();
        let x = Observation::new(vec![3, 3], &m).unwrap();
        let a = SymmetricPrior::new(0.5, 2).unwrap();
        let t = TruncatedSimplex::new(2, 0.1).unwrap();
        let p0 = truncated_predictive_density(&a, &t, &m, &x, OutcomeLabel(0), &q()).unwrap();
        let p1 = truncated_predictive_density(&a, &t, &m, &x, OutcomeLabel(1), &q()).unwrap();
        assert!((p0 - p1).abs() < 1e-14);
    }

    #[test]
    fn large_alpha_tends_to_uniform() {
        let m = ModelSpec::new(3, 5).unwrap();
        let p = SymmetricPrior::new(1e8, 3).unwrap().to_prior();
        let x = Observation::new(vec![5, 0, 0], &m).unwrap();
        for i in 0..3 {
            let v: f64 = predictive_density(&p, &m, &x, OutcomeLabel(i)).unwrap();
            assert!((v - 1.0 / 3.0).abs() < 1e-7);
        }
    }

    fn compositions(n: u64, k: usize) -> Vec<Vec<u64>> {
        if k == 1 {
            return vec![vec![n]];
        }
        (0..=n)
            .flat_map(|first| {
                compositions(n - first, k - 1).into_iter().map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
            })
            .collect()
    }

    proptest! {
        #[test]
        fn predictive_sums_to_one(a in prop::collection::vec(0.05f64..5.0, 2..6), n in 0u64..12, pick in any::<prop::sample::Index>()) {
            let k = a.len();
            let m = ModelSpec::new(k, n).unwrap();
            let p = PriorSpec::new(a).unwrap();
            let comps = compositions(n, k);
            let x = Observation::new(comps[pick.index(comps.len())].clone(), &m).unwrap();
            let s = stable_sum((0..k).map(|i| predictive_density(&p, &m, &x, OutcomeLabel(i)).unwrap()));
            prop_assert!((s - 1.0).abs() <= 1e-15);
        }

        #[test]
        fn truncated_predictive_sums_to_one(alpha in 0.2f64..3.0, n in 0u64..10, frac in 0.01f64..0.95, split in 0.0f64..1.0, k in 2usize..4) {
            let m = ModelSpec::new(k, n).unwrap();
            let a = SymmetricPrior::new(alpha, k).unwrap();
            let t = TruncatedSimplex::new(k, frac / k as f64).unwrap();
            let first = ((n as f64) * split).floor() as u64;
            let mut xs = vec![0u64; k];
            xs[0] = first;
            xs[k - 1] = n - first;
            let x = Observation::new(xs, &m).unwrap();
            let s = stable_sum((0..k).map(|i| truncated_predictive_density(&a, &t, &m, &x, OutcomeLabel(i), &q()).unwrap()));
            prop_assert!((s - 1.0).abs() <= 10.0 * q().rel_tol, "sum = {}", s);
        }

        #[test]
        fn theta_weighted_s_terms_vanish(a in prop::collection::vec(0.05f64..5.0, 2..6), w in prop::collection::vec(0.01f64..1.0, 6), n in 0u64..1000) {
            let k = a.len();
            let m = ModelSpec::new(k, n).unwrap();
            let p = PriorSpec::new(a).unwrap();
            let z: f64 = w[..k].iter().sum();
            let theta: Vec<f64> = w[..k].iter().map(|v| v / z).collect();
            let s = stable_sum((0..k).map(|i| theta[i] * si_term(&p, &m, theta[i], i).unwrap()));
            prop_assert!(s.abs() <= 1e-14, "{}", s);
            for i in 0..k {
                prop_assert!(si_term(&p, &m, theta[i], i).unwrap() > -1.0);
            }
        }

        #[test]
        fn relabeling_permutes_predictions(a in prop::collection::vec(0.05f64..5.0, 3), n in 0u64..9, rot in 0usize..3) {
            let m = ModelSpec::new(3, n).unwrap();
            let p = PriorSpec::new(a).unwrap();
            let x = Observation::new(vec![n / 2, n - n / 2, 0], &m).unwrap();
            let perm: Vec<usize> = (0..3).map(|i| (i + rot) % 3).collect();
            let pp = p.permuted(&perm);
            let xp = Observation::new(perm.iter().map(|&i| x.x[i]).collect(), &m).unwrap();
            for j in 0..3 {
                let orig = predictive_density(&p, &m, &x, OutcomeLabel(perm[j])).unwrap();
                let moved = predictive_density(&pp, &m, &xp, OutcomeLabel(j)).unwrap();
                prop_assert_eq!(orig, moved);
            }
        }
    }
}
