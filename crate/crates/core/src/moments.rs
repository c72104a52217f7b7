//! Binomial central moments `μ_m(N, θ) = E[(X − Nθ)^m]`, `X ~ Bin(N, θ)`.
//!
//! Moments are held in the basis `μ_m = Σ_i f_{m,i}(θ) (Nθ)^i` with polynomial
//! `f_{m,i}`, and generated from the differential recurrence
//! `μ_{m+1} = θ(1−θ)[N m μ_{m−1} + dμ_m/dθ]`, which in that basis reads
//! `f_{m+1,i} = θ(1−θ) f'_{m,i} + i(1−θ) f_{m,i} + m(1−θ) f_{m−1,i−1}`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{domain, Result};
use crate::model::EpsilonSchedule;
use crate::numeric::CompensatedSum;
use crate::risk::binomial_pmf;
use crate::Real;

/// Points in the sup-over-θ grids, log-spaced from `ε_N` to 1.
pub const BOUND_GRID_POINTS: usize = 2048;
/// A bound is "not growing" when the last value is within this factor of the
/// largest value over the first half of the sweep.
pub const BOUND_TREND_FACTOR: f64 = 1.05;

/// Polynomial in `θ`, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly<C> {
    coeffs: Vec<C>,
}

impl<C: Clone + Num> Poly<C> {
    pub fn new(mut coeffs: Vec<C>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Self, i: usize| p.coeffs.get(i).cloned().unwrap_or_else(C::zero);
        Self::new((0..n).map(|i| get(self, i) + get(other, i)).collect())
    }

    fn scale(&self, c: &C) -> Self {
        Self::new(self.coeffs.iter().map(|v| v.clone() * c.clone()).collect())
    }

    fn derivative(&self) -> Self {
        let mut k = C::zero();
        let mut out = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                out.push(c.clone() * k.clone());
            }
            k = k + C::one();
        }
        Self::new(out)
    }

    fn times_one_minus_theta(&self) -> Self {
        let mut out = vec![C::zero(); self.coeffs.len() + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] = out[i].clone() + c.clone();
            out[i + 1] = out[i + 1].clone() - c.clone();
        }
        Self::new(out)
    }

    fn times_theta(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let mut out = vec![C::zero()];
        out.extend(self.coeffs.iter().cloned());
        Self::new(out)
    }

    /// Horner evaluation.
    pub fn eval(&self, theta: &C) -> C {
        self.coeffs.iter().rev().fold(C::zero(), |acc, c| acc * theta.clone() + c.clone())
    }
}

impl<C: Clone + Num + ToPrimitive> Poly<C> {
    pub fn eval_real<T: Real>(&self, theta: T) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * theta + T::lit(c.to_f64().expect("finite coefficient")))
    }
}

/// `μ_m` as `Σ_i f_{m,i}(θ) (Nθ)^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPoly<C> {
    pub order: usize,
    terms: BTreeMap<usize, Poly<C>>,
}

impl<C: Clone + Num> MomentPoly<C> {
    /// The coefficient polynomial of `(Nθ)^i`, zero when absent.
    pub fn coefficient(&self, i: usize) -> Poly<C> {
        self.terms.get(&i).cloned().unwrap_or_else(|| Poly::new(Vec::new()))
    }

    /// Powers `i` of `Nθ` with a nonzero coefficient, ascending.
    pub fn powers(&self) -> Vec<usize> {
        self.terms.keys().copied().collect()
    }

    /// Exact evaluation at `(N, θ)` in the coefficient type.
    pub fn eval(&self, n: &C, theta: &C) -> C {
        let nt = n.clone() * theta.clone();
        self.terms.iter().fold(C::zero(), |acc, (&i, f)| {
            let mut pow = C::one();
            for _ in 0..i {
                pow = pow * nt.clone();
            }
            acc + f.eval(theta) * pow
        })
    }
}

impl<C: Clone + Num + ToPrimitive> MomentPoly<C> {
    pub fn eval_real<T: Real>(&self, n: T, theta: T) -> T {
        let nt = n * theta;
        let mut acc = CompensatedSum::new();
        for (&i, f) in &self.terms {
            acc.add(f.eval_real(theta) * nt.powi(i as i32));
        }
        acc.value()
    }
}

impl MomentPoly<BigRational> {
    /// Exact evaluation at the binary values of `n` and `theta`, rounded once.
    ///
    /// The coefficients alternate in sign and grow quickly with the order, so a
    /// floating Horner evaluation cancels badly near `θ = 1/2`; this does not.
    pub fn eval_f64(&self, n: f64, theta: f64) -> f64 {
        match (BigRational::from_f64(n), BigRational::from_f64(theta)) {
            (Some(n), Some(t)) => self.eval(&n, &t).to_f64().unwrap_or(f64::NAN),
            _ => f64::NAN,
        }
    }

    /// Every coefficient is an integer.
    pub fn has_integer_coefficients(&self) -> bool {
        self.terms.values().all(|p| p.coeffs().iter().all(|c| c.is_integer()))
    }
}

impl<C: Clone + Num + fmt::Display> fmt::Display for MomentPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mu_{} =", self.order)?;
        if self.terms.is_empty() {
            return write!(f, " 0");
        }
        for (n, (&i, poly)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " +")?;
            }
            write!(f, " (")?;
            for (j, c) in poly.coeffs().iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let text = c.to_string();
                let (neg, mag) = match text.strip_prefix('-') {
                    Some(m) => (true, m.to_string()),
                    None => (false, text),
                };
                let first = poly.coeffs()[..j].iter().all(|c| c.is_zero());
                match (first, neg) {
                    (true, true) => write!(f, "-")?,
                    (true, false) => {}
                    (false, true) => write!(f, " - ")?,
                    (false, false) => write!(f, " + ")?,
                }
                match j {
                    0 => write!(f, "{mag}")?,
                    _ => {
                        if mag != "1" {
                            write!(f, "{mag}")?;
                        }
                        write!(f, "θ")?;
                        if j > 1 {
                            write!(f, "^{j}")?;
                        }
                    }
                }
            }
            write!(f, ")")?;
            match i {
                0 => {}
                1 => write!(f, "(Nθ)")?,
                _ => write!(f, "(Nθ)^{i}")?,
            }
        }
        Ok(())
    }
}

/// Exact moment polynomials `μ_0..μ_{m_max}` in any exact-enough coefficient ring.
pub fn moment_recurrence_in<C: Clone + Num + FromPrimitive>(m_max: usize) -> Result<Vec<MomentPoly<C>>> {
    if m_max < 2 {
        return domain(format!("moment_recurrence needs m_max >= 2, got {m_max}"));
    }
    let mut out: Vec<MomentPoly<C>> = Vec::with_capacity(m_max + 1);
    out.push(MomentPoly {
        order: 0,
        terms: BTreeMap::from([(0, Poly::new(vec![C::one()]))]),
    });
    out.push(MomentPoly {
        order: 1,
        terms: BTreeMap::new(),
    });
    for m in 1..m_max {
        let cur = &out[m];
        let prev = &out[m - 1];
        let mf = C::from_usize(m).expect("small integer");
        let mut next: BTreeMap<usize, Poly<C>> = BTreeMap::new();
        let top = cur.terms.keys().chain(prev.terms.keys()).max().copied().unwrap_or(0) + 1;
        for i in 0..=top {
            let f = cur.coefficient(i);
            let iv = C::from_usize(i).expect("small integer");
            let mut g = f.derivative().times_theta().times_one_minus_theta();
            g = g.add(&f.scale(&iv).times_one_minus_theta());
            if i > 0 {
                g = g.add(&prev.coefficient(i - 1).scale(&mf).times_one_minus_theta());
            }
            if !g.is_zero() {
                next.insert(i, g);
            }
        }
        out.push(MomentPoly { order: m + 1, terms: next });
    }
    Ok(out)
}

/// Exact-rational moment polynomials `μ_0..μ_{m_max}`.
pub fn moment_recurrence(m_max: usize) -> Result<Vec<MomentPoly<BigRational>>> {
    moment_recurrence_in(m_max)
}

fn low_moments() -> &'static [MomentPoly<BigRational>] {
    static TABLE: OnceLock<Vec<MomentPoly<BigRational>>> = OnceLock::new();
    TABLE.get_or_init(|| moment_recurrence(8).expect("m_max = 8 is valid"))
}

/// `μ_m(N, θ)` from the explicit closed forms for `m ≤ 5`; for `m = 6, 7, 8`
/// the printed leading terms plus the remaining coefficient polynomials as
/// generated by the recurrence; beyond 8 the recurrence alone.
pub fn moment_closed_form<T: Real>(m: usize, n: T, theta: T) -> Result<T> {
    let one = T::one();
    let q = one - theta;
    let nt = n * theta;
    let c = T::lit;
    let exact_theta = BigRational::from_f64(theta.as_f64());
    let phi = |order: usize, i: usize| match &exact_theta {
        Some(t) => T::lit(low_moments()[order].coefficient(i).eval(t).to_f64().unwrap_or(f64::NAN)),
        None => T::nan(),
    };
    Ok(match m {
        0 => one,
        1 => T::zero(),
        2 => nt * q,
        3 => nt * q * (one - c(2.0) * theta),
        4 => c(3.0) * nt * nt * q * q + nt * q * (one - c(6.0) * theta + c(6.0) * theta * theta),
        5 => {
            let d = one - c(2.0) * theta;
            c(10.0) * nt * nt * q * q * d + nt * q * d * (one - c(12.0) * theta + c(12.0) * theta * theta)
        }
        6 => {
            c(15.0) * nt.powi(3) * q.powi(3)
                + c(5.0) * nt * nt * q * q * (c(5.0) - c(26.0) * theta + c(26.0) * theta * theta)
                + nt * phi(6, 1)
        }
        7 => c(105.0) * nt.powi(3) * q.powi(3) * (one - c(2.0) * theta) + nt * nt * phi(7, 2) + nt * phi(7, 1),
        8 => c(105.0) * nt.powi(4) * q.powi(4) + nt.powi(3) * phi(8, 3) + nt * nt * phi(8, 2) + nt * phi(8, 1),
        _ => T::lit(moment_recurrence(m)?[m].eval_f64(n.as_f64(), theta.as_f64())),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub eps: f64,
    pub sup: f64,
    pub argmax_theta: f64,
}

/// Suprema over `θ ∈ [ε_N, 1]` of one scaled quantity across an `N` sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSeries {
    pub label: String,
    pub rows: Vec<BoundRow>,
    pub running_max: Vec<f64>,
    /// `last ≤ 1.05 × max(first half)`.
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheckReport {
    pub series: Vec<BoundSeries>,
    pub bounded: bool,
}

fn bound_grid(eps: f64) -> Vec<f64> {
    let last = BOUND_GRID_POINTS - 1;
    (0..BOUND_GRID_POINTS)
        .map(|j| if j == last { 1.0 } else { eps * (1.0 / eps).powf(j as f64 / last as f64) })
        .collect()
}

fn series<F: Fn(u64, f64) -> f64>(label: String, schedule: &EpsilonSchedule<f64>, n_list: &[u64], f: F) -> Result<BoundSeries> {
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        // Δ_ε constraints do not apply to a single coordinate; only ε_N < 1 is needed
        let eps = schedule.eps_raw(n);
        if !(eps > 0.0 && eps < 1.0) {
            return domain(format!("schedule gives eps = {eps} at N = {n}"));
        }
        let (argmax_theta, sup) = bound_grid(eps)
            .into_iter()
            .map(|t| (t, f(n, t)))
            .fold((eps, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        rows.push(BoundRow { n, eps, sup, argmax_theta });
    }
    let mut running_max = Vec::with_capacity(rows.len());
    let mut m = f64::NEG_INFINITY;
    for r in &rows {
        m = m.max(r.sup);
        running_max.push(m);
    }
    let half = rows.len().div_ceil(2);
    let first = rows[..half].iter().map(|r| r.sup).fold(f64::NEG_INFINITY, f64::max);
    let bounded = rows.last().is_some_and(|r| r.sup <= BOUND_TREND_FACTOR * first);
    Ok(BoundSeries {
        label,
        rows,
        running_max,
        bounded,
    })
}

fn check_sweep(schedule: &EpsilonSchedule<f64>, n_list: &[u64]) -> Result<()> {
    if n_list.is_empty() {
        return domain("N list must not be empty");
    }
    if !(schedule.r < 1.0) {
        return domain("the bound checks need N eps_N -> infinity, i.e. r < 1");
    }
    Ok(())
}

/// Sweeps `sup_θ |μ_{2l−1}|/(Nθ)^(l−1)` and `sup_θ |μ_{2l}|/(Nθ)^l` over
/// `θ ∈ [ε_N, 1]` and checks that neither grows with `N`.
pub fn moment_ratio_bound_check(l: usize, schedule: &EpsilonSchedule<f64>, n_list: &[u64]) -> Result<BoundCheckReport> {
    if l < 1 {
        return domain("l must be at least 1");
    }
    check_sweep(schedule, n_list)?;
    let polys = moment_recurrence(2 * l)?;
    let odd = &polys[2 * l - 1];
    let even = &polys[2 * l];
    let odd_series = series(format!("|mu_{}|/(N theta)^{}", 2 * l - 1, l - 1), schedule, n_list, |n, t| {
        let nt = n as f64 * t;
        odd.eval_f64(n as f64, t).abs() / nt.powi(l as i32 - 1)
    })?;
    let even_series = series(format!("|mu_{}|/(N theta)^{}", 2 * l, l), schedule, n_list, |n, t| {
        let nt = n as f64 * t;
        even.eval_f64(n as f64, t).abs() / nt.powi(l as i32)
    })?;
    let bounded = odd_series.bounded && even_series.bounded;
    Ok(BoundCheckReport {
        series: vec![odd_series, even_series],
        bounded,
    })
}

/// `E[−w^(2l+1)/(1+w)]` with `w = (X − Nθ)/(Nθ + a)`, `X ~ Bin(N, θ)`.
pub fn lemma3_expectation(l: usize, a: f64, n: u64, theta: f64) -> f64 {
    let nt = n as f64 * theta;
    let mut acc = CompensatedSum::new();
    for (x, p) in binomial_pmf(n, theta).into_iter().enumerate() {
        if p > 0.0 {
            let w = (x as f64 - nt) / (nt + a);
            acc.add(-p * w.powi(2 * l as i32 + 1) / (1.0 + w));
        }
    }
    acc.value()
}

/// Sweeps `sup_θ (Nθ)^l E[−w^(2l+1)/(1+w)]` over `θ ∈ [ε_N, 1]` and checks it does not grow.
pub fn lemma3_bound_check(l: usize, a: f64, schedule: &EpsilonSchedule<f64>, n_list: &[u64]) -> Result<BoundCheckReport> {
    if !(a > 0.0) {
        return domain(format!("a must be positive, got {a}"));
    }
    check_sweep(schedule, n_list)?;
    let s = series(format!("(N theta)^{l} E[-w^{}/(1+w)]", 2 * l + 1), schedule, n_list, |n, t| {
        (n as f64 * t).powi(l as i32) * lemma3_expectation(l, a, n, t)
    })?;
    let bounded = s.bounded;
    Ok(BoundCheckReport { series: vec![s], bounded })
}

/// `Σ_x C(N,x) θ^x (1−θ)^(N−x) (x − Nθ)^m` in exact rationals.
pub fn exact_central_moment(m: usize, n: u64, theta: &BigRational) -> BigRational {
    let one = BigRational::from_integer(BigInt::from(1));
    let q = one - theta.clone();
    let nt = BigRational::from_integer(BigInt::from(n)) * theta.clone();
    let mut binom = BigInt::from(1);
    let mut total = BigRational::zero();
    for x in 0..=n {
        if x > 0 {
            binom = binom * BigInt::from(n - x + 1) / BigInt::from(x);
        }
        let p = BigRational::from_integer(binom.clone())
            * num_traits::pow(theta.clone(), x as usize)
            * num_traits::pow(q.clone(), (n - x) as usize);
        total += p * num_traits::pow(BigRational::from_integer(BigInt::from(x)) - nt.clone(), m);
    }
    total
}
