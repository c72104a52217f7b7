//! Log-gamma and log-binomial coefficients.

use crate::error::{domain, Result};
use crate::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation, reflection below 1/2).
pub fn log_gamma<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return domain(format!("log_gamma requires a finite x > 0, got {x}"));
    }
    Ok(ln_gamma_positive(x))
}

pub(crate) fn ln_gamma_positive<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x <= T::lit(30.0) && x == x.floor() {
        // (x−1)! is exact in f64 up to 22! and correctly rounded a little beyond.
        let n = x.to_usize().unwrap_or(1);
        let mut f = 1.0f64;
        for k in 2..n {
            f *= k as f64;
        }
        return T::lit(f.ln());
    }
    if x < half {
        // Γ(x)Γ(1-x) = π / sin(πx)
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma_positive(T::one() - x);
    }
    let z = x - T::one();
    let mut series = T::lit(LANCZOS_COEF[0]);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        series += T::lit(c) / (z + T::count(i));
    }
    let t = z + T::lit(LANCZOS_G) + half;
    let half_ln_two_pi = T::lit(0.918_938_533_204_672_7);
    half_ln_two_pi + (z + half) * t.ln() - t + series.ln()
}

/// `ln n!`.
pub fn log_factorial<T: Real>(n: u64) -> T {
    if n < 2 {
        return T::zero();
    }
    ln_gamma_positive(T::lit(n as f64 + 1.0))
}

/// `ln C(n, x)`.
pub fn log_binomial<T: Real>(n: u64, x: u64) -> Result<T> {
    if x > n {
        return domain(format!("log_binomial requires x <= n, got n={n}, x={x}"));
    }
    let m = x.min(n - x);
    if m == 0 {
        return Ok(T::zero());
    }
    if m <= 30 {
        // Multiplicative form: each partial product is itself a binomial coefficient.
        let mut c = 1.0f64;
        let base = (n - m) as f64;
        for i in 1..=m {
            c = c * (base + i as f64) / i as f64;
        }
        if c.is_finite() {
            return Ok(T::lit(c.ln()));
        }
    }
    Ok(log_factorial::<T>(n) - log_factorial::<T>(x) - log_factorial::<T>(n - x))
}
