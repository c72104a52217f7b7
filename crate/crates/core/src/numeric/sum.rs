//! Exactly rounded summation of floating point sequences.
//!
//! The accumulator keeps a list of non-overlapping partial sums (Shewchuk's
//! algorithm), so the final value is the correctly rounded sum of the inputs
//! regardless of their order or of how the input is chunked.

use crate::Real;

/// Running exactly rounded sum.
#[derive(Debug, Clone, Default)]
pub struct StableSum<T> {
    partials: Vec<T>,
    non_finite: Option<T>,
}

impl<T: Real> StableSum<T> {
    pub fn new() -> Self {
        Self {
            partials: Vec::new(),
            non_finite: None,
        }
    }

    pub fn add(&mut self, value: T) {
        if !value.is_finite() {
            self.non_finite = Some(match self.non_finite {
                Some(prev) => prev + value,
                None => value,
            });
            return;
        }
        let mut x = value;
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != T::zero() {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    /// Merges another accumulator into this one.
    pub fn merge(&mut self, other: &StableSum<T>) {
        for &p in &other.partials {
            self.add(p);
        }
        if let Some(v) = other.non_finite {
            self.add(v);
        }
    }

    pub fn value(&self) -> T {
        if let Some(v) = self.non_finite {
            return v;
        }
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return T::zero();
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = T::zero();
        while n > 0 {
            let x = hi;
            let y = p[n - 1];
            n -= 1;
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != T::zero() {
                break;
            }
        }
        // Round-half-even correction when the remaining partials push past a tie.
        if n > 0 {
            let next = p[n - 1];
            if (lo < T::zero() && next < T::zero()) || (lo > T::zero() && next > T::zero()) {
                let y = lo + lo;
                let x = hi + y;
                let yr = x - hi;
                if y == yr {
                    hi = x;
                }
            }
        }
        hi
    }
}

impl<T: Real> Extend<T> for StableSum<T> {
    fn extend<I: IntoIterator<Item = T>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

impl<T: Real> FromIterator<T> for StableSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = StableSum::new();
        acc.extend(iter);
        acc
    }
}

/// Neumaier-compensated running sum: error about one ulp of the result plus
/// `O(n ε²) Σ|x|`, at a small constant cost per term. Order-dependent, so hot
/// loops that use it must feed terms in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, value: T) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.compensation
    }
}

/// Correctly rounded sum of `terms`; `0` for an empty sequence.
pub fn stable_sum<T: Real, I: IntoIterator<Item = T>>(terms: I) -> T {
    terms.into_iter().collect::<StableSum<T>>().value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{FromPrimitive, ToPrimitive, Zero};
    use proptest::prelude::*;

    fn exact(terms: &[f64]) -> f64 {
        let mut acc = BigRational::zero();
        for &t in terms {
            acc += BigRational::from_f64(t).unwrap();
        }
        acc.to_f64().unwrap()
    }

    #[test]
    fn cancellation() {
        assert_eq!(stable_sum([1e16, 1.0, -1e16]), 1.0);
        let mut c = CompensatedSum::new();
        for v in [1e16, 1.0, -1e16] {
            c.add(v);
        }
        assert_eq!(c.value(), 1.0);
    }

    #[test]
    fn compensated_sum_is_close_to_exact() {
        let terms: Vec<f64> = (0..5000).map(|i| ((i as f64) * 0.37).sin() * 10f64.powi(i % 9 - 4)).collect();
        let mut c = CompensatedSum::new();
        for &t in &terms {
            c.add(t);
        }
        let want = exact(&terms);
        assert!((c.value() - want).abs() <= 2.0 * f64::EPSILON * want.abs());
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(stable_sum(std::iter::empty::<f64>()), 0.0);
    }

    #[test]
    fn million_tenths() {
        let s = stable_sum(std::iter::repeat(0.1f64).take(1_000_000));
        // 0.1 is not representable; the rational oracle sums the stored value exactly.
        let stored = BigRational::from_f64(0.1).unwrap() * BigRational::from_integer(BigInt::from(1_000_000));
        let oracle = stored.to_f64().unwrap();
        assert_eq!(s, oracle);
        assert!((s - 1e5).abs() <= 1e-9);
    }

    #[test]
    fn chunked_merge_matches_single_pass() {
        let terms: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1013) as f64 * 1e-3 - 0.5 + (i as f64).sin() * 1e12).collect();
        let whole = stable_sum(terms.iter().copied());
        let mut merged = StableSum::new();
        for chunk in terms.chunks(37) {
            merged.merge(&chunk.iter().copied().collect());
        }
        assert_eq!(whole, merged.value());
    }

    #[test]
    fn non_finite_propagates() {
        assert!(stable_sum([1.0, f64::NAN]).is_nan());
        assert_eq!(stable_sum([1.0, f64::INFINITY]), f64::INFINITY);
    }

    #[test]
    fn works_in_single_precision() {
        assert_eq!(stable_sum([1e8f32, 1.0, -1e8]), 1.0);
    }

    proptest! {
        #[test]
        fn order_independent_and_exactly_rounded(
            raw in prop::collection::vec((-1.0f64..1.0, -30i32..30), 1..200),
            seed in any::<u64>(),
        ) {
            let terms: Vec<f64> = raw.iter().map(|&(m, e)| m * 2f64.powi(e)).collect();
            let mut sorted = terms.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut permuted = terms.clone();
            let n = permuted.len();
            let mut state = seed;
            for i in (1..n).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                permuted.swap(i, j);
            }
            let a = stable_sum(sorted.iter().copied());
            let b = stable_sum(permuted.iter().copied());
            prop_assert_eq!(a, b);
            prop_assert_eq!(a, exact(&terms));
        }
    }
}
