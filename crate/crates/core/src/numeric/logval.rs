//! Signed values stored as a natural logarithm of their magnitude.

use std::ops::{Div, Mul};

use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    fn times(self, other: Sign) -> Sign {
        match (self, other) {
            (Sign::Zero, _) | (_, Sign::Zero) => Sign::Zero,
            (a, b) if a == b => Sign::Positive,
            _ => Sign::Negative,
        }
    }
}

/// A real number held as `sign · exp(log_magnitude)`.
///
/// The sign is [`Sign::Zero`] exactly when the value is zero, in which case
/// `log_magnitude` is `-inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue<T> {
    pub log_magnitude: T,
    pub sign: Sign,
}

impl<T: Real> LogValue<T> {
    pub fn zero() -> Self {
        Self {
            log_magnitude: T::neg_infinity(),
            sign: Sign::Zero,
        }
    }

    pub fn one() -> Self {
        Self::from_log(T::zero())
    }

    /// Positive value with the given logarithm.
    pub fn from_log(log_magnitude: T) -> Self {
        if log_magnitude == T::neg_infinity() {
            Self::zero()
        } else {
            Self {
                log_magnitude,
                sign: Sign::Positive,
            }
        }
    }

    pub fn from_value(x: T) -> Self {
        if x == T::zero() {
            Self::zero()
        } else {
            Self {
                log_magnitude: x.abs().ln(),
                sign: if x > T::zero() { Sign::Positive } else { Sign::Negative },
            }
        }
    }

    pub fn value(self) -> T {
        match self.sign {
            Sign::Zero => T::zero(),
            Sign::Positive => self.log_magnitude.exp(),
            Sign::Negative => -self.log_magnitude.exp(),
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == Sign::Zero
    }
}

impl<T: Real> Mul for LogValue<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let sign = self.sign.times(rhs.sign);
        if sign == Sign::Zero {
            return Self::zero();
        }
        Self {
            log_magnitude: self.log_magnitude + rhs.log_magnitude,
            sign,
        }
    }
}

impl<T: Real> Div for LogValue<T> {
    type Output = Self;
    /// Division by zero yields an infinite magnitude.
    fn div(self, rhs: Self) -> Self {
        let sign = self.sign.times(if rhs.sign == Sign::Zero { Sign::Positive } else { rhs.sign });
        if sign == Sign::Zero {
            return Self::zero();
        }
        Self {
            log_magnitude: self.log_magnitude - rhs.log_magnitude,
            sign,
        }
    }
}

/// `ln Σ exp(x_i)`, stable for large magnitudes; `-inf` for an empty slice.
pub fn log_sum_exp<T: Real>(logs: &[T]) -> T {
    let max = logs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let s = super::stable_sum(logs.iter().map(|&l| (l - max).exp()));
    max + s.ln()
}
