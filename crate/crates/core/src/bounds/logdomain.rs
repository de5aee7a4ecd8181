//! Outward-rounded intervals on log₁₀ of huge naturals.
//!
//! Rust exposes no rounding-mode control, so every primitive result is
//! pushed outward by a relative margin that dominates the error of a few
//! correctly-or-faithfully rounded operations.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

const REL_MARGIN: f64 = 8e-15;
const ABS_MARGIN: f64 = 1e-14;

pub(crate) fn round_down(x: f64) -> f64 {
    if x.is_finite() {
        x - (x.abs() * REL_MARGIN + ABS_MARGIN)
    } else {
        x
    }
}

pub(crate) fn round_up(x: f64) -> f64 {
    if x.is_finite() {
        x + (x.abs() * REL_MARGIN + ABS_MARGIN)
    } else {
        x
    }
}

/// log₁₀(Σ 10^{tᵢ}); `-inf` terms stand for zero summands.
pub(crate) fn log10_sum(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = terms.iter().map(|t| 10f64.powf(t - m)).sum();
    m + s.log10()
}

/// `[lo, hi]` enclosing log₁₀ of a positive natural. `hi = +inf` means the
/// value escaped f64 range and only the lower end is informative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Log10Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Log10Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    /// Encloses log₁₀ n from the top 64 bits of n.
    pub fn of_nat(n: &BigUint) -> Self {
        if n.is_zero() {
            return Self::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        }
        let bits = n.bits();
        let shift = bits.saturating_sub(64);
        let top = (n >> shift).to_u64().expect("at most 64 bits");
        let base = shift as f64 * std::f64::consts::LOG10_2;
        let lo = (top as f64).log10() + base;
        // Without truncation the value is `top` itself.
        let hi = if shift == 0 {
            lo
        } else {
            ((top as f64) + 1.0).log10() + base
        };
        Self::new(round_down(lo), round_up(hi))
    }

    pub fn of_u64(n: u64) -> Self {
        Self::of_nat(&BigUint::from(n))
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_bounded(&self) -> bool {
        self.hi.is_finite()
    }

    pub fn midpoint(&self) -> f64 {
        if self.is_bounded() {
            0.5 * (self.lo + self.hi)
        } else {
            self.lo
        }
    }

    /// Image under an increasing map evaluated at both ends.
    pub(crate) fn map_increasing(self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(round_down(f(self.lo)), round_up(f(self.hi)))
    }

    /// log₁₀ of the product of the enclosed values.
    pub fn product(self, other: Self) -> Self {
        Self::new(round_down(self.lo + other.lo), round_up(self.hi + other.hi))
    }

    /// Decimal digit count implied by the interval, when it is pinned down.
    pub fn digit_range(&self) -> (f64, f64) {
        (self.lo.floor() + 1.0, self.hi.floor() + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encloses_exact_logs() {
        for n in [1u64, 2, 10, 218452, 14316557652, u64::MAX] {
            let iv = Log10Interval::of_u64(n);
            assert!(iv.contains((n as f64).log10()), "{n}: {iv:?}");
            assert!(iv.width() < 1e-12);
        }
        let big = num_traits::pow(BigUint::from(10u32), 1000);
        let iv = Log10Interval::of_nat(&big);
        assert!(iv.contains(1000.0));
        let iv = Log10Interval::of_nat(&(big - 1u32));
        assert!(iv.contains(1000.0 - 1e-14) || iv.contains(1000.0));
    }

    #[test]
    fn log_sum() {
        assert!((log10_sum(&[2.0, 2.0]) - 200f64.log10()).abs() < 1e-14);
        assert_eq!(log10_sum(&[f64::NEG_INFINITY, 3.0]), 3.0);
        assert_eq!(log10_sum(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log10_sum(&[400.0, 0.0]) - 400.0).abs() < 1e-12);
    }
}
