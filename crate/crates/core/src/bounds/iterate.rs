//! Exact iteration of maps on arbitrary-precision naturals under a decimal
//! digit budget, with a log-domain continuation once values outgrow it.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use super::logdomain::{log10_sum, round_down, round_up, Log10Interval};
use crate::error::{Error, Result};
use crate::rational::decimal_digits;

/// Default cap on the decimal digits of any exact iterate.
pub const DEFAULT_DIGIT_BUDGET: u64 = 1_000_000;

/// Iterates stop being exact in the log estimator once they reach this many
/// digits; additive constants are then far below the interval width.
const LOG_SWITCH_DIGITS: u64 = 40;

/// How many leading iterates a breakdown keeps for inspection.
pub(crate) const LOGGED_ITERATES: usize = 8;

pub(crate) fn exceeds_budget(n: &BigUint, budget: u64) -> bool {
    let max_bits = (budget as f64 * std::f64::consts::LOG2_10).ceil() as u64 + 1;
    let bits = n.bits();
    if bits > max_bits + 4 {
        return true;
    }
    if bits + 4 < max_bits {
        return false;
    }
    decimal_digits(n) > budget
}

/// f^k(start), exactly, failing with [`Error::BudgetExceeded`] as soon as an
/// iterate has more than `digit_budget` decimal digits.
pub fn iterate_fn<F>(f: F, k: &BigUint, start: BigUint, digit_budget: u64) -> Result<BigUint>
where
    F: Fn(&BigUint) -> BigUint,
{
    let steps = k
        .to_u64()
        .ok_or_else(|| Error::Domain(format!("iteration count {k} exceeds a machine count")))?;
    let mut cur = start;
    for i in 0..steps {
        let next = f(&cur);
        if exceeds_budget(&next, digit_budget) {
            return Err(Error::BudgetExceeded {
                budget: digit_budget,
                steps: i,
                total: k.to_string(),
                last_digits: decimal_digits(&cur),
            });
        }
        cur = next;
    }
    Ok(cur)
}

/// map(n) = a·n + b for every n ≥ from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct AffineTail {
    pub a: BigUint,
    pub b: BigUint,
    pub from: BigUint,
}

impl AffineTail {
    /// a^r·n + b·(a^r − 1)/(a − 1); requires a ≥ 2.
    fn jump(&self, n: &BigUint, r: u64) -> BigUint {
        let ar = num_traits::pow(self.a.clone(), r as usize);
        let geometric = (&ar - 1u32) / (&self.a - 1u32);
        ar * n + &self.b * geometric
    }

    /// Encloses log₁₀ of r affine steps from any n with log₁₀ n ∈ t, using
    /// a^r·n ≤ result ≤ a^r·(n + b/(a − 1)).
    fn jump_log10(&self, t: Log10Interval, r: &BigUint) -> Log10Interval {
        let la = Log10Interval::of_nat(&self.a);
        let rf = r.to_f64().unwrap_or(f64::INFINITY);
        let growth_lo = round_down(rf * la.lo);
        let growth_hi = round_up(rf * la.hi);
        let c = Log10Interval::of_nat(&self.b).hi - Log10Interval::of_nat(&(&self.a - 1u32)).lo;
        let shifted_hi = round_up(log10_sum(&[t.hi, round_up(c)]));
        Log10Interval::new(
            round_down(growth_lo + t.lo),
            round_up(growth_hi + shifted_hi),
        )
    }
}

/// A nondecreasing map on ℕ whose iterates from 1 are nondecreasing.
pub(crate) trait IteratedMap {
    fn apply(&self, n: &BigUint) -> BigUint;

    fn affine_tail(&self) -> Option<AffineTail>;

    /// Image of log₁₀-arguments past every irregular (table) region.
    fn apply_log10(&self, t: Log10Interval) -> Log10Interval;
}

/// Result of iterating a bound map K times from 1.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Iterated {
    Exact(BigUint),
    Exceeded(Log10Interval),
}

fn usable_tail<M: IteratedMap + ?Sized>(map: &M, cur: &BigUint) -> Option<AffineTail> {
    map.affine_tail()
        .filter(|t| t.a >= BigUint::from(2u32) && cur >= &t.from)
}

/// Exact map^K(1) within the digit budget, else a log-domain enclosure.
/// Leading iterates are appended to `logged`.
pub(crate) fn iterate_map<M: IteratedMap + ?Sized>(
    map: &M,
    k: &BigUint,
    budget: u64,
    logged: &mut Vec<BigUint>,
) -> Iterated {
    let mut cur = BigUint::one();
    let mut done = BigUint::zero();
    while &done < k {
        if let Some(tail) = usable_tail(map, &cur) {
            let remaining = k - &done;
            let est = tail.jump_log10(Log10Interval::of_nat(&cur), &remaining);
            if est.lo >= budget as f64 {
                return Iterated::Exceeded(log10_estimate(map, k));
            }
            // Log the few iterates a caller may want to see before jumping.
            while logged.len() < LOGGED_ITERATES && &done < k {
                cur = map.apply(&cur);
                done += 1u32;
                logged.push(cur.clone());
            }
            let left = (k - &done).to_u64().expect("bounded above");
            let value = tail.jump(&cur, left);
            if exceeds_budget(&value, budget) {
                return Iterated::Exceeded(log10_estimate(map, k));
            }
            return Iterated::Exact(value);
        }
        cur = map.apply(&cur);
        done += 1u32;
        if logged.len() < LOGGED_ITERATES {
            logged.push(cur.clone());
        }
        if exceeds_budget(&cur, budget) {
            return Iterated::Exceeded(log10_estimate(map, k));
        }
    }
    Iterated::Exact(cur)
}

/// Encloses log₁₀ map^K(1): exact iteration while iterates are small, then
/// outward-rounded log-domain steps, with affine tails jumped in closed form.
pub(crate) fn log10_estimate<M: IteratedMap + ?Sized>(map: &M, k: &BigUint) -> Log10Interval {
    let mut cur = BigUint::one();
    let mut done = BigUint::zero();
    while &done < k && decimal_digits(&cur) < LOG_SWITCH_DIGITS {
        cur = map.apply(&cur);
        done += 1u32;
    }
    let mut t = Log10Interval::of_nat(&cur);
    let mut remaining = k - &done;
    while !remaining.is_zero() {
        if let Some(tail) = map.affine_tail().filter(|t| t.a >= BigUint::from(2u32)) {
            if t.lo >= Log10Interval::of_nat(&tail.from).hi {
                return tail.jump_log10(t, &remaining);
            }
        }
        t = map.apply_log10(t);
        remaining -= 1u32;
        if !t.hi.is_finite() || t.hi > 1e300 {
            // The iterates are nondecreasing, so the current lower end stays valid.
            return Log10Interval::new(t.lo.min(f64::MAX), f64::INFINITY);
        }
    }
    t
}
