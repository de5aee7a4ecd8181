//! The functions iterated by the two bounds.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use super::counter::{log10_nat, CounterFunction};
use super::iterate::{AffineTail, IteratedMap};
use super::logdomain::{log10_sum, Log10Interval};

fn div_ceil(a: &BigUint, b: &BigUint) -> BigUint {
    (a + b - 1u32) / b
}

/// h̃(n) = max_{i ≤ n} h(i) with h(n) = 2(M·n + g(M·n)).
///
/// For monotone g, h̃ = h. For a non-monotone table only the arguments
/// with M·i inside the table can beat h(n), so their running maxima are
/// precomputed.
#[derive(Debug, Clone)]
pub(crate) struct MetastabilityMap {
    m: BigUint,
    g: CounterFunction,
    /// running[i − 1] = max_{1 ≤ j ≤ i} h(j) over the irregular region.
    running: Vec<BigUint>,
}

impl MetastabilityMap {
    pub fn new(m: BigUint, g: CounterFunction) -> Self {
        let region = BigUint::from(g.irregular_prefix()) / &m;
        let region = region.to_usize().expect("table sized");
        let mut running = Vec::with_capacity(region);
        let mut best = BigUint::zero();
        for i in 1..=region {
            let hi = raw_h(&m, &g, &BigUint::from(i));
            if hi > best {
                best = hi;
            }
            running.push(best.clone());
        }
        Self { m, g, running }
    }

    pub fn h(&self, n: &BigUint) -> BigUint {
        raw_h(&self.m, &self.g, n)
    }
}

fn raw_h(m: &BigUint, g: &CounterFunction, n: &BigUint) -> BigUint {
    let mn = m * n;
    let gv = g.eval(&mn);
    (mn + gv) * 2u32
}

impl IteratedMap for MetastabilityMap {
    fn apply(&self, n: &BigUint) -> BigUint {
        match n.to_usize() {
            Some(i) if i >= 1 && i <= self.running.len() => self.running[i - 1].clone(),
            _ => {
                let h = self.h(n);
                match self.running.last() {
                    Some(prefix) if prefix > &h => prefix.clone(),
                    _ => h,
                }
            }
        }
    }

    fn affine_tail(&self) -> Option<AffineTail> {
        let (a, c, from_g) = self.g.eventually_affine()?;
        let slope = &self.m * (a + 1u32) * 2u32;
        let mut from = div_ceil(&BigUint::from(from_g), &self.m);
        if let Some(prefix) = self.running.last() {
            from = from
                .max(BigUint::from(self.running.len() + 1))
                .max(prefix / (&self.m * 2u32) + 1u32);
        }
        Some(AffineTail {
            a: slope,
            b: c * 2u32,
            from,
        })
    }

    fn apply_log10(&self, t: Log10Interval) -> Log10Interval {
        let lm = log10_nat(&self.m);
        t.map_increasing(|x| {
            let s = x + lm;
            std::f64::consts::LOG10_2 + log10_sum(&[s, self.g.log10_at(s)])
        })
    }
}

/// The Hilbert-space bound map of Avigad, Gerhardy and Towsner:
/// h(n) = n + 2¹³ρ⁴·g̃((n + 1)·g̃(2nρ)·ρ²) in general, with g̃(2nρ)
/// replaced by g̃(1) for isometries, where g̃(m) = max_{i ≤ m}(i + g(i)).
#[derive(Debug, Clone)]
pub(crate) struct AgtMap {
    rho: BigUint,
    coef: BigUint,
    g: CounterFunction,
    isometry: bool,
    /// running[i − 1] = max_{1 ≤ j ≤ i}(j + g(j)) over the irregular region.
    running: Vec<BigUint>,
}

impl AgtMap {
    pub fn new(rho: BigUint, g: CounterFunction, isometry: bool) -> Self {
        let coef = num_traits::pow(rho.clone(), 4) << 13u32;
        let mut running = Vec::new();
        let mut best = BigUint::zero();
        for i in 1..=g.irregular_prefix() {
            let v = BigUint::from(i) + g.eval(&BigUint::from(i));
            if v > best {
                best = v;
            }
            running.push(best.clone());
        }
        Self {
            rho,
            coef,
            g,
            isometry,
            running,
        }
    }

    /// g̃(m) = max_{1 ≤ i ≤ m}(i + g(i)).
    pub fn g_tilde(&self, m: &BigUint) -> BigUint {
        let m = m.max(&BigUint::one()).clone();
        match m.to_usize() {
            Some(i) if i <= self.running.len() => self.running[i - 1].clone(),
            _ => {
                let v = &m + self.g.eval(&m);
                match self.running.last() {
                    Some(prefix) if prefix > &v => prefix.clone(),
                    _ => v,
                }
            }
        }
    }

    fn log10_g_tilde(&self, y: f64) -> f64 {
        log10_sum(&[y, self.g.log10_at(y)])
    }
}

impl IteratedMap for AgtMap {
    fn apply(&self, n: &BigUint) -> BigUint {
        let rho2 = &self.rho * &self.rho;
        let inner = if self.isometry {
            self.g_tilde(&BigUint::one())
        } else {
            self.g_tilde(&(n * &self.rho * 2u32))
        };
        let arg = (n + 1u32) * inner * rho2;
        n + &self.coef * self.g_tilde(&arg)
    }

    fn affine_tail(&self) -> Option<AffineTail> {
        if !self.isometry {
            return None;
        }
        let (a, c, from_g) = self.g.eventually_affine()?;
        let scale = self.g_tilde(&BigUint::one()) * &self.rho * &self.rho * (&a + 1u32);
        let mut from = BigUint::from(from_g.max(self.running.len() + 1));
        if let Some(prefix) = self.running.last() {
            from = from.max(prefix.clone());
        }
        Some(AffineTail {
            a: &self.coef * &scale + 1u32,
            b: &self.coef * (scale + c),
            from,
        })
    }

    fn apply_log10(&self, t: Log10Interval) -> Log10Interval {
        let lrho = log10_nat(&self.rho);
        let lcoef = log10_nat(&self.coef);
        let lg1 = log10_nat(&self.g_tilde(&BigUint::one()));
        let two_rho = log10_nat(&(&self.rho * 2u32));
        t.map_increasing(|x| {
            let inner = if self.isometry {
                lg1
            } else {
                self.log10_g_tilde(x + two_rho)
            };
            let arg = log10_sum(&[x, 0.0]) + inner + 2.0 * lrho;
            log10_sum(&[x, lcoef + self.log10_g_tilde(arg)])
        })
    }
}
