//! Moduli of uniform convexity.
//!
//! A modulus η maps ε ∈ (0, 2] to δ ∈ (0, 1] such that ‖x‖, ‖y‖ ≤ 1 and
//! ‖x − y‖ ≥ ε force ‖½(x + y)‖ ≤ 1 − δ. Every built-in modulus factors as
//! η(ε) = ε·η̃(ε) with η̃ nondecreasing, which is what the refined bound
//! needs. Arguments above 2 are clamped to 2.
//!
//! Bound computations use the exact rational evaluators; the `*_f64`
//! variants exist for the floating-point geometric checks.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rational::{display, parse_rational, pow, to_f64};
use crate::spaces::{lp_norm, LpSpace};

/// Absolute tolerance of the floating-point geometric checks.
pub const GEOMETRIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModulusKind {
    /// η(ε) = ε²/8.
    Hilbert,
    /// η(ε) = ε^p/(p·2^p), the L_p modulus for p ≥ 2. For non-integer p
    /// the rational lower bound (ε/2)^⌈p⌉/p is used instead.
    Lp { p: BigRational },
    /// η(ε) = c·ε^q, with c·2^q ≤ 1.
    Power { c: BigRational, q: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Modulus {
    kind: ModulusKind,
    has_tilde: bool,
}

impl Modulus {
    pub fn hilbert() -> Self {
        Self {
            kind: ModulusKind::Hilbert,
            has_tilde: true,
        }
    }

    pub fn lp(p: BigRational) -> Result<Self> {
        if p < BigRational::from_integer(2.into()) {
            return Err(Error::Domain(format!(
                "L_p modulus needs p >= 2, got {}",
                display(&p)
            )));
        }
        Ok(Self {
            kind: ModulusKind::Lp { p },
            has_tilde: true,
        })
    }

    pub fn lp_int(p: u32) -> Result<Self> {
        Self::lp(BigRational::from_integer(p.into()))
    }

    pub fn power(c: BigRational, q: u32) -> Result<Self> {
        if !c.is_positive() {
            return Err(Error::Domain("power modulus needs c > 0".into()));
        }
        if q == 0 {
            return Err(Error::Domain("power modulus needs q >= 1".into()));
        }
        if &c * pow(&BigRational::from_integer(2.into()), q) > BigRational::one() {
            return Err(Error::Domain(format!(
                "power modulus c*eps^q must not exceed 1 on (0,2]: c*2^{q} > 1 for c = {}",
                display(&c)
            )));
        }
        Ok(Self {
            kind: ModulusKind::Power { c, q },
            has_tilde: true,
        })
    }

    /// The same modulus with its monotone factorization withheld, so only
    /// the unrefined bound applies.
    pub fn without_factorization(mut self) -> Self {
        self.has_tilde = false;
        self
    }

    /// The canonical modulus for a space: Hilbert for p = 2, L_p otherwise.
    pub fn for_space(space: &LpSpace) -> Self {
        if space.is_hilbert() {
            Self::hilbert()
        } else {
            Self::lp(space.p().clone()).expect("spaces have p >= 2")
        }
    }

    pub fn kind(&self) -> &ModulusKind {
        &self.kind
    }

    pub fn has_tilde(&self) -> bool {
        self.has_tilde
    }

    /// Whether this modulus is known to be valid for `space`. User power
    /// moduli are accepted everywhere; they are checked empirically.
    pub fn is_valid_for(&self, space: &LpSpace) -> bool {
        match &self.kind {
            ModulusKind::Hilbert => space.is_hilbert(),
            ModulusKind::Lp { p } => p == space.p(),
            ModulusKind::Power { .. } => true,
        }
    }

    /// Exponent used by the power form: η(ε) = coeff·ε^exponent.
    fn power_form(&self) -> (BigRational, u32) {
        match &self.kind {
            ModulusKind::Hilbert => (BigRational::new(1.into(), 8.into()), 2),
            ModulusKind::Lp { p } => {
                // (ε/2)^e / p = ε^e / (p·2^e), e = ⌈p⌉.
                let e = p.ceil().to_integer().to_u32().expect("moderate exponent");
                let denom = p * BigRational::from_integer(BigInt::one() << e);
                (denom.recip(), e)
            }
            ModulusKind::Power { c, q } => (c.clone(), *q),
        }
    }

    /// η(min(2, ε)), exactly.
    pub fn eval(&self, eps: &BigRational) -> Result<BigRational> {
        let e = clamp_eps(eps)?;
        let (coeff, exponent) = self.power_form();
        Ok(coeff * pow(&e, exponent))
    }

    /// η̃(min(2, ε)), so that η(ε) = ε·η̃(ε) on (0, 2].
    pub fn eval_tilde(&self, eps: &BigRational) -> Result<BigRational> {
        if !self.has_tilde {
            return Err(Error::Unsupported(format!(
                "modulus {self} has no monotone factorization"
            )));
        }
        let e = clamp_eps(eps)?;
        let (coeff, exponent) = self.power_form();
        Ok(coeff * pow(&e, exponent - 1))
    }

    /// u_η(ε) = (ε/2)·η(ε), or ũ_η(ε) = ε·η̃(ε) when `refined`.
    pub fn eval_u(&self, eps: &BigRational, refined: bool) -> Result<BigRational> {
        if !eps.is_positive() || eps > &BigRational::from_integer(2.into()) {
            return Err(Error::Domain(format!(
                "u is defined on (0, 2], got {}",
                display(eps)
            )));
        }
        if refined {
            Ok(eps * self.eval_tilde(eps)?)
        } else {
            Ok(eps / BigRational::from_integer(2.into()) * self.eval(eps)?)
        }
    }

    fn power_form_f64(&self) -> (f64, i32) {
        let (c, e) = self.power_form();
        (to_f64(&c), e as i32)
    }

    pub fn eval_f64(&self, eps: f64) -> f64 {
        let (c, e) = self.power_form_f64();
        c * eps.min(2.0).powi(e)
    }

    pub fn eval_tilde_f64(&self, eps: f64) -> f64 {
        let (c, e) = self.power_form_f64();
        c * eps.min(2.0).powi(e - 1)
    }

    pub fn eval_u_f64(&self, eps: f64, refined: bool) -> f64 {
        let e = eps.min(2.0);
        if refined {
            e * self.eval_tilde_f64(e)
        } else {
            0.5 * e * self.eval_f64(e)
        }
    }
}

fn clamp_eps(eps: &BigRational) -> Result<BigRational> {
    if !eps.is_positive() {
        return Err(Error::Domain(format!(
            "modulus argument must be positive, got {}",
            display(eps)
        )));
    }
    let two = BigRational::from_integer(2.into());
    Ok(if eps > &two { two } else { eps.clone() })
}

impl FromStr for Modulus {
    type Err = Error;

    /// `hilbert`, `lp:<p>`, or `power:<c>:<q>`, case-insensitive.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let parts: Vec<&str> = lower.split(':').collect();
        match parts.as_slice() {
            ["hilbert"] => Ok(Modulus::hilbert()),
            ["lp", p] => {
                let p =
                    parse_rational(p).map_err(|_| Error::parse("modulus", s, "bad exponent p"))?;
                Modulus::lp(p)
            }
            ["power", c, q] => {
                let c = parse_rational(c)
                    .map_err(|_| Error::parse("modulus", s, "bad coefficient c"))?;
                let q: u32 = q
                    .parse()
                    .map_err(|_| Error::parse("modulus", s, "q must be a positive integer"))?;
                Modulus::power(c, q)
            }
            _ => Err(Error::parse(
                "modulus",
                s,
                "expected hilbert, lp:<p> or power:<c>:<q>",
            )),
        }
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ModulusKind::Hilbert => f.write_str("hilbert"),
            ModulusKind::Lp { p } => write!(f, "lp:{}", display(p)),
            ModulusKind::Power { c, q } => write!(f, "power:{}:{q}", display(c)),
        }
    }
}

/// Outcome of one midpoint-inequality check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcCheck {
    pub holds: bool,
    /// ‖y‖ − u(ε) − ‖½(x + y)‖; negative means violated.
    pub slack: f64,
}

/// Checks ‖½(x + y)‖ ≤ ‖y‖ − u(ε) with ε = ‖x − y‖, for ‖x‖ ≤ ‖y‖ ≤ 1.
/// This is a test oracle, so a violated precondition is an error rather
/// than a vacuous pass.
pub fn check_uc_inequality(
    x: &[f64],
    y: &[f64],
    modulus: &Modulus,
    space: &LpSpace,
    refined: bool,
) -> Result<UcCheck> {
    let d = space.dim();
    for v in [x, y] {
        if v.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: v.len(),
            });
        }
    }
    if !modulus.is_valid_for(space) {
        return Err(Error::Contract(format!(
            "modulus {modulus} is not a modulus of uniform convexity for {space}"
        )));
    }
    if refined && !modulus.has_tilde() {
        return Err(Error::Unsupported(format!(
            "modulus {modulus} has no monotone factorization"
        )));
    }
    let p = space.p_f64();
    let nx = lp_norm(x, p);
    let ny = lp_norm(y, p);
    if nx > ny + GEOMETRIC_TOL || ny > 1.0 + GEOMETRIC_TOL {
        return Err(Error::Contract(format!(
            "midpoint inequality needs |x| <= |y| <= 1, got |x| = {nx}, |y| = {ny}"
        )));
    }
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
    let eps = lp_norm(&diff, p);
    let n_mid = lp_norm(&mid, p);
    let u = if eps == 0.0 {
        0.0
    } else {
        modulus.eval_u_f64(eps, refined)
    };
    let slack = ny - u - n_mid;
    Ok(UcCheck {
        holds: eps == 0.0 || slack >= -GEOMETRIC_TOL,
        slack,
    })
}

/// Refinement steps applied to every sample in [`estimate_clarkson`].
pub const CLARKSON_REFINE_STEPS: usize = 100;

/// Upper estimate of Clarkson's modulus δ_X(ε) on ℓ_p^d.
///
/// Each sample draws a pair in the unit ball; the pair is reparametrized as
/// a midpoint direction m̂ and chord direction û, the chord is stretched to
/// length exactly ε, and the midpoint is pushed out along m̂ as far as both
/// endpoints stay in the ball. That feasible pair is then polished by
/// coordinate descent over (m̂, û). The result is the minimum of 1 − ‖mid‖
/// over all polished samples, so it never increases with `n_samples` for a
/// fixed seed.
pub fn estimate_clarkson(space: &LpSpace, eps: f64, n_samples: usize, seed: u64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 2.0) {
        return Err(Error::Domain(format!(
            "Clarkson modulus is estimated on (0, 2], got {eps}"
        )));
    }
    if n_samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let d = space.dim();
    let p = space.p_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..n_samples {
        let x = sample_ball(d, p, &mut rng);
        let y = sample_ball(d, p, &mut rng);
        let mut mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let mut chord: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        if lp_norm(&chord, p) == 0.0 {
            chord = sample_direction(d, &mut rng);
        }
        if lp_norm(&mid, p) == 0.0 {
            mid = sample_direction(d, &mut rng);
        }
        let value = ClarksonProblem { p, half: eps / 2.0 }.polish(&mut mid, &mut chord);
        best = best.min(value);
    }
    Ok(best)
}

struct ClarksonProblem {
    p: f64,
    half: f64,
}

impl ClarksonProblem {
    /// 1 − s* where s* is the largest s ∈ [0, 1] with ‖s·m̂ ± (ε/2)·û‖ ≤ 1.
    /// The max of the two endpoint norms is convex in s, so the feasible set
    /// is an interval starting at 0 and bisection keeps the feasible end.
    fn objective(&self, mid: &[f64], chord: &[f64], buf: &mut [f64]) -> f64 {
        let nm = lp_norm(mid, self.p);
        let nc = lp_norm(chord, self.p);
        let feasible = |s: f64, buf: &mut [f64]| {
            for sign in [1.0, -1.0] {
                for ((b, m), c) in buf.iter_mut().zip(mid).zip(chord) {
                    *b = s * m / nm + sign * self.half * c / nc;
                }
                if lp_norm(buf, self.p) > 1.0 {
                    return false;
                }
            }
            true
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        if feasible(hi, buf) {
            lo = hi;
        } else {
            for _ in 0..56 {
                let m = 0.5 * (lo + hi);
                if feasible(m, buf) {
                    lo = m;
                } else {
                    hi = m;
                }
            }
        }
        1.0 - lo
    }

    fn polish(&self, mid: &mut [f64], chord: &mut [f64]) -> f64 {
        let d = mid.len();
        let mut buf = vec![0.0; d];
        normalize(mid, self.p);
        normalize(chord, self.p);
        let mut value = self.objective(mid, chord, &mut buf);
        let mut step = 0.25;
        for _ in 0..CLARKSON_REFINE_STEPS {
            let mut improved = false;
            for coord in 0..2 * d {
                for dir in [1.0, -1.0] {
                    let (target, i) = if coord < d {
                        (&mut *mid, coord)
                    } else {
                        (&mut *chord, coord - d)
                    };
                    let old = target[i];
                    target[i] = old + dir * step;
                    if lp_norm(target, self.p) == 0.0 {
                        target[i] = old;
                        continue;
                    }
                    let candidate = self.objective(mid, chord, &mut buf);
                    if candidate < value {
                        value = candidate;
                        improved = true;
                        break;
                    }
                    let target = if coord < d { &mut *mid } else { &mut *chord };
                    target[i] = old;
                }
            }
            normalize(mid, self.p);
            normalize(chord, self.p);
            if !improved {
                step *= 0.5;
            }
        }
        value
    }
}

fn normalize(v: &mut [f64], p: f64) {
    let n = lp_norm(v, p);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn sample_direction(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// A point of the ℓ_p unit ball: Gaussian direction, radius U^{1/d}.
fn sample_ball(d: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v = sample_direction(d, rng);
    normalize(&mut v, p);
    let r: f64 = rng.gen::<f64>().powf(1.0 / d as f64);
    v.iter_mut().for_each(|x| *x *= r);
    v
}

/// Closed form of Clarkson's modulus of a Hilbert space, 1 − √(1 − ε²/4).
pub fn hilbert_clarkson(eps: f64) -> f64 {
    let e = eps.min(2.0);
    1.0 - (1.0 - e * e / 4.0).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Modulus::hilbert().eval(&q(1, 1)).unwrap(), q(1, 8));
        assert_eq!(Modulus::lp_int(3).unwrap().eval(&q(2, 1)).unwrap(), q(1, 3));
        assert_eq!(Modulus::hilbert().eval(&q(3, 1)).unwrap(), q(1, 2));
        assert!(matches!(
            Modulus::hilbert().eval(&q(0, 1)),
            Err(Error::Domain(_))
        ));
        assert!(Modulus::hilbert().eval(&q(-1, 2)).is_err());
    }

    #[test]
    fn lp2_coincides_with_hilbert() {
        let lp2 = Modulus::lp_int(2).unwrap();
        for e in [q(1, 3), q(1, 1), q(7, 4), q(2, 1)] {
            assert_eq!(lp2.eval(&e).unwrap(), Modulus::hilbert().eval(&e).unwrap());
        }
    }

    #[test]
    fn u_examples() {
        let h = Modulus::hilbert();
        assert_eq!(h.eval_u(&q(1, 1), false).unwrap(), q(1, 16));
        assert_eq!(h.eval_u(&q(1, 1), true).unwrap(), q(1, 8));
        assert_eq!(h.eval_u(&q(2, 1), false).unwrap(), q(1, 2));
        let plain = Modulus::hilbert().without_factorization();
        assert!(matches!(
            plain.eval_u(&q(1, 1), true),
            Err(Error::Unsupported(_))
        ));
        assert!(plain.eval_u(&q(1, 1), false).is_ok());
        assert!(h.eval_u(&q(3, 1), false).is_err());
    }

    #[test]
    fn fractional_p_uses_a_rational_lower_bound() {
        let m = Modulus::lp(q(5, 2)).unwrap();
        let e = q(3, 2);
        let exact = 1.5f64.powf(2.5) / (2.5 * 2f64.powf(2.5));
        let v = to_f64(&m.eval(&e).unwrap());
        assert!(v > 0.0 && v <= exact);
        assert_eq!(m.eval(&e).unwrap(), &e * m.eval_tilde(&e).unwrap());
    }

    #[test]
    fn power_modulus_validation() {
        assert!(Modulus::power(q(1, 8), 2).is_ok());
        assert!(Modulus::power(q(1, 2), 2).is_err());
        assert!(Modulus::power(q(0, 1), 2).is_err());
        assert!(Modulus::power(q(1, 8), 0).is_err());
    }

    #[test]
    fn parse_and_display() {
        for s in ["hilbert", "lp:3", "lp:7/2", "power:1/16:3"] {
            let m: Modulus = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert_eq!("HILBERT".parse::<Modulus>().unwrap(), Modulus::hilbert());
        assert_eq!(
            "Lp:4".parse::<Modulus>().unwrap(),
            Modulus::lp_int(4).unwrap()
        );
        assert!("lp:1".parse::<Modulus>().is_err());
        assert!("power:1/8".parse::<Modulus>().is_err());
        assert!("banach".parse::<Modulus>().is_err());
    }

    #[test]
    fn uc_inequality_examples() {
        let l2 = LpSpace::with_int_p(2, 2).unwrap();
        let h = Modulus::hilbert();
        let r = check_uc_inequality(&[1.0, 0.0], &[1.0, 0.0], &h, &l2, false).unwrap();
        assert!(r.holds);
        let r = check_uc_inequality(&[1.0, 0.0], &[0.0, 1.0], &h, &l2, false).unwrap();
        assert!(r.holds);
        let expected = 1.0 - 2f64.sqrt() / 8.0 - 2f64.sqrt() / 2.0;
        assert!((r.slack - expected).abs() < 1e-15);
        let r = check_uc_inequality(&[1.0, 0.0], &[-1.0, 0.0], &h, &l2, false).unwrap();
        assert!(r.holds);
        assert!((r.slack - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uc_inequality_contract_errors() {
        let l2 = LpSpace::with_int_p(2, 2).unwrap();
        let l3 = LpSpace::with_int_p(2, 3).unwrap();
        let h = Modulus::hilbert();
        assert!(matches!(
            check_uc_inequality(&[1.0, 0.0], &[0.5, 0.0], &h, &l2, false),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            check_uc_inequality(&[0.0, 0.0], &[2.0, 0.0], &h, &l2, false),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            check_uc_inequality(&[0.0, 0.0], &[1.0, 0.0], &h, &l3, false),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn clarkson_examples() {
        let l2 = LpSpace::with_int_p(2, 2).unwrap();
        let at2 = estimate_clarkson(&l2, 2.0, 16, 1).unwrap();
        assert!((at2 - 1.0).abs() < 1e-6, "{at2}");
        let at1 = estimate_clarkson(&l2, 1.0, 32, 2).unwrap();
        assert!((at1 - 0.13397).abs() < 1e-3, "{at1}");
        let tiny = estimate_clarkson(&l2, 1e-6, 8, 3).unwrap();
        assert!(tiny <= 1e-6, "{tiny}");
        assert!(estimate_clarkson(&l2, 0.0, 8, 3).is_err());
        assert!(estimate_clarkson(&l2, 2.5, 8, 3).is_err());
    }

    #[test]
    fn clarkson_never_increases_with_more_samples() {
        let l3 = LpSpace::with_int_p(3, 3).unwrap();
        let mut last = f64::INFINITY;
        for n in [1, 2, 4, 8, 16] {
            let v = estimate_clarkson(&l3, 0.7, n, 11).unwrap();
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn clarkson_dominates_lp_modulus() {
        for p in [2u32, 3, 4] {
            let space = LpSpace::with_int_p(3, p).unwrap();
            let m = Modulus::for_space(&space);
            for eps in [0.3, 0.9, 1.6] {
                let est = estimate_clarkson(&space, eps, 8, p as u64).unwrap();
                assert!(est >= m.eval_f64(eps) - 1e-9, "p={p} eps={eps}");
            }
        }
    }

    fn rational_eps() -> impl Strategy<Value = BigRational> {
        (1i64..=2000, 1i64..=1000)
            .prop_filter("in (0,2]", |(n, d)| n <= &(2 * d))
            .prop_map(|(n, d)| q(n, d))
    }

    fn builtin() -> impl Strategy<Value = Modulus> {
        prop_oneof![
            Just(Modulus::hilbert()),
            (2i64..=6).prop_map(|p| Modulus::lp(q(p, 1)).unwrap()),
            (5i64..=13).prop_map(|n| Modulus::lp(q(n, 2)).unwrap()),
            (1u32..=4).prop_map(|k| Modulus::power(q(1, 1 << (k + 1)), k).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn modulus_in_unit_interval_and_dominates_u(m in builtin(), e in rational_eps()) {
            let eta = m.eval(&e).unwrap();
            prop_assert!(eta.is_positive() && eta <= BigRational::one());
            prop_assert!(m.eval_u(&e, false).unwrap() <= eta);
            prop_assert_eq!(m.eval_u(&e, true).unwrap(), eta.clone());
            prop_assert_eq!(eta, &e * m.eval_tilde(&e).unwrap());
        }

        #[test]
        fn modulus_and_tilde_are_nondecreasing(m in builtin(), a in rational_eps(), b in rational_eps()) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.eval(&lo).unwrap() <= m.eval(&hi).unwrap());
            prop_assert!(m.eval_tilde(&lo).unwrap() <= m.eval_tilde(&hi).unwrap());
        }

        #[test]
        fn clamp_above_two(m in builtin(), n in 2001i64..100_000) {
            let e = q(n, 1000);
            prop_assert_eq!(m.eval(&e).unwrap(), m.eval(&q(2, 1)).unwrap());
        }

        #[test]
        fn float_evaluation_tracks_exact(m in builtin(), e in rational_eps()) {
            let exact = to_f64(&m.eval(&e).unwrap());
            let approx = m.eval_f64(to_f64(&e));
            prop_assert!((exact - approx).abs() <= 1e-14 * exact.max(1e-300) + 1e-300);
        }
    }
}
