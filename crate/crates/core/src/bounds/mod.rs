//! The metastability bound Φ(ε, g, b, η) = M·h̃^K(1), the Lemma 3.1 bounds,
//! and the earlier Hilbert-space bound used as a baseline.

pub mod compare;
mod counter;
mod iterate;
mod logdomain;
mod maps;

use std::fmt;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::moduli::Modulus;
use crate::rational::{ceil_nat, decimal_digits, display};

pub use counter::{CounterFunction, Family};
pub use iterate::{iterate_fn, DEFAULT_DIGIT_BUDGET};
pub use logdomain::Log10Interval;

use iterate::{exceeds_budget, iterate_map, log10_estimate, Iterated};
use maps::{AgtMap, MetastabilityMap};

/// The final bound, exact when it fits the digit budget.
#[derive(Debug, Clone, PartialEq)]
pub enum Phi {
    Exact(BigUint),
    /// Exceeded the digit budget; only an enclosure of log₁₀ is known.
    BudgetExceeded {
        log10: Log10Interval,
    },
}

impl Phi {
    pub fn exact(&self) -> Option<&BigUint> {
        match self {
            Phi::Exact(v) => Some(v),
            Phi::BudgetExceeded { .. } => None,
        }
    }

    pub fn is_budget_exceeded(&self) -> bool {
        matches!(self, Phi::BudgetExceeded { .. })
    }

    pub fn log10(&self) -> Log10Interval {
        match self {
            Phi::Exact(v) => Log10Interval::of_nat(v),
            Phi::BudgetExceeded { log10 } => *log10,
        }
    }

    /// Whether `p ≤ Φ`. A bound past the digit budget has more digits than
    /// any machine index, so the comparison is decided without it.
    pub fn admits(&self, p: u64) -> bool {
        match self {
            Phi::Exact(v) => &BigUint::from(p) <= v,
            Phi::BudgetExceeded { .. } => true,
        }
    }
}

impl Phi {
    /// `budget_exceeded` plus either `phi` and `phi_digits` or `phi_log10`.
    pub fn to_json(&self) -> Value {
        match self {
            Phi::Exact(p) => json!({
                "budget_exceeded": false,
                "phi": p.to_string(),
                "phi_digits": decimal_digits(p),
            }),
            Phi::BudgetExceeded { log10 } => json!({
                "budget_exceeded": true,
                "phi_log10": [log10.lo, json_float(log10.hi)],
            }),
        }
    }
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi::Exact(v) => write!(f, "{v}"),
            Phi::BudgetExceeded { log10 } => {
                write!(f, "10^[{:.6}, {:.6}]", log10.lo, log10.hi)
            }
        }
    }
}

/// M, γ, K and Φ = M·h̃^K(1).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundBreakdown {
    pub m: BigUint,
    pub gamma: BigRational,
    pub k: BigUint,
    pub phi: Phi,
    /// h̃(1), h̃²(1), … up to a handful of leading iterates.
    pub iterates_logged: Vec<BigUint>,
    pub refined: bool,
}

impl BoundBreakdown {
    pub fn to_json(&self) -> Value {
        let mut v = self.phi.to_json();
        v["M"] = json!(self.m.to_string());
        v["gamma"] = json!(display(&self.gamma));
        v["K"] = json!(self.k.to_string());
        v["refined"] = json!(self.refined);
        v["iterates_logged"] = json!(self
            .iterates_logged
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>());
        v
    }
}

fn json_float(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!("inf")
    }
}

/// Which bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundVariant {
    Ours,
    AgtGeneral,
    AgtIsometry,
}

impl std::str::FromStr for BoundVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ours" => Ok(Self::Ours),
            "agt-general" => Ok(Self::AgtGeneral),
            "agt-isometry" => Ok(Self::AgtIsometry),
            _ => Err(Error::parse(
                "bound variant",
                s,
                "expected ours, agt-general or agt-isometry",
            )),
        }
    }
}

impl fmt::Display for BoundVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ours => "ours",
            Self::AgtGeneral => "agt-general",
            Self::AgtIsometry => "agt-isometry",
        })
    }
}

fn check_inputs(eps: &BigRational, b: &BigRational, budget: u64) -> Result<()> {
    if !eps.is_positive() {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {}",
            display(eps)
        )));
    }
    if !b.is_positive() {
        return Err(Error::Domain(format!(
            "b must be positive, got {}",
            display(b)
        )));
    }
    if budget == 0 {
        return Err(Error::Domain("digit budget must be at least 1".into()));
    }
    Ok(())
}

fn rat(n: u64) -> BigRational {
    BigRational::from_integer(n.into())
}

/// (M, γ) for the general path.
fn m_and_gamma(
    eps: &BigRational,
    b: &BigRational,
    modulus: &Modulus,
    refined: bool,
) -> Result<(BigUint, BigRational)> {
    let m = ceil_nat(&(rat(16) * b / eps));
    let arg = eps / (rat(8) * b);
    let gamma = if refined {
        eps / rat(8) * modulus.eval_tilde(&arg)?
    } else {
        eps / rat(16) * modulus.eval(&arg)?
    };
    Ok((m, gamma))
}

fn finish(
    m: BigUint,
    gamma: BigRational,
    k: BigUint,
    g: &CounterFunction,
    refined: bool,
    budget: u64,
) -> BoundBreakdown {
    let map = MetastabilityMap::new(m.clone(), g.clone());
    let mut iterates_logged = Vec::new();
    let phi = match iterate_map(&map, &k, budget, &mut iterates_logged) {
        Iterated::Exact(v) => {
            let phi = &m * v;
            if exceeds_budget(&phi, budget) {
                Phi::BudgetExceeded {
                    log10: Log10Interval::of_nat(&phi),
                }
            } else {
                Phi::Exact(phi)
            }
        }
        Iterated::Exceeded(t) => Phi::BudgetExceeded {
            log10: t.product(Log10Interval::of_nat(&m)),
        },
    };
    BoundBreakdown {
        m,
        gamma,
        k,
        phi,
        iterates_logged,
        refined,
    }
}

/// Φ(ε, g, b, η) with every intermediate quantity.
///
/// Iterates h̃(n) = max_{i ≤ n} h(i), h(n) = 2(M·n + g(M·n)), K times
/// from 1. When an iterate outgrows `digit_budget` decimal digits the
/// result carries a log₁₀ enclosure instead of the exact value.
pub fn compute_breakdown(
    eps: &BigRational,
    b: &BigRational,
    modulus: &Modulus,
    g: &CounterFunction,
    refined: bool,
    digit_budget: u64,
) -> Result<BoundBreakdown> {
    check_inputs(eps, b, digit_budget)?;
    let (m, gamma, k) = bound_parameters(eps, b, modulus, refined)?;
    Ok(finish(m, gamma, k, g, refined, digit_budget))
}

/// M = ⌈16b/ε⌉, γ and K = ⌈b/γ⌉ without iterating anything.
pub fn bound_parameters(
    eps: &BigRational,
    b: &BigRational,
    modulus: &Modulus,
    refined: bool,
) -> Result<(BigUint, BigRational, BigUint)> {
    check_inputs(eps, b, 1)?;
    let (m, gamma) = m_and_gamma(eps, b, modulus, refined)?;
    let k = ceil_nat(&(b / &gamma));
    Ok((m, gamma, k))
}

/// The refined Hilbert-space bound with K = ⌈512b²/ε²⌉ in closed form.
///
/// The closed form assumes ε/(8b) ≤ 2; beyond that the modulus argument is
/// clamped and the general path is used.
pub fn hilbert_phi(
    eps: &BigRational,
    b: &BigRational,
    g: &CounterFunction,
    digit_budget: u64,
) -> Result<BoundBreakdown> {
    check_inputs(eps, b, digit_budget)?;
    if eps > &(rat(16) * b) {
        return compute_breakdown(eps, b, &Modulus::hilbert(), g, true, digit_budget);
    }
    let m = ceil_nat(&(rat(16) * b / eps));
    let gamma = eps * eps / (rat(512) * b);
    let k = ceil_nat(&(rat(512) * b * b / (eps * eps)));
    Ok(finish(m, gamma, k, g, true, digit_budget))
}

fn agt_map(
    eps: &BigRational,
    b: &BigRational,
    g: &CounterFunction,
    isometry: bool,
) -> (AgtMap, BigUint) {
    let rho = ceil_nat(&(b / eps));
    let k = &rho * &rho * 512u32;
    (AgtMap::new(rho, g.clone(), isometry), k)
}

/// h^K(1) for the Avigad–Gerhardy–Towsner bound, ρ = ⌈b/ε⌉, K = 512ρ².
pub fn agt_phi(
    eps: &BigRational,
    b: &BigRational,
    g: &CounterFunction,
    isometry: bool,
    digit_budget: u64,
) -> Result<Phi> {
    check_inputs(eps, b, digit_budget)?;
    let (map, k) = agt_map(eps, b, g, isometry);
    Ok(match iterate_map(&map, &k, digit_budget, &mut Vec::new()) {
        Iterated::Exact(v) => Phi::Exact(v),
        Iterated::Exceeded(t) => Phi::BudgetExceeded { log10: t },
    })
}

/// Encloses log₁₀Φ by iterating the bound's map in the log domain with
/// outward rounding. `modulus` and `refined` only matter for [`BoundVariant::Ours`].
pub fn phi_log_estimate(
    eps: &BigRational,
    b: &BigRational,
    modulus: &Modulus,
    g: &CounterFunction,
    refined: bool,
    variant: BoundVariant,
) -> Result<Log10Interval> {
    check_inputs(eps, b, 1)?;
    match variant {
        BoundVariant::Ours => {
            let (m, _, k) = bound_parameters(eps, b, modulus, refined)?;
            let map = MetastabilityMap::new(m.clone(), g.clone());
            Ok(log10_estimate(&map, &k).product(Log10Interval::of_nat(&m)))
        }
        BoundVariant::AgtGeneral | BoundVariant::AgtIsometry => {
            let (map, k) = agt_map(eps, b, g, variant == BoundVariant::AgtIsometry);
            Ok(log10_estimate(&map, &k))
        }
    }
}

/// K = ⌈b/ε⌉ of Lemma 3.1.
pub fn glb_k(b: &BigRational, eps: &BigRational) -> Result<BigUint> {
    check_inputs(eps, b, 1)?;
    Ok(ceil_nat(&(b / eps)))
}

/// max_{0 ≤ i ≤ K} f^i(1), stopping early at a fixed point.
fn max_of_iterates(f: impl Fn(&BigUint) -> BigUint, k: &BigUint, budget: u64) -> Result<BigUint> {
    let steps = k
        .to_u64()
        .ok_or_else(|| Error::Domain(format!("iteration count {k} exceeds a machine count")))?;
    let mut cur = BigUint::one();
    let mut best = cur.clone();
    for i in 0..steps {
        let next = f(&cur);
        if exceeds_budget(&next, budget) {
            return Err(Error::BudgetExceeded {
                budget,
                steps: i,
                total: k.to_string(),
                last_digits: decimal_digits(&cur),
            });
        }
        if next > best {
            best = next.clone();
        }
        if next == cur {
            break;
        }
        cur = next;
    }
    Ok(best)
}

/// Θ(b, ε, g) = max_{i ≤ K} g^i(1) with K = ⌈b/ε⌉.
pub fn theta_glb(
    b: &BigRational,
    eps: &BigRational,
    g: &CounterFunction,
    digit_budget: u64,
) -> Result<BigUint> {
    let k = glb_k(b, eps)?;
    max_of_iterates(|n| g.eval(n), &k, digit_budget)
}

/// h^K(1) with h(n) = max_{i ≤ n} g(i) and K = ⌈b/ε⌉.
///
/// The iterates of the envelope from 1 are nondecreasing once they pass 1,
/// so their maximum is taken to cover envelopes with h(1) = 0.
pub fn glb_ii_bound(
    b: &BigRational,
    eps: &BigRational,
    g: &CounterFunction,
    digit_budget: u64,
) -> Result<BigUint> {
    let k = glb_k(b, eps)?;
    max_of_iterates(|n| g.envelope(n), &k, digit_budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    fn q(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    fn n(x: u64) -> BigUint {
        BigUint::from(x)
    }

    /// Straight K-fold iteration of h(n) = 2(M·n + g(M·n)) for monotone g,
    /// independent of the engine's affine jumps and running maxima.
    fn naive_phi(m: u64, k: u64, g: impl Fn(&BigUint) -> BigUint) -> BigUint {
        let m = n(m);
        let mut cur = n(1);
        for _ in 0..k {
            let mn = &m * &cur;
            cur = (g(&mn) + mn) * 2u32;
        }
        m * cur
    }

    #[test]
    fn theorem_examples() {
        let one = CounterFunction::constant(1);
        let bd = compute_breakdown(
            &q("8"),
            &q("1"),
            &Modulus::hilbert(),
            &one,
            true,
            DEFAULT_DIGIT_BUDGET,
        )
        .unwrap();
        assert_eq!(
            (bd.m.clone(), bd.gamma.clone(), bd.k.clone()),
            (n(2), q("1/8"), n(8))
        );
        assert_eq!(bd.phi, Phi::Exact(n(218452)));
        assert_eq!(bd.iterates_logged[..3], [n(6), n(26), n(106)]);

        let bd = compute_breakdown(
            &q("8"),
            &q("1"),
            &Modulus::hilbert(),
            &one,
            false,
            DEFAULT_DIGIT_BUDGET,
        )
        .unwrap();
        assert_eq!((bd.gamma.clone(), bd.k.clone()), (q("1/16"), n(16)));
        assert_eq!(bd.phi, Phi::Exact(n(14316557652)));

        let scaled = compute_breakdown(
            &q("16"),
            &q("2"),
            &Modulus::hilbert(),
            &one,
            true,
            DEFAULT_DIGIT_BUDGET,
        )
        .unwrap();
        assert_eq!(
            (scaled.m, scaled.k, scaled.phi),
            (n(2), n(8), Phi::Exact(n(218452)))
        );

        let bd = compute_breakdown(
            &q("2"),
            &q("1"),
            &Modulus::hilbert(),
            &one,
            true,
            DEFAULT_DIGIT_BUDGET,
        )
        .unwrap();
        assert_eq!(
            (bd.m.clone(), bd.gamma.clone(), bd.k.clone()),
            (n(8), q("1/128"), n(128))
        );
        assert_eq!(bd.phi, Phi::Exact(naive_phi(8, 128, |_| n(1))));
    }

    #[test]
    fn refined_needs_factorization() {
        let no_tilde = Modulus::hilbert().without_factorization();
        let err = compute_breakdown(
            &q("1"),
            &q("1"),
            &no_tilde,
            &CounterFunction::constant(1),
            true,
            10,
        );
        assert!(matches!(err, Err(Error::Unsupported(_))));
        let err = compute_breakdown(
            &q("1"),
            &q("0"),
            &Modulus::hilbert(),
            &CounterFunction::constant(1),
            true,
            10,
        );
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn hilbert_fast_path_examples() {
        let one = CounterFunction::constant(1);
        for (e, b, k) in [("8", "1", 8u64), ("1", "1", 512), ("3", "2", 228)] {
            let bd = hilbert_phi(&q(e), &q(b), &one, DEFAULT_DIGIT_BUDGET).unwrap();
            assert_eq!(bd.k, n(k));
            let general = compute_breakdown(
                &q(e),
                &q(b),
                &Modulus::hilbert(),
                &one,
                true,
                DEFAULT_DIGIT_BUDGET,
            )
            .unwrap();
            assert_eq!(bd, general);
        }
        // Past ε = 16b the modulus argument is clamped.
        let far = hilbert_phi(&q("40"), &q("1"), &one, DEFAULT_DIGIT_BUDGET).unwrap();
        let general = compute_breakdown(
            &q("40"),
            &q("1"),
            &Modulus::hilbert(),
            &one,
            true,
            DEFAULT_DIGIT_BUDGET,
        )
        .unwrap();
        assert_eq!(far, general);
    }

    #[test]
    fn engine_matches_naive_iteration_on_affine_and_poly() {
        // A quadratic g doubles the digit count per step, so it gets a small K.
        for (eps, g, gf) in [
            (
                "4",
                CounterFunction::identity(),
                Box::new(|x: &BigUint| x.clone()) as Box<dyn Fn(&BigUint) -> BigUint>,
            ),
            (
                "4",
                CounterFunction::affine(3, 7),
                Box::new(|x: &BigUint| x * 3u32 + 7u32),
            ),
            (
                "12",
                "poly:1,0,1".parse().unwrap(),
                Box::new(|x: &BigUint| x * x + 1u32),
            ),
        ] {
            let bd = compute_breakdown(
                &q(eps),
                &q("1"),
                &Modulus::hilbert(),
                &g,
                true,
                DEFAULT_DIGIT_BUDGET,
            )
            .unwrap();
            let m = bd.m.to_u64().unwrap();
            let k = bd.k.to_u64().unwrap();
            assert_eq!(bd.phi, Phi::Exact(naive_phi(m, k, gf)), "g = {g}");
        }
    }

    #[test]
    fn non_monotone_table_uses_running_max() {
        let g = CounterFunction::table(vec![1000, 0, 0, 0, 0], 0);
        let bd = compute_breakdown(
            &q("8"),
            &q("1"),
            &Modulus::hilbert(),
            &g,
            true,
            DEFAULT_DIGIT_BUDGET,
        )
        .unwrap();
        // M = 2: h(1) = 2(2 + 0) = 4 since g(2) = 0; the running max never sees g(1).
        let h = |x: u64| {
            2 * (2 * x
                + if 2 * x <= 5 {
                    [1000, 0, 0, 0, 0][(2 * x - 1) as usize]
                } else {
                    0
                })
        };
        let mut cur = 1u64;
        for _ in 0..8 {
            cur = (1..=cur).map(h).max().unwrap();
        }
        assert_eq!(bd.phi, Phi::Exact(n(2 * cur)));
    }

    #[test]
    fn agt_examples() {
        let one = CounterFunction::constant(1);
        let phi = agt_phi(&q("1"), &q("1"), &one, true, DEFAULT_DIGIT_BUDGET).unwrap();
        let v = phi.exact().expect("within budget").clone();
        let mut naive = n(1);
        for _ in 0..512 {
            naive = naive * 16385u32 + 24576u32;
        }
        assert_eq!(v, naive);
        let digits = decimal_digits(&v);
        assert!((2156..=2160).contains(&digits), "{digits}");

        let general = agt_phi(&q("1"), &q("1"), &one, false, DEFAULT_DIGIT_BUDGET).unwrap();
        assert!(general.is_budget_exceeded());
        assert!(general.log10().lo > 1e6);
    }

    #[test]
    fn log_estimates_enclose_exact_values() {
        let h = Modulus::hilbert();
        let one = CounterFunction::constant(1);
        let iv = phi_log_estimate(&q("8"), &q("1"), &h, &one, true, BoundVariant::Ours).unwrap();
        assert!(iv.contains(218452f64.log10()));

        let iv =
            phi_log_estimate(&q("1"), &q("1"), &h, &one, true, BoundVariant::AgtIsometry).unwrap();
        let exact = agt_phi(&q("1"), &q("1"), &one, true, DEFAULT_DIGIT_BUDGET).unwrap();
        let e = exact.log10();
        assert!(iv.lo <= e.lo && e.hi <= iv.hi, "{iv:?} vs {e:?}");
        assert!(iv.width() <= 1e-6 * 512.0);

        let id = CounterFunction::identity();
        let iv = phi_log_estimate(&q("1"), &q("1"), &h, &id, true, BoundVariant::Ours).unwrap();
        let expect = 16f64.log10() + 512.0 * 64f64.log10();
        assert!(iv.contains(expect), "{iv:?} vs {expect}");
        let exact =
            compute_breakdown(&q("1"), &q("1"), &h, &id, true, DEFAULT_DIGIT_BUDGET).unwrap();
        assert_eq!(exact.phi, Phi::Exact(n(16) * num_traits::pow(n(64), 512)));
    }

    #[test]
    fn budget_overflow_carries_breakdown_and_estimate() {
        let bd = compute_breakdown(
            &q("1"),
            &q("1"),
            &Modulus::hilbert(),
            &CounterFunction::constant(1),
            true,
            50,
        )
        .unwrap();
        assert_eq!(bd.k, n(512));
        match bd.phi {
            Phi::BudgetExceeded { log10 } => {
                let exact = compute_breakdown(
                    &q("1"),
                    &q("1"),
                    &Modulus::hilbert(),
                    &CounterFunction::constant(1),
                    true,
                    DEFAULT_DIGIT_BUDGET,
                )
                .unwrap();
                let e = exact.phi.log10();
                assert!(log10.lo <= e.lo && e.hi <= log10.hi);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn glb_examples() {
        let succ = CounterFunction::affine(1, 1);
        assert_eq!(theta_glb(&q("1"), &q("1/2"), &succ, 100).unwrap(), n(3));
        assert_eq!(
            theta_glb(&q("3"), &q("1"), &CounterFunction::affine(2, 0), 100).unwrap(),
            n(8)
        );
        assert_eq!(
            theta_glb(&q("1"), &q("1"), &CounterFunction::constant(5), 100).unwrap(),
            n(5)
        );

        assert_eq!(glb_ii_bound(&q("1"), &q("1/2"), &succ, 100).unwrap(), n(3));
        assert_eq!(
            glb_ii_bound(&q("1"), &q("1"), &CounterFunction::constant(5), 100).unwrap(),
            n(5)
        );
        let table = CounterFunction::table(vec![7, 1, 1], 1);
        assert_eq!(glb_ii_bound(&q("2"), &q("1"), &table, 100).unwrap(), n(7));

        let err = theta_glb(&q("100"), &q("1"), &CounterFunction::affine(10, 0), 20).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { steps: 19, .. }));
    }

    #[test]
    fn variant_strings_round_trip() {
        for v in [
            BoundVariant::Ours,
            BoundVariant::AgtGeneral,
            BoundVariant::AgtIsometry,
        ] {
            assert_eq!(v.to_string().parse::<BoundVariant>().unwrap(), v);
        }
        assert!("agt".parse::<BoundVariant>().is_err());
    }
}
