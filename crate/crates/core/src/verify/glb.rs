use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{glb_ii_bound, glb_k, theta_glb, CounterFunction};
use crate::error::{Error, Result};
use crate::rational::to_f64;

/// Pass counts of the two parts of the greatest-lower-bound lemma.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlbStats {
    pub trials: usize,
    /// Some N = gⁱ(1), i < K, with N ≤ Θ and a_N ≤ a_{g(N)} + ε.
    pub passed_i: usize,
    /// The least N with a_N ≤ a_m + ε for all m ≤ g(N) satisfies N ≤ h^K(1).
    pub passed_ii: usize,
    pub theta: String,
    pub h_k: String,
    /// Largest least-witness seen for part (ii).
    pub max_n: usize,
    pub failures: Vec<String>,
}

impl GlbStats {
    pub fn all_passed(&self) -> bool {
        self.passed_i == self.trials && self.passed_ii == self.trials
    }
}

/// A random sequence a_1..a_len in [0, b], mixing flat, decreasing, noisy
/// and spiky shapes.
pub fn random_sequence(rng: &mut ChaCha8Rng, len: usize, b: f64) -> Vec<f64> {
    match rng.gen_range(0..4) {
        0 => (0..len).map(|_| rng.gen_range(0.0..=b)).collect(),
        1 => {
            let mut v: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..=b)).collect();
            v.sort_by(|x, y| y.total_cmp(x));
            v
        }
        2 => {
            let mut cur = rng.gen_range(0.0..=b);
            (0..len)
                .map(|_| {
                    cur = (cur + rng.gen_range(-0.3..=0.3) * b).clamp(0.0, b);
                    cur
                })
                .collect()
        }
        _ => {
            let c = rng.gen_range(0.0..=b);
            (0..len)
                .map(|_| {
                    if rng.gen_bool(0.1) {
                        rng.gen_range(0.0..=b)
                    } else {
                        c
                    }
                })
                .collect()
        }
    }
}

fn small(n: &BigUint, what: &str) -> Result<usize> {
    n.to_usize()
        .filter(|&v| v <= 10_000_000)
        .ok_or_else(|| Error::Domain(format!("{what} = {n} is too large for a brute-force check")))
}

/// Brute-force check of both parts of the lemma on `trials` sequences drawn
/// from `gen(rng, len)`, which must return a_1..a_len in [0, b].
pub fn glb_property_check<F>(
    mut gen: F,
    b: &BigRational,
    eps: &BigRational,
    g: &CounterFunction,
    trials: usize,
    seed: u64,
) -> Result<GlbStats>
where
    F: FnMut(&mut ChaCha8Rng, usize) -> Vec<f64>,
{
    let budget = 1000;
    let k = small(&glb_k(b, eps)?, "K")?;
    let theta = theta_glb(b, eps, g, budget)?;
    let h_k = glb_ii_bound(b, eps, g, budget)?;
    let theta_n = small(&theta, "Θ")?;
    let h_k_n = small(&h_k, "h^K(1)")?;

    // Every index the checks can touch: g over [1, max(Θ, h^K(1))].
    let reach = theta_n.max(h_k_n);
    let len = (1..=reach)
        .map(|n| g.eval_index(n))
        .max()
        .unwrap_or(0)
        .max(reach);
    let eps_f = to_f64(eps);
    let b_f = to_f64(b);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = GlbStats {
        trials,
        passed_i: 0,
        passed_ii: 0,
        theta: theta.to_string(),
        h_k: h_k.to_string(),
        max_n: 0,
        failures: Vec::new(),
    };
    for trial in 0..trials {
        let a = gen(&mut rng, len);
        if a.len() < len || a.iter().any(|&v| !(0.0..=b_f).contains(&v)) {
            return Err(Error::Contract(format!(
                "trial {trial}: sequence must have {len} values in [0, {b_f}]"
            )));
        }
        let at = |i: usize| a[i.max(1) - 1];

        // (i): walk N = gⁱ(1) for i < K.
        let mut nn = 1usize;
        let mut ok_i = false;
        for _ in 0..k {
            if nn <= theta_n && at(nn) <= at(g.eval_index(nn)) + eps_f {
                ok_i = true;
                break;
            }
            nn = g.eval_index(nn);
        }
        if ok_i {
            stats.passed_i += 1;
        } else {
            stats
                .failures
                .push(format!("trial {trial}: part (i) found no witness"));
        }

        // (ii): least N with a_N ≤ a_m + ε for every 1 ≤ m ≤ g(N).
        let least = (1..=h_k_n).find(|&n| {
            let gn = g.eval_index(n).min(len);
            (1..=gn).all(|m| at(n) <= at(m) + eps_f)
        });
        match least {
            Some(n) => {
                stats.passed_ii += 1;
                stats.max_n = stats.max_n.max(n);
            }
            None => stats
                .failures
                .push(format!("trial {trial}: part (ii) has no witness N ≤ {h_k}")),
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    fn q(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn constant_sequences_have_witness_one() {
        let s = glb_property_check(
            |_, len| vec![0.4; len],
            &q("1"),
            &q("1/8"),
            &CounterFunction::affine(1, 1),
            5,
            0,
        )
        .unwrap();
        assert!(s.all_passed());
        assert_eq!(s.max_n, 1);
    }

    #[test]
    fn one_then_zeros() {
        let gen = |_: &mut ChaCha8Rng, len: usize| {
            let mut v = vec![0.0; len];
            v[0] = 1.0;
            v
        };
        let s = glb_property_check(gen, &q("1"), &q("1/2"), &CounterFunction::constant(1), 1, 0)
            .unwrap();
        assert!(s.all_passed());
        assert_eq!(s.max_n, 1);
    }

    #[test]
    fn random_suite_succ() {
        let s = glb_property_check(
            |r, len| random_sequence(r, len, 1.0),
            &q("1"),
            &q("1/4"),
            &CounterFunction::affine(1, 1),
            200,
            7,
        )
        .unwrap();
        assert!(s.all_passed(), "{:?}", s.failures);
        assert_eq!(s.h_k, "5");
    }

    #[test]
    fn out_of_range_sequences_are_rejected() {
        let err = glb_property_check(
            |_, len| vec![2.0; len],
            &q("1"),
            &q("1/4"),
            &CounterFunction::constant(1),
            1,
            0,
        );
        assert!(matches!(err, Err(Error::Contract(_))));
    }
}
