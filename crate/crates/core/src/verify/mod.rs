//! Brute-force metastability witnesses and end-to-end checks of the bound.

mod batch;
mod glb;
mod theorem;
mod trace;

pub use batch::{random_start, summary_csv, verify_batch, Instance, InstanceResult};
pub use glb::{glb_property_check, random_sequence, GlbStats};
pub use theorem::{
    validate_report_json, verify_theorem, MetastabilityReport, Outcome, QueryInfo, VerifyOptions,
};
pub use trace::{proof_trace, ProofTrace};

use serde::Serialize;

use crate::bounds::CounterFunction;
use crate::ergodic::Trajectory;
use crate::error::{Error, Result};

/// Slack below which a passing window is flagged as a knife-edge case.
pub const NEAR_BOUNDARY: f64 = 1e-6;

/// Default largest P tried by the witness search.
pub const DEFAULT_SEARCH_LIMIT: usize = 1_000_000;

/// Default number of means a proof trace may stream.
pub const DEFAULT_TRACE_LIMIT: usize = 1_000_000_000;

/// max_{P ≤ i ≤ j ≤ P+w} ‖x_i − x_j‖, over every pair.
pub fn window_diameter(traj: &mut Trajectory, p: usize, w: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::Domain("window start must be at least 1".into()));
    }
    let end = p.checked_add(w).ok_or(Error::CapExceeded {
        requested: usize::MAX,
        cap: traj.cap(),
    })?;
    traj.extend_to(end)?;
    let mut best: f64 = 0.0;
    for i in p..=end {
        for j in i + 1..=end {
            best = best.max(traj.distance(i, j));
        }
    }
    Ok(best)
}

/// Outcome of testing one window against ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct WindowCheck {
    /// Exact diameter when `exact`, otherwise an upper bound (twice the
    /// radius about x_P) or a lower bound (a pair already ≥ ε).
    pub diameter: f64,
    pub exact: bool,
    pub stable: bool,
}

/// Decides diameter < ε for the cached window [p, p + w].
///
/// The radius r about x_P brackets the diameter in [r, 2r], which settles
/// most windows without the quadratic pair scan.
pub(crate) fn check_window(traj: &Trajectory, p: usize, w: usize, eps: f64) -> WindowCheck {
    let end = p + w;
    let mut radius: f64 = 0.0;
    for j in p + 1..=end {
        radius = radius.max(traj.distance(p, j));
        if radius >= eps {
            return WindowCheck {
                diameter: radius,
                exact: false,
                stable: false,
            };
        }
    }
    if 2.0 * radius < eps - NEAR_BOUNDARY {
        return WindowCheck {
            diameter: 2.0 * radius,
            exact: false,
            stable: true,
        };
    }
    let mut diameter = radius;
    for i in p + 1..=end {
        for j in i + 1..=end {
            diameter = diameter.max(traj.distance(i, j));
            if diameter >= eps {
                return WindowCheck {
                    diameter,
                    exact: false,
                    stable: false,
                };
            }
        }
    }
    WindowCheck {
        diameter,
        exact: true,
        stable: true,
    }
}

/// The least stable window start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub p: usize,
    /// Window diameter at P (an upper bound when far from ε).
    pub diameter: f64,
    pub slack: f64,
    pub near_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum WitnessSearch {
    Found(Witness),
    /// No stable window up to `limit`; `best` is the smallest certified
    /// lower bound on a diameter seen, with its P.
    NotFound {
        limit: usize,
        best_p: usize,
        best_diameter: f64,
    },
}

/// Scans P = 1, 2, … for the first window [P, P + g(P)] of diameter < ε.
///
/// Every rejected P′ carries a pair at distance ≥ ε, so minimality holds by
/// construction. Windows reaching past the trajectory cap end the search.
/// `samples` receives (P, diameter) at powers of two.
pub fn find_min_witness(
    traj: &mut Trajectory,
    eps: f64,
    g: &CounterFunction,
    search_limit: usize,
) -> Result<WitnessSearch> {
    find_min_witness_sampled(traj, eps, g, search_limit, &mut Vec::new())
}

pub(crate) fn find_min_witness_sampled(
    traj: &mut Trajectory,
    eps: f64,
    g: &CounterFunction,
    search_limit: usize,
    samples: &mut Vec<(usize, f64)>,
) -> Result<WitnessSearch> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {eps}"
        )));
    }
    let mut best = (0usize, f64::INFINITY);
    for p in 1..=search_limit {
        let w = g.eval_index(p);
        let end = match p.checked_add(w) {
            Some(e) if e <= traj.cap() => e,
            _ => break,
        };
        traj.extend_to(end)?;
        let check = check_window(traj, p, w, eps);
        if p.is_power_of_two() {
            samples.push((p, check.diameter));
        }
        if check.stable {
            let slack = eps - check.diameter;
            return Ok(WitnessSearch::Found(Witness {
                p,
                diameter: check.diameter,
                slack,
                near_boundary: slack < NEAR_BOUNDARY,
            }));
        }
        if check.diameter < best.1 {
            best = (p, check.diameter);
        }
    }
    Ok(WitnessSearch::NotFound {
        limit: search_limit,
        best_p: best.0,
        best_diameter: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{gen_nonexpansive, LpSpace, NamedOp, Operator, OperatorRecipe};
    use proptest::prelude::*;

    fn traj(op: NamedOp, x: [f64; 2]) -> Trajectory {
        let space = LpSpace::with_int_p(2, 2).unwrap();
        Trajectory::new(space, Operator::named(op, 2).unwrap(), x.to_vec()).unwrap()
    }

    #[test]
    fn diameter_examples() {
        let mut t = traj(NamedOp::NegIdentity, [1.0, 0.0]);
        assert_eq!(window_diameter(&mut t, 3, 0).unwrap(), 0.0);
        assert_eq!(window_diameter(&mut t, 1, 1).unwrap(), 1.0);
        let mut id = traj(NamedOp::Identity, [0.2, 0.7]);
        assert_eq!(window_diameter(&mut id, 4, 9).unwrap(), 0.0);
    }

    #[test]
    fn witness_examples() {
        let one = CounterFunction::constant(1);
        let mut id = traj(NamedOp::Identity, [0.2, 0.7]);
        let found = find_min_witness(&mut id, 1e-9, &CounterFunction::identity(), 10).unwrap();
        assert!(matches!(found, WitnessSearch::Found(Witness { p: 1, .. })));

        let mut neg = traj(NamedOp::NegIdentity, [1.0, 0.0]);
        match find_min_witness(&mut neg, 0.6, &one, 100).unwrap() {
            WitnessSearch::Found(w) => {
                assert_eq!(w.p, 2);
                assert!(!w.near_boundary);
            }
            other => panic!("{other:?}"),
        }

        // x_n − x_{n+1} has norm √2/(2n(n+1)) for the averaged swap; the
        // oracle below scans directly.
        let mut half = traj(NamedOp::HalfSwap, [1.0, 0.0]);
        let p = match find_min_witness(&mut half, 0.01, &one, 1000).unwrap() {
            WitnessSearch::Found(w) => w.p,
            other => panic!("{other:?}"),
        };
        let first = (1..).find(|&n| half.distance(n, n + 1) < 0.01).unwrap();
        assert_eq!(p, first);
        assert!((5..100).contains(&p), "{p}");
    }

    #[test]
    fn not_found_within_limit() {
        let mut swap = traj(NamedOp::Swap, [1.0, 0.0]);
        match find_min_witness(&mut swap, 1e-6, &CounterFunction::constant(1), 50).unwrap() {
            WitnessSearch::NotFound {
                limit,
                best_diameter,
                ..
            } => {
                assert_eq!(limit, 50);
                assert!(best_diameter >= 1e-6);
            }
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn diameter_is_monotone_in_width_and_witness_is_minimal(
            seed in any::<u64>(),
            p in 2u32..=4,
            raw in proptest::collection::vec(-0.5f64..0.5, 4),
        ) {
            let space = LpSpace::with_int_p(4, p).unwrap();
            let op = gen_nonexpansive(&space, &OperatorRecipe::new(seed, 2));
            let mut t = Trajectory::new(space, op, raw).unwrap();
            let mut prev = 0.0;
            for w in 0..12 {
                let d = window_diameter(&mut t, 3, w).unwrap();
                prop_assert!(d >= prev);
                prev = d;
            }
            let g = CounterFunction::identity();
            let eps = 0.05;
            if let WitnessSearch::Found(w) = find_min_witness(&mut t, eps, &g, 5000).unwrap() {
                prop_assert!(window_diameter(&mut t, w.p, w.p).unwrap() < eps);
                for q in 1..w.p.min(150) {
                    prop_assert!(window_diameter(&mut t, q, q).unwrap() >= eps - 1e-12);
                }
            }
        }
    }
}
