use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;
use serde_json::{json, Value};

use super::trace::ProofTrace;
use super::{find_min_witness_sampled, WitnessSearch, DEFAULT_SEARCH_LIMIT, DEFAULT_TRACE_LIMIT};
use crate::bounds::{
    compute_breakdown, BoundBreakdown, CounterFunction, Phi, DEFAULT_DIGIT_BUDGET,
};
use crate::ergodic::Trajectory;
use crate::error::{Error, Result};
use crate::moduli::Modulus;
use crate::rational::{ceil_to_grid, display, to_f64};
use crate::spaces::{LpSpace, Operator};

/// Grid on which ‖x‖ is rounded up to obtain the default b.
pub const B_GRANULARITY: u64 = 1_000_000_000_000;

/// Tolerance when checking a user-supplied b against ‖x‖.
const B_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub refined: bool,
    /// Upper bound on ‖x‖; defaults to ‖x‖ rounded up to 10⁻¹².
    pub b: Option<BigRational>,
    pub search_limit: usize,
    /// Longest stretch of the sequence a proof trace may stream.
    pub trace_limit: usize,
    pub digit_budget: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            refined: true,
            b: None,
            search_limit: DEFAULT_SEARCH_LIMIT,
            trace_limit: DEFAULT_TRACE_LIMIT,
            digit_budget: DEFAULT_DIGIT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Passed,
    /// A witness exists but lies above the bound.
    Failed,
    /// No stable window within the search limit.
    Inconclusive,
}

/// The query half of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryInfo {
    pub epsilon: String,
    pub g: String,
    pub b: String,
    pub space: String,
    pub operator_recipe: Value,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetastabilityReport {
    pub query: QueryInfo,
    pub bound: BoundBreakdown,
    pub search: WitnessSearch,
    pub outcome: Outcome,
    /// (P, diameter) sampled at powers of two during the search.
    pub window_diameters: Vec<(usize, f64)>,
    pub justification: Option<String>,
    pub trace: Option<ProofTrace>,
}

impl MetastabilityReport {
    pub fn p_min(&self) -> Option<usize> {
        match &self.search {
            WitnessSearch::Found(w) => Some(w.p),
            WitnessSearch::NotFound { .. } => None,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Passed
    }

    pub fn near_boundary(&self) -> bool {
        matches!(&self.search, WitnessSearch::Found(w) if w.near_boundary)
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "query": self.query,
            "bound": self.bound.to_json(),
            "result": {
                "p_min": self.p_min(),
                "passed": self.passed(),
                "near_boundary": self.near_boundary(),
                "outcome": self.outcome,
                "justification": self.justification,
                "window_diameters": self.window_diameters,
                "search": self.search,
            },
        });
        if let Some(t) = &self.trace {
            v["trace"] = json!({
                "N": t.n,
                "yk_max": t.yk_max,
                "claim_holds": t.claim_holds,
            });
        }
        v
    }
}

/// Checks the keys and types every report must carry.
pub fn validate_report_json(v: &Value) -> Result<()> {
    let bad = |what: &str| Error::Contract(format!("report JSON: {what}"));
    let query = v
        .get("query")
        .and_then(Value::as_object)
        .ok_or_else(|| bad("missing query"))?;
    for key in ["epsilon", "g", "b", "space", "operator_recipe", "seed"] {
        if !query.contains_key(key) {
            return Err(bad(&format!("query.{key} missing")));
        }
    }
    let bound = v
        .get("bound")
        .and_then(Value::as_object)
        .ok_or_else(|| bad("missing bound"))?;
    for key in ["M", "gamma", "K", "budget_exceeded"] {
        if !bound.contains_key(key) {
            return Err(bad(&format!("bound.{key} missing")));
        }
    }
    let exceeded = bound["budget_exceeded"]
        .as_bool()
        .ok_or_else(|| bad("budget_exceeded not a bool"))?;
    let phi_key = if exceeded { "phi_log10" } else { "phi" };
    if !bound.contains_key(phi_key) {
        return Err(bad(&format!("bound.{phi_key} missing")));
    }
    let result = v
        .get("result")
        .and_then(Value::as_object)
        .ok_or_else(|| bad("missing result"))?;
    if !result
        .get("p_min")
        .is_some_and(|p| p.is_null() || p.is_u64())
    {
        return Err(bad("result.p_min must be null or a natural"));
    }
    for key in ["passed", "near_boundary"] {
        if !result.get(key).is_some_and(Value::is_boolean) {
            return Err(bad(&format!("result.{key} must be a bool")));
        }
    }
    if let Some(trace) = v.get("trace") {
        for key in ["N", "yk_max", "claim_holds"] {
            if trace.get(key).is_none() {
                return Err(bad(&format!("trace.{key} missing")));
            }
        }
    }
    Ok(())
}

/// b from the options, or ‖x‖ rounded up to the grid; never below one grid step.
pub(crate) fn resolve_b(norm_x: f64, b: Option<&BigRational>) -> Result<BigRational> {
    match b {
        Some(b) => {
            if !b.is_positive() {
                return Err(Error::Domain(format!(
                    "b must be positive, got {}",
                    display(b)
                )));
            }
            if to_f64(b) < norm_x - B_TOL {
                return Err(Error::Contract(format!(
                    "b = {} is below ‖x‖ = {norm_x}",
                    display(b)
                )));
            }
            Ok(b.clone())
        }
        None => {
            let b = ceil_to_grid(norm_x, B_GRANULARITY);
            if b.is_zero() {
                Ok(BigRational::new(1.into(), B_GRANULARITY.into()))
            } else {
                Ok(b)
            }
        }
    }
}

pub(crate) fn require_certified(op: &Operator, space: &LpSpace, modulus: &Modulus) -> Result<()> {
    if !op.is_certified() {
        return Err(Error::Contract(format!(
            "operator {} is not certified nonexpansive on {space}",
            op.recipe()
        )));
    }
    if !modulus.is_valid_for(space) {
        return Err(Error::Contract(format!(
            "modulus {modulus} is not valid for {space}"
        )));
    }
    Ok(())
}

/// Computes Φ, searches for the least witness, and compares them exactly.
pub fn verify_theorem(
    space: &LpSpace,
    op: &Operator,
    x: &[f64],
    eps: &BigRational,
    g: &CounterFunction,
    modulus: &Modulus,
    opts: &VerifyOptions,
) -> Result<MetastabilityReport> {
    require_certified(op, space, modulus)?;
    if !eps.is_positive() {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {}",
            display(eps)
        )));
    }
    let norm_x = space.norm(x);
    let b = resolve_b(norm_x, opts.b.as_ref())?;
    let bound = compute_breakdown(eps, &b, modulus, g, opts.refined, opts.digit_budget)?;
    let query = QueryInfo {
        epsilon: display(eps),
        g: g.to_string(),
        b: display(&b),
        space: space.to_string(),
        operator_recipe: serde_json::to_value(op.recipe()).expect("source serializes"),
        seed: None,
    };
    let cap = opts
        .search_limit
        .saturating_add(g.eval_index(opts.search_limit))
        .max(1);
    let mut traj = Trajectory::with_cap(space.clone(), op.clone(), x.to_vec(), cap)?;

    let mut window_diameters = Vec::new();
    let search = if norm_x == 0.0 {
        // Every mean is 0, so the first window is already stable.
        window_diameters.push((1, 0.0));
        WitnessSearch::Found(super::Witness {
            p: 1,
            diameter: 0.0,
            slack: to_f64(eps),
            near_boundary: false,
        })
    } else {
        find_min_witness_sampled(
            &mut traj,
            to_f64(eps),
            g,
            opts.search_limit,
            &mut window_diameters,
        )?
    };

    let (outcome, justification) = match (&search, &bound.phi) {
        (WitnessSearch::Found(w), Phi::Exact(phi)) => {
            if bound.phi.admits(w.p as u64) {
                (Outcome::Passed, None)
            } else {
                (
                    Outcome::Failed,
                    Some(format!("P_min = {} exceeds Φ = {phi}", w.p)),
                )
            }
        }
        (WitnessSearch::Found(w), Phi::BudgetExceeded { log10 }) => (
            Outcome::Passed,
            Some(format!(
                "P_min = {} ≤ search_limit = {} < Φ, which has more than {} digits (log10 Φ ≥ {:.3})",
                w.p, opts.search_limit, opts.digit_budget, log10.lo
            )),
        ),
        (WitnessSearch::NotFound { limit, .. }, _) => (
            Outcome::Inconclusive,
            Some(format!("no stable window with P ≤ {limit}")),
        ),
    };

    Ok(MetastabilityReport {
        query,
        bound,
        search,
        outcome,
        window_diameters,
        justification,
        trace: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;
    use crate::spaces::{NamedOp, OperatorSource};

    fn q(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    fn l2() -> LpSpace {
        LpSpace::with_int_p(2, 2).unwrap()
    }

    #[test]
    fn identity_passes_at_one() {
        let op = Operator::identity(2);
        let r = verify_theorem(
            &l2(),
            &op,
            &[0.5, 0.0],
            &q("1/8"),
            &CounterFunction::identity(),
            &Modulus::hilbert(),
            &VerifyOptions::default(),
        )
        .unwrap();
        assert_eq!(r.p_min(), Some(1));
        assert!(r.passed());
        assert_eq!(r.query.b, "1/2");
    }

    #[test]
    fn neg_identity_example() {
        let op = Operator::named(NamedOp::NegIdentity, 2).unwrap();
        let r = verify_theorem(
            &l2(),
            &op,
            &[1.0, 0.0],
            &q("0.6"),
            &CounterFunction::constant(1),
            &Modulus::hilbert(),
            &VerifyOptions::default(),
        )
        .unwrap();
        assert_eq!(r.p_min(), Some(2));
        assert!(r.passed());
        let direct = compute_breakdown(
            &q("3/5"),
            &q("1"),
            &Modulus::hilbert(),
            &CounterFunction::constant(1),
            true,
            DEFAULT_DIGIT_BUDGET,
        )
        .unwrap();
        assert_eq!(r.bound, direct);
        let json = r.to_json();
        validate_report_json(&json).unwrap();
        let reparsed: Value = serde_json::from_str(&json.to_string()).unwrap();
        assert_eq!(reparsed, json);
        assert_eq!(json["result"]["p_min"], 2);
    }

    #[test]
    fn zero_start_short_circuits() {
        let op = Operator::named(NamedOp::Swap, 2).unwrap();
        let r = verify_theorem(
            &l2(),
            &op,
            &[0.0, 0.0],
            &q("1/4"),
            &CounterFunction::constant(3),
            &Modulus::hilbert(),
            &VerifyOptions::default(),
        )
        .unwrap();
        assert_eq!(r.p_min(), Some(1));
        assert!(r.passed());
    }

    #[test]
    fn budget_exceeded_still_passes_with_justification() {
        let op = Operator::named(NamedOp::NegIdentity, 2).unwrap();
        let opts = VerifyOptions {
            digit_budget: 5,
            ..VerifyOptions::default()
        };
        let r = verify_theorem(
            &l2(),
            &op,
            &[1.0, 0.0],
            &q("0.6"),
            &CounterFunction::constant(1),
            &Modulus::hilbert(),
            &opts,
        )
        .unwrap();
        assert!(r.bound.phi.is_budget_exceeded());
        assert!(r.passed());
        assert!(r.justification.as_deref().unwrap().contains("search_limit"));
        validate_report_json(&r.to_json()).unwrap();
    }

    #[test]
    fn contracts_are_enforced() {
        let space = l2();
        let big = Operator::from_matrix(
            vec![2.0, 0.0, 0.0, 1.0],
            &space,
            OperatorSource::Assembled {
                description: "stretch".into(),
            },
        )
        .unwrap();
        let err = verify_theorem(
            &space,
            &big,
            &[1.0, 0.0],
            &q("1/4"),
            &CounterFunction::constant(1),
            &Modulus::hilbert(),
            &VerifyOptions::default(),
        );
        assert!(matches!(err, Err(Error::Contract(_))));

        let id = Operator::identity(2);
        let small_b = VerifyOptions {
            b: Some(q("1/2")),
            ..VerifyOptions::default()
        };
        let err = verify_theorem(
            &space,
            &id,
            &[1.0, 0.0],
            &q("1/4"),
            &CounterFunction::constant(1),
            &Modulus::hilbert(),
            &small_b,
        );
        assert!(matches!(err, Err(Error::Contract(_))));

        let l3 = LpSpace::with_int_p(2, 3).unwrap();
        let err = verify_theorem(
            &l3,
            &id,
            &[1.0, 0.0],
            &q("1/4"),
            &CounterFunction::constant(1),
            &Modulus::hilbert(),
            &VerifyOptions::default(),
        );
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn larger_b_still_bounds() {
        let op = Operator::named(NamedOp::HalfSwap, 2).unwrap();
        let opts = VerifyOptions {
            b: Some(q("3")),
            ..VerifyOptions::default()
        };
        let r = verify_theorem(
            &l2(),
            &op,
            &[1.0, 0.0],
            &q("1/8"),
            &CounterFunction::identity(),
            &Modulus::hilbert(),
            &opts,
        )
        .unwrap();
        assert!(r.passed());
        assert_eq!(r.query.b, "3");
    }

    #[test]
    fn inconclusive_is_reported() {
        let op = Operator::named(NamedOp::Swap, 2).unwrap();
        let opts = VerifyOptions {
            search_limit: 20,
            ..VerifyOptions::default()
        };
        let r = verify_theorem(
            &l2(),
            &op,
            &[1.0, 0.0],
            &q("1/1000"),
            &CounterFunction::constant(1),
            &Modulus::hilbert(),
            &opts,
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::Inconclusive);
        assert!(!r.passed());
        assert_eq!(r.to_json()["result"]["p_min"], Value::Null);
    }
}
