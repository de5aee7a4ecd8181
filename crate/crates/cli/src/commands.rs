use std::fmt::Write as _;

use anyhow::{anyhow, bail, Result};
use num_rational::BigRational;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use ergostat_core::bounds::{compare, glb_k};
use ergostat_core::moduli::hilbert_clarkson;
use ergostat_core::rational::{display, to_f64};
use ergostat_core::verify::{
    random_sequence, random_start, summary_csv, validate_report_json, verify_batch, Instance,
};
use ergostat_core::{
    agt_phi, compute_breakdown, estimate_clarkson, gen_nonexpansive, glb_ii_bound,
    glb_property_check, hilbert_phi, phi_log_estimate, proof_trace, theta_glb, verify_theorem,
    BoundVariant, Log10Interval, MetastabilityReport, Modulus, Operator, OperatorRecipe, Outcome,
    VerifyOptions,
};

use crate::cli::{
    BoundArgs, Command, Common, CompareArgs, GlbArgs, InstanceArgs, ModulusArgs, TraceArgs,
    VerifyArgs,
};
use crate::output::{csv_field, with_seed_column, Rendered};

/// Process exit status: 0 passed, 1 failed, 2 inconclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Passed,
    Inconclusive,
    Failed,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Passed => 0,
            Status::Failed => 1,
            Status::Inconclusive => 2,
        }
    }

    fn of(ok: bool) -> Self {
        if ok {
            Status::Passed
        } else {
            Status::Failed
        }
    }
}

pub fn run(command: &Command, common: &Common) -> Result<(Rendered, Status)> {
    match command {
        Command::Bound(a) => bound(a, common),
        Command::Verify(a) => match a.trials {
            Some(n) => verify_many(a, n, common),
            None => verify_one(a, common),
        },
        Command::Trace(a) => trace(a, common),
        Command::Glb(a) => glb(a, common),
        Command::Compare(a) => compare_cmd(a, common),
        Command::Modulus(a) => modulus(a, common),
    }
}

fn log10_json(iv: Log10Interval) -> Value {
    let end = |x: f64| {
        if x.is_finite() {
            json!(x)
        } else {
            json!("inf")
        }
    };
    json!([end(iv.lo), end(iv.hi)])
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(dst), Value::Object(src)) = (into, from) {
        dst.extend(src);
    }
}

fn bound(a: &BoundArgs, c: &Common) -> Result<(Rendered, Status)> {
    let variant = if a.closed_form {
        "ours-closed-form".to_string()
    } else {
        a.variant.to_string()
    };
    let mut v = json!({
        "seed": c.seed,
        "variant": variant,
        "epsilon": display(&a.epsilon),
        "b": display(&a.b),
        "modulus": a.modulus.to_string(),
        "g": a.g.to_string(),
        "refined": a.refined,
        "digit_budget": c.digit_budget,
    });
    if a.estimate {
        let iv = phi_log_estimate(&a.epsilon, &a.b, &a.modulus, &a.g, a.refined, a.variant)?;
        v["phi_log10"] = log10_json(iv);
    } else if a.closed_form {
        merge(
            &mut v,
            hilbert_phi(&a.epsilon, &a.b, &a.g, c.digit_budget)?.to_json(),
        );
    } else {
        let part = match a.variant {
            BoundVariant::Ours => compute_breakdown(
                &a.epsilon,
                &a.b,
                &a.modulus,
                &a.g,
                a.refined,
                c.digit_budget,
            )?
            .to_json(),
            BoundVariant::AgtGeneral | BoundVariant::AgtIsometry => {
                let iso = a.variant == BoundVariant::AgtIsometry;
                agt_phi(&a.epsilon, &a.b, &a.g, iso, c.digit_budget)?.to_json()
            }
        };
        merge(&mut v, part);
    }
    Ok((Rendered::doc(v), Status::Passed))
}

struct Built {
    op: Operator,
    x: Vec<f64>,
    eps: BigRational,
    modulus: Modulus,
}

fn build(ia: &InstanceArgs, seed: u64) -> Result<Built> {
    let space = &ia.space;
    let eps = ia
        .epsilon
        .clone()
        .ok_or_else(|| anyhow!("--epsilon is required"))?;
    let op = if let Some(name) = ia.op {
        Operator::named(name, space.dim())?
    } else if let Some(path) = &ia.op_csv {
        Operator::from_csv(path, space)?
    } else {
        let recipe = ia.op_recipe.unwrap_or_else(|| OperatorRecipe::new(seed, 2));
        gen_nonexpansive(space, &recipe)
    };
    let x = match &ia.x {
        Some(x) => x.clone(),
        None => random_start(space, &mut ChaCha8Rng::seed_from_u64(seed)),
    };
    if x.len() != space.dim() {
        bail!(
            "--x has {} coordinates but {} has dimension {}",
            x.len(),
            space,
            space.dim()
        );
    }
    let modulus = ia
        .modulus
        .clone()
        .unwrap_or_else(|| Modulus::for_space(space));
    Ok(Built {
        op,
        x,
        eps,
        modulus,
    })
}

fn options(
    ia: &InstanceArgs,
    search_limit: usize,
    trace_limit: usize,
    c: &Common,
) -> VerifyOptions {
    VerifyOptions {
        refined: ia.refined,
        b: ia.b.clone(),
        search_limit,
        trace_limit,
        digit_budget: c.digit_budget,
    }
}

fn outcome_status(o: Outcome) -> Status {
    match o {
        Outcome::Passed => Status::Passed,
        Outcome::Failed => Status::Failed,
        Outcome::Inconclusive => Status::Inconclusive,
    }
}

const SUMMARY_HEADER: &str = "seed,p,d,epsilon,g,P_min,log10_phi,passed";

fn summary_row(seed: u64, ia: &InstanceArgs, r: &MetastabilityReport) -> String {
    format!(
        "{},{},{},{},{},{},{:.6},{}\n",
        seed,
        display(ia.space.p()),
        ia.space.dim(),
        r.query.epsilon,
        csv_field(&r.query.g),
        r.p_min().map_or("NA".to_string(), |p| p.to_string()),
        r.bound.phi.log10().lo,
        r.passed()
    )
}

fn verify_one(a: &VerifyArgs, c: &Common) -> Result<(Rendered, Status)> {
    let ia = &a.instance;
    let built = build(ia, c.seed)?;
    let opts = options(ia, a.search_limit, a.trace_limit, c);
    let mut report = verify_theorem(
        &ia.space,
        &built.op,
        &built.x,
        &built.eps,
        &ia.g,
        &built.modulus,
        &opts,
    )?;
    report.query.seed = Some(c.seed);
    let mut status = outcome_status(report.outcome);
    if a.trace {
        let t = proof_trace(
            &ia.space,
            &built.op,
            &built.x,
            &built.eps,
            &ia.g,
            &built.modulus,
            &opts,
        )?;
        if !t.passed() {
            status = status.max(if t.truncated {
                Status::Inconclusive
            } else {
                Status::Failed
            });
        }
        report.trace = Some(t);
    }
    let v = report.to_json();
    validate_report_json(&v)?;
    let csv = format!("{SUMMARY_HEADER}\n{}", summary_row(c.seed, ia, &report));
    Ok((Rendered::table(v, csv), status))
}

fn verify_many(a: &VerifyArgs, trials: usize, c: &Common) -> Result<(Rendered, Status)> {
    let instances: Vec<Instance> = (0..trials as u64)
        .map(|i| Instance::random(c.seed.wrapping_add(i)))
        .collect();
    let opts = options(&a.instance, a.search_limit, a.trace_limit, c);
    let results = verify_batch(&instances, &opts, c.threads)?;

    let (mut passed, mut failed, mut inconclusive, mut errors) = (0, 0, 0, 0);
    let mut reports = Vec::with_capacity(results.len());
    for r in &results {
        match &r.report {
            Ok(rep) => {
                match rep.outcome {
                    Outcome::Passed => passed += 1,
                    Outcome::Failed => failed += 1,
                    Outcome::Inconclusive => inconclusive += 1,
                }
                let v = rep.to_json();
                validate_report_json(&v)?;
                reports.push(v);
            }
            Err(e) => {
                errors += 1;
                reports.push(json!({"seed": r.instance.seed, "error": e.to_string()}));
            }
        }
    }
    let status = if failed + errors > 0 {
        Status::Failed
    } else if inconclusive > 0 {
        Status::Inconclusive
    } else {
        Status::Passed
    };
    let v = json!({
        "seed": c.seed,
        "trials": trials,
        "passed": passed,
        "failed": failed,
        "inconclusive": inconclusive,
        "errors": errors,
        "reports": reports,
    });
    Ok((Rendered::table(v, summary_csv(&results)), status))
}

fn trace(a: &TraceArgs, c: &Common) -> Result<(Rendered, Status)> {
    let ia = &a.instance;
    let built = build(ia, c.seed)?;
    let opts = options(ia, 0, a.trace_limit, c);
    let t = proof_trace(
        &ia.space,
        &built.op,
        &built.x,
        &built.eps,
        &ia.g,
        &built.modulus,
        &opts,
    )?;
    let status = if t.passed() {
        Status::Passed
    } else if t.truncated {
        Status::Inconclusive
    } else {
        Status::Failed
    };
    let v = json!({
        "seed": c.seed,
        "query": {
            "space": ia.space.to_string(),
            "operator": built.op.recipe().to_string(),
            "epsilon": display(&built.eps),
            "g": ia.g.to_string(),
            "modulus": built.modulus.to_string(),
            "refined": ia.refined,
        },
        "passed": t.passed(),
        "trace": serde_json::to_value(&t)?,
    });
    Ok((Rendered::doc(v), status))
}

fn glb(a: &GlbArgs, c: &Common) -> Result<(Rendered, Status)> {
    let k = glb_k(&a.b, &a.epsilon)?;
    let theta = theta_glb(&a.b, &a.epsilon, &a.g, c.digit_budget)?;
    let h_k = glb_ii_bound(&a.b, &a.epsilon, &a.g, c.digit_budget)?;
    let mut v = json!({
        "seed": c.seed,
        "epsilon": display(&a.epsilon),
        "b": display(&a.b),
        "g": a.g.to_string(),
        "K": k.to_string(),
        "theta": theta.to_string(),
        "h_K": h_k.to_string(),
    });
    let mut status = Status::Passed;
    if a.trials > 0 {
        let b = to_f64(&a.b);
        let stats = glb_property_check(
            |rng, len| random_sequence(rng, len, b),
            &a.b,
            &a.epsilon,
            &a.g,
            a.trials,
            c.seed,
        )?;
        status = Status::of(stats.all_passed());
        v["check"] = serde_json::to_value(&stats)?;
    }
    Ok((Rendered::doc(v), status))
}

fn compare_cmd(a: &CompareArgs, c: &Common) -> Result<(Rendered, Status)> {
    let rows = compare::compare_grid(&a.ratios, &a.gs, c.digit_budget)?;
    let wins = rows
        .iter()
        .all(|r| r.ours_beats_isometry() && r.ours_beats_general() != Some(false));
    let cell = |cell: &compare::CompareCell| {
        let mut v = cell.phi.to_json();
        v["log10"] = log10_json(cell.log10());
        v
    };
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "b_over_eps": display(&r.ratio),
                "g": r.g,
                "ours": cell(&r.ours),
                "agt_isometry": cell(&r.agt_isometry),
                "agt_general": cell(&r.agt_general),
                "ours_beats_iso": r.ours_beats_isometry(),
                "ours_beats_gen": r.ours_beats_general(),
            })
        })
        .collect();
    let v = json!({
        "seed": c.seed,
        "epsilon": "1",
        "digit_budget": c.digit_budget,
        "ours_wins": wins,
        "rows": json_rows,
    });
    let csv = with_seed_column(&compare::to_csv(&rows), c.seed);
    Ok((Rendered::table(v, csv), Status::of(wins)))
}

fn modulus(a: &ModulusArgs, c: &Common) -> Result<(Rendered, Status)> {
    let m = a
        .modulus
        .clone()
        .unwrap_or_else(|| Modulus::for_space(&a.space));
    if !m.is_valid_for(&a.space) {
        bail!("modulus {m} is not valid for {}", a.space);
    }
    let mut csv = String::from("seed,epsilon,delta_estimate,eta,delta_closed_form,dominates\n");
    let mut rows = Vec::with_capacity(a.epsilon.len());
    let mut all = true;
    for &eps in &a.epsilon {
        let est = estimate_clarkson(&a.space, eps, a.samples, c.seed)?;
        let eta = m.eval_f64(eps);
        let closed = a.space.is_hilbert().then(|| hilbert_clarkson(eps));
        // The sampled infimum can only overestimate δ, and δ ≥ η.
        let ok = est >= eta - 1e-12;
        all &= ok;
        let _ = writeln!(
            csv,
            "{},{},{:.12},{:.12},{},{}",
            c.seed,
            eps,
            est,
            eta,
            closed.map_or("NA".to_string(), |d| format!("{d:.12}")),
            ok
        );
        rows.push(json!({
            "epsilon": eps,
            "delta_estimate": est,
            "eta": eta,
            "delta_closed_form": closed,
            "dominates": ok,
        }));
    }
    let v = json!({
        "seed": c.seed,
        "space": a.space.to_string(),
        "modulus": m.to_string(),
        "samples": a.samples,
        "rows": rows,
    });
    Ok((Rendered::table(v, csv), Status::of(all)))
}
