use std::fmt::Write as _;

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::theorem::{verify_theorem, MetastabilityReport, VerifyOptions};
use crate::bounds::CounterFunction;
use crate::error::{Error, Result};
use crate::moduli::Modulus;
use crate::rational::display;
use crate::spaces::{gen_nonexpansive, LpSpace, Operator, OperatorRecipe};

/// One randomized verification problem, reproducible from its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub seed: u64,
    pub space: LpSpace,
    pub recipe: OperatorRecipe,
    pub x: Vec<f64>,
    pub eps: BigRational,
    pub g: CounterFunction,
    pub modulus: Modulus,
}

impl Instance {
    /// p ∈ {2, 3, 4}, d ≤ 8, a by-construction operator, 0 < ‖x‖ ≤ 1,
    /// ε ∈ {1/4, 1/8}, g ∈ {const 1, n}.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = *[2u32, 3, 4].choose(&mut rng).expect("nonempty");
        let d = rng.gen_range(1..=8);
        let space = LpSpace::with_int_p(d, p).expect("valid space");
        let recipe = OperatorRecipe::new(rng.gen(), rng.gen_range(1..=3));
        let eps = BigRational::new(
            1.into(),
            [4, 8].choose(&mut rng).copied().expect("nonempty").into(),
        );
        let g = if rng.gen_bool(0.5) {
            CounterFunction::constant(1)
        } else {
            CounterFunction::identity()
        };
        let x = random_start(&space, &mut rng);
        let modulus = Modulus::for_space(&space);
        Self {
            seed,
            space,
            recipe,
            x,
            eps,
            g,
            modulus,
        }
    }

    pub fn operator(&self) -> Operator {
        gen_nonexpansive(&self.space, &self.recipe)
    }
}

/// Gaussian direction scaled to a norm uniform in [1/10, 1].
pub fn random_start(space: &LpSpace, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..space.dim())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let n = space.norm(&v);
        if n > 0.0 {
            // Shrink slightly so rounding cannot push the norm past the target.
            let target = rng.gen_range(0.1..=1.0) * (1.0 - 1e-12);
            return v.iter().map(|c| c * target / n).collect();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceResult {
    pub instance: Instance,
    pub report: std::result::Result<MetastabilityReport, Error>,
}

impl InstanceResult {
    pub fn passed(&self) -> bool {
        self.report.as_ref().is_ok_and(MetastabilityReport::passed)
    }
}

/// Verifies every instance, in parallel when `threads` allows, returning
/// results in input order.
pub fn verify_batch(
    instances: &[Instance],
    opts: &VerifyOptions,
    threads: Option<usize>,
) -> Result<Vec<InstanceResult>> {
    let run = || {
        instances
            .par_iter()
            .map(|inst| {
                let report = verify_theorem(
                    &inst.space,
                    &inst.operator(),
                    &inst.x,
                    &inst.eps,
                    &inst.g,
                    &inst.modulus,
                    opts,
                )
                .map(|mut r| {
                    r.query.seed = Some(inst.seed);
                    r
                });
                InstanceResult {
                    instance: inst.clone(),
                    report,
                }
            })
            .collect::<Vec<_>>()
    };
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Domain(format!("cannot build a pool of {n} threads: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

/// `seed,p,d,epsilon,g,P_min,log10_phi,passed`, one row per instance.
pub fn summary_csv(results: &[InstanceResult]) -> String {
    let mut out = String::from("seed,p,d,epsilon,g,P_min,log10_phi,passed\n");
    for r in results {
        let inst = &r.instance;
        let (p_min, log_phi) = match &r.report {
            Ok(rep) => (
                rep.p_min().map_or("NA".to_string(), |p| p.to_string()),
                format!("{:.6}", rep.bound.phi.log10().lo),
            ),
            Err(_) => ("NA".to_string(), "NA".to_string()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            inst.seed,
            display(inst.space.p()),
            inst.space.dim(),
            display(&inst.eps),
            inst.g,
            p_min,
            log_phi,
            r.passed()
        );
    }
    out
}
