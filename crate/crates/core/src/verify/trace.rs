use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use super::theorem::{require_certified, resolve_b, VerifyOptions};
use super::NEAR_BOUNDARY;
use crate::bounds::{bound_parameters, compute_breakdown, CounterFunction};
use crate::ergodic::CesaroStream;
use crate::error::{Error, Result};
use crate::moduli::Modulus;
use crate::rational::{display, to_f64};
use crate::spaces::{LpSpace, Operator};

/// Slack granted to the claim y_k ≤ ε/8 and to the sampled distance bounds.
pub const TRACE_TOL: f64 = 1e-9;

/// Windows shorter than this are buffered for an exhaustive pair scan when
/// the radius test cannot decide them.
const WINDOW_BUFFER: usize = 4096;

/// Prefix minima of ‖x_m‖ are tabulated up to this index.
const PREFIX_TABLE: usize = 1 << 22;

/// Every quantity of the proof, instantiated on one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProofTrace {
    pub m: String,
    pub gamma: String,
    pub b: String,
    /// Least N with ‖x_N‖ ≤ ‖x_m‖ + γ for all m ≤ h(N); `None` if truncated.
    pub n: Option<usize>,
    pub h_n: Option<usize>,
    pub glb_holds: bool,
    /// min over m ≤ h(N) of ‖x_m‖ + γ − ‖x_N‖.
    pub glb_slack: f64,
    /// ⌊h(N)/(2N)⌋.
    pub k_max: usize,
    pub yk_max: f64,
    pub claim_holds: bool,
    /// Number of (m, i) pairs checked and the smallest slack seen.
    pub ineq17_checked: usize,
    pub ineq17_min_slack: f64,
    pub ineq17_holds: bool,
    pub p: Option<usize>,
    /// Exact when the window needed a pair scan, otherwise the bound that
    /// decided it.
    pub window_diameter: f64,
    pub window_ok: bool,
    /// N ≤ h̃^K(1); `None` when not decided.
    pub n_within_bound: Option<bool>,
    /// Largest index of the sequence evaluated.
    pub scanned: usize,
    /// The N-scan hit `trace_limit`.
    pub truncated: bool,
}

impl ProofTrace {
    pub fn passed(&self) -> bool {
        !self.truncated
            && self.glb_holds
            && self.claim_holds
            && self.ineq17_holds
            && self.window_ok
            && self.n_within_bound != Some(false)
    }
}

fn h_of(m: usize, g: &CounterFunction, n: usize) -> Option<usize> {
    let mn = m.checked_mul(n)?;
    let gv = g.eval(&BigUint::from(mn)).to_usize()?;
    mn.checked_add(gv)?.checked_mul(2)
}

fn buf_fill(buf: &mut Vec<f64>, d: usize) -> &mut [f64] {
    buf.resize(d, 0.0);
    buf
}

fn dist(space: &LpSpace, a: &[f64], b: &[f64], buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(a.iter().zip(b).map(|(p, q)| p - q));
    space.norm(buf)
}

/// min_{m ≤ q} ‖x_m‖ from a stream running ahead of the N-scan, tracked as
/// p-th powers.
struct PrefixMin<'a> {
    space: &'a LpSpace,
    op: &'a Operator,
    x: &'a [f64],
    stream: CesaroStream,
    min: f64,
    table: Vec<f64>,
}

impl<'a> PrefixMin<'a> {
    fn new(space: &'a LpSpace, op: &'a Operator, x: &'a [f64]) -> Result<Self> {
        let min = space.norm_pow(x);
        Ok(Self {
            space,
            op,
            x,
            stream: CesaroStream::new(op, x)?,
            min,
            table: vec![min],
        })
    }

    fn at(&mut self, q: usize) -> Result<f64> {
        let pow = self.pow_at(q)?;
        Ok(self.space.pow_to_norm(pow))
    }

    fn pow_at(&mut self, q: usize) -> Result<f64> {
        while self.stream.index() < q {
            self.stream.advance();
            self.min = self.min.min(self.space.norm_pow(self.stream.mean()));
            if self.stream.index() <= PREFIX_TABLE {
                self.table.push(self.min);
            }
        }
        if q == self.stream.index() {
            return Ok(self.min);
        }
        if q <= self.table.len() {
            return Ok(self.table[q - 1]);
        }
        // h went backwards past the table: replay from the start.
        let mut s = CesaroStream::new(self.op, self.x)?;
        let mut min = self.space.norm_pow(self.x);
        while s.index() < q {
            s.advance();
            min = min.min(self.space.norm_pow(s.mean()));
        }
        Ok(min)
    }
}

/// Kahan-compensated running sum of vectors.
struct BlockSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl BlockSum {
    fn new(d: usize) -> Self {
        Self {
            sum: vec![0.0; d],
            comp: vec![0.0; d],
        }
    }

    fn add(&mut self, v: &[f64]) {
        for ((s, c), x) in self.sum.iter_mut().zip(&mut self.comp).zip(v) {
            let y = x - *c;
            let t = *s + y;
            *c = (t - *s) - y;
            *s = t;
        }
    }

    fn reset(&mut self) {
        self.sum.fill(0.0);
        self.comp.fill(0.0);
    }
}

/// Replays the proof on the trajectory of x: the witness N of the
/// greatest-lower-bound lemma for (‖x_n‖) with γ and h, the claim
/// y_k = ‖T^{kN}x_N − x_N‖ ≤ ε/8 for k ≤ ⌊h(N)/(2N)⌋, the bound
/// ‖x_{mN+i} − x_N‖ ≤ 2b/m + ε/8, and the window at P = M·N.
///
/// The means are streamed, so memory stays O(d) apart from a bounded table
/// of prefix minima; `opts.trace_limit` caps the largest index evaluated.
pub fn proof_trace(
    space: &LpSpace,
    op: &Operator,
    x: &[f64],
    eps: &BigRational,
    g: &CounterFunction,
    modulus: &Modulus,
    opts: &VerifyOptions,
) -> Result<ProofTrace> {
    require_certified(op, space, modulus)?;
    if x.len() != space.dim() {
        return Err(Error::Dimension {
            expected: space.dim(),
            got: x.len(),
        });
    }
    let norm_x = space.norm(x);
    let b = resolve_b(norm_x, opts.b.as_ref())?;
    let (m_big, gamma, _) = bound_parameters(eps, &b, modulus, opts.refined)?;
    let m = m_big
        .to_usize()
        .ok_or_else(|| Error::Domain(format!("M = {m_big} exceeds a machine index")))?;
    let gamma_f = to_f64(&gamma);
    let eps_f = to_f64(eps);
    let b_f = to_f64(&b);

    let mut trace = ProofTrace {
        m: m_big.to_string(),
        gamma: display(&gamma),
        b: display(&b),
        n: None,
        h_n: None,
        glb_holds: false,
        glb_slack: f64::NAN,
        k_max: 0,
        yk_max: 0.0,
        claim_holds: false,
        ineq17_checked: 0,
        ineq17_min_slack: f64::INFINITY,
        ineq17_holds: false,
        p: None,
        window_diameter: f64::NAN,
        window_ok: false,
        n_within_bound: None,
        scanned: 1,
        truncated: false,
    };

    // Least N with ‖x_N‖ ≤ min_{1 ≤ m ≤ h(N)} ‖x_m‖ + γ.
    let limit = opts.trace_limit.max(1);
    let mut cand = CesaroStream::new(op, x)?;
    let mut lead = PrefixMin::new(space, op, x)?;
    let found = loop {
        let n = cand.index();
        let Some(hn) = h_of(m, g, n).filter(|&hn| hn <= limit) else {
            break None;
        };
        let slack = lead.at(hn)? + gamma_f - space.norm(cand.mean());
        if slack >= 0.0 {
            break Some((hn, slack));
        }
        cand.advance();
    };
    trace.scanned = lead.stream.index();
    let Some((hn, slack)) = found else {
        trace.truncated = true;
        return Ok(trace);
    };
    let n = cand.index();
    trace.n = Some(n);
    trace.h_n = Some(hn);
    trace.glb_holds = true;
    trace.glb_slack = slack;

    let xn = cand.mean().to_vec();
    let d = xn.len();
    let mut buf = Vec::with_capacity(d);

    // One pass from N covers three checks, all ending by h(N):
    //  - y_k = ‖T^{kN}x_N − x_N‖ for 1 ≤ k ≤ ⌊h(N)/(2N)⌋, where
    //    T^{kN}x_N = (1/N)·Σ_{i<N} T^{kN+i}x is summed from the stream's powers;
    //  - ‖x_{mN+i} − x_N‖ ≤ 2b/m + ε/8 for 0 < m ≤ k_max, 0 ≤ i < N;
    //  - the radius of the window [P, P + g(P)] about x_P, P = M·N.
    // Distances are compared as p-th powers and rooted once per block.
    let k_max = hn / (2 * n);
    trace.k_max = k_max;
    let p = m * n;
    let w = g.eval_index(p);
    let win_end = p + w;
    let end = win_end.max(k_max * n + n - 1);
    let keep = w < WINDOW_BUFFER;
    let mut window: Vec<Vec<f64>> = Vec::new();
    let mut xp: Vec<f64> = Vec::new();
    let mut radius_pow: f64 = 0.0;
    let mut block = BlockSum::new(d);
    let mut yk_max: f64 = 0.0;
    let mut block_max_pow: f64 = 0.0;
    let mut min_slack = f64::INFINITY;
    let mut checked = 0;
    let mut s = cand.clone();
    loop {
        let idx = s.index();
        let (mm, i) = (idx / n, idx % n);
        if (1..=k_max).contains(&mm) {
            block.add(s.power());
            for (o, (a, c)) in buf_fill(&mut buf, d)
                .iter_mut()
                .zip(s.mean().iter().zip(&xn))
            {
                *o = a - c;
            }
            block_max_pow = block_max_pow.max(space.norm_pow(&buf));
            checked += 1;
            if i == n - 1 {
                let nf = n as f64;
                for (o, (sum, c)) in buf.iter_mut().zip(block.sum.iter().zip(&xn)) {
                    *o = sum / nf - c;
                }
                yk_max = yk_max.max(space.norm(&buf));
                block.reset();
                let rhs = 2.0 * b_f / mm as f64 + eps_f / 8.0;
                min_slack = min_slack.min(rhs - space.pow_to_norm(block_max_pow));
                block_max_pow = 0.0;
            }
        }
        if idx == p {
            xp = s.mean().to_vec();
        } else if idx > p && idx <= win_end {
            for (o, (a, c)) in buf_fill(&mut buf, d)
                .iter_mut()
                .zip(s.mean().iter().zip(&xp))
            {
                *o = a - c;
            }
            radius_pow = radius_pow.max(space.norm_pow(&buf));
        }
        if keep && idx >= p && idx <= win_end {
            window.push(s.mean().to_vec());
        }
        if idx >= end {
            break;
        }
        s.advance();
    }
    trace.scanned = trace.scanned.max(end);
    trace.yk_max = yk_max;
    trace.claim_holds = yk_max <= eps_f / 8.0 + TRACE_TOL;
    trace.ineq17_checked = checked;
    trace.ineq17_min_slack = min_slack;
    trace.ineq17_holds = min_slack >= -TRACE_TOL;
    let radius = space.pow_to_norm(radius_pow);

    // The diameter lies in [r, 2r] for the radius r about x_P.
    trace.p = Some(p);
    let (diameter, ok) = if radius >= eps_f {
        (radius, false)
    } else if 2.0 * radius < eps_f - NEAR_BOUNDARY {
        (2.0 * radius, true)
    } else if keep {
        let mut d = radius;
        for (i, a) in window.iter().enumerate() {
            for c in &window[i + 1..] {
                d = d.max(dist(space, a, c, &mut buf));
            }
        }
        (d, d < eps_f)
    } else {
        // Undecided and too long to scan: not counted as a pass.
        (2.0 * radius, false)
    };
    trace.window_diameter = diameter;
    trace.window_ok = ok;

    let bound = compute_breakdown(eps, &b, modulus, g, opts.refined, opts.digit_budget)?;
    trace.n_within_bound = Some(bound.phi.admits(p as u64));
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::Trajectory;
    use crate::rational::parse_rational;
    use crate::spaces::{gen_nonexpansive, NamedOp, OperatorRecipe};
    use crate::verify::window_diameter;

    fn q(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn identity_trace() {
        let space = LpSpace::with_int_p(3, 2).unwrap();
        let op = Operator::identity(3);
        let t = proof_trace(
            &space,
            &op,
            &[0.5, 0.0, 0.0],
            &q("1/4"),
            &CounterFunction::identity(),
            &Modulus::hilbert(),
            &VerifyOptions::default(),
        )
        .unwrap();
        assert_eq!(t.n, Some(1));
        assert_eq!(t.yk_max, 0.0);
        assert!(t.passed(), "{t:?}");
    }

    #[test]
    fn neg_identity_trace() {
        let space = LpSpace::with_int_p(2, 2).unwrap();
        let op = Operator::named(NamedOp::NegIdentity, 2).unwrap();
        let opts = VerifyOptions {
            b: Some(q("1")),
            ..VerifyOptions::default()
        };
        let t = proof_trace(
            &space,
            &op,
            &[1.0, 0.0],
            &q("8"),
            &CounterFunction::constant(1),
            &Modulus::hilbert(),
            &opts,
        )
        .unwrap();
        assert_eq!(t.n, Some(2));
        assert_eq!(t.p, Some(4));
        assert!(t.window_diameter < 1.0);
        assert!(t.ineq17_min_slack > 1.0);
        assert!(t.passed(), "{t:?}");
    }

    #[test]
    fn truncation_is_marked() {
        let space = LpSpace::with_int_p(2, 2).unwrap();
        let op = Operator::named(NamedOp::Swap, 2).unwrap();
        let opts = VerifyOptions {
            trace_limit: 50,
            ..VerifyOptions::default()
        };
        let t = proof_trace(
            &space,
            &op,
            &[1.0, 0.0],
            &q("1/4"),
            &CounterFunction::constant(1),
            &Modulus::hilbert(),
            &opts,
        )
        .unwrap();
        assert!(t.truncated);
        assert!(!t.passed());
        assert_eq!(t.n, None);
    }

    /// Replays the trace on a fully cached trajectory.
    #[allow(clippy::too_many_arguments)]
    fn naive(
        space: &LpSpace,
        op: &Operator,
        x: &[f64],
        eps: f64,
        m: usize,
        gamma: f64,
        b: f64,
        g: &CounterFunction,
    ) -> (usize, f64, f64, f64) {
        let mut traj = Trajectory::new(space.clone(), op.clone(), x.to_vec()).unwrap();
        let n = (1..)
            .find(|&n| {
                let hn = h_of(m, g, n).unwrap();
                traj.extend_to(hn).unwrap();
                let min = traj.norms()[..hn]
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                traj.norms()[n - 1] <= min + gamma
            })
            .unwrap();
        let hn = h_of(m, g, n).unwrap();
        let k_max = hn / (2 * n);
        let xn = traj.mean(n).to_vec();
        let mut yk: f64 = 0.0;
        let mut slack = f64::INFINITY;
        for k in 1..=k_max {
            let v = traj.apply_power(&xn, k * n);
            let diff: Vec<f64> = v.iter().zip(&xn).map(|(a, c)| a - c).collect();
            yk = yk.max(space.norm(&diff));
            for i in 0..n {
                slack = slack.min(2.0 * b / k as f64 + eps / 8.0 - traj.distance(k * n + i, n));
            }
        }
        let p = m * n;
        let diam = window_diameter(&mut traj, p, g.eval_index(p)).unwrap();
        (n, yk, slack, diam)
    }

    #[test]
    fn streamed_trace_matches_cached_oracle() {
        for (seed, p, d) in [(1u64, 2u32, 3usize), (2, 3, 2), (3, 2, 5), (4, 4, 1)] {
            let space = LpSpace::with_int_p(d, p).unwrap();
            let op = gen_nonexpansive(&space, &OperatorRecipe::new(seed, 2));
            let x: Vec<f64> = (0..d).map(|i| 0.6 / (i + 1) as f64).collect();
            let g = CounterFunction::constant(1);
            let opts = VerifyOptions {
                b: Some(q("1")),
                ..VerifyOptions::default()
            };
            let eps = q("4");
            let t = proof_trace(
                &space,
                &op,
                &x,
                &eps,
                &g,
                &Modulus::for_space(&space),
                &opts,
            )
            .unwrap();
            let m: usize = t.m.parse().unwrap();
            let gamma = to_f64(&parse_rational(&t.gamma).unwrap());
            let (n, yk, slack, diam) = naive(&space, &op, &x, 4.0, m, gamma, 1.0, &g);
            assert_eq!(t.n, Some(n), "seed {seed}");
            assert!(
                (t.yk_max - yk).abs() < 1e-12,
                "seed {seed}: {} vs {yk}",
                t.yk_max
            );
            assert!((t.ineq17_min_slack - slack).abs() < 1e-12, "seed {seed}");
            assert!(diam <= t.window_diameter + 1e-15, "seed {seed}");
            assert_eq!(t.window_ok, diam < 4.0);
        }
    }

    #[test]
    fn random_hilbert_traces() {
        let space = LpSpace::with_int_p(4, 2).unwrap();
        for seed in 0..4 {
            let op = gen_nonexpansive(&space, &OperatorRecipe::new(seed, 2));
            let t = proof_trace(
                &space,
                &op,
                &[0.5, -0.5, 0.25, 0.1],
                &q("1/2"),
                &CounterFunction::constant(1),
                &Modulus::hilbert(),
                &VerifyOptions::default(),
            )
            .unwrap();
            assert!(t.passed(), "seed {seed}: {t:?}");
        }
    }
}
