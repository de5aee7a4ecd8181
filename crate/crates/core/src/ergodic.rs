//! Cesàro means x_n = (1/n)·Σ_{i<n} Tⁱx of a nonexpansive linear operator.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spaces::{LpSpace, Operator};

/// Default largest index a trajectory may reach.
pub const DEFAULT_CAP: usize = 1_000_000;

/// Recurrence versus compensated direct summation at n = 2^k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub n: usize,
    /// ‖x_n(recurrence) − x_n(direct)‖ / max(‖x‖, tiny).
    pub residual: f64,
}

/// Append-only cache of x_1, …, x_len driven by one application of T per step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    space: LpSpace,
    op: Operator,
    start: Vec<f64>,
    start_norm: f64,
    /// x_1..x_len, row-major.
    cache: Vec<f64>,
    norms: Vec<f64>,
    /// T^len x.
    power: Vec<f64>,
    /// Σ_{i<len} Tⁱx with its Kahan compensation.
    sum: Vec<f64>,
    comp: Vec<f64>,
    cap: usize,
    checkpoints: Vec<Checkpoint>,
    scratch: Vec<f64>,
}

impl Trajectory {
    pub fn new(space: LpSpace, op: Operator, x: Vec<f64>) -> Result<Self> {
        Self::with_cap(space, op, x, DEFAULT_CAP)
    }

    pub fn with_cap(space: LpSpace, op: Operator, x: Vec<f64>, cap: usize) -> Result<Self> {
        let d = space.dim();
        if op.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                got: op.dim(),
            });
        }
        if x.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: x.len(),
            });
        }
        if cap == 0 {
            return Err(Error::Domain("trajectory cap must be at least 1".into()));
        }
        let start_norm = space.norm(&x);
        let power = op.apply(&x)?;
        let mut t = Self {
            space,
            op,
            start_norm,
            cache: x.clone(),
            norms: vec![start_norm],
            power,
            sum: x.clone(),
            comp: vec![0.0; d],
            start: x,
            cap,
            checkpoints: Vec::new(),
            scratch: vec![0.0; d],
        };
        t.log_checkpoint();
        Ok(t)
    }

    pub fn space(&self) -> &LpSpace {
        &self.space
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    /// ‖x‖.
    pub fn start_norm(&self) -> f64 {
        self.start_norm
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Number of cached means.
    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn checkpoints(&self) -> &[Checkpoint] {
        &self.checkpoints
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Domain("Cesàro indices start at 1".into()));
        }
        if n > self.cap {
            return Err(Error::CapExceeded {
                requested: n,
                cap: self.cap,
            });
        }
        Ok(())
    }

    /// Extends the cache through x_n.
    pub fn extend_to(&mut self, n: usize) -> Result<()> {
        self.check_index(n)?;
        let d = self.dim();
        self.cache.reserve(n.saturating_sub(self.len()) * d);
        while self.len() < n {
            let len = self.len();
            let prev = &self.cache[(len - 1) * d..len * d];
            let mut next = vec![0.0; d];
            cesaro_step(prev, &self.power, len, &mut next);
            for i in 0..d {
                let y = self.power[i] - self.comp[i];
                let t = self.sum[i] + y;
                self.comp[i] = (t - self.sum[i]) - y;
                self.sum[i] = t;
            }
            self.norms.push(self.space.norm(&next));
            self.cache.extend_from_slice(&next);
            self.op.apply_into(&self.power, &mut self.scratch);
            flush_subnormal(&mut self.scratch);
            std::mem::swap(&mut self.power, &mut self.scratch);
            if (len + 1).is_power_of_two() {
                self.log_checkpoint();
            }
        }
        Ok(())
    }

    fn log_checkpoint(&mut self) {
        let n = self.len();
        let d = self.dim();
        let direct: Vec<f64> = self.sum.iter().map(|s| s / n as f64).collect();
        let diff: Vec<f64> = self.cache[(n - 1) * d..]
            .iter()
            .zip(&direct)
            .map(|(a, b)| a - b)
            .collect();
        let residual = self.space.norm(&diff) / self.start_norm.max(f64::MIN_POSITIVE);
        self.checkpoints.push(Checkpoint { n, residual });
    }

    /// x_n, extending the cache as needed.
    pub fn cesaro(&mut self, n: usize) -> Result<&[f64]> {
        self.extend_to(n)?;
        Ok(self.mean(n))
    }

    /// x_n for an already cached n.
    pub fn mean(&self, n: usize) -> &[f64] {
        let d = self.dim();
        &self.cache[(n - 1) * d..n * d]
    }

    /// ‖x_n‖, extending the cache as needed.
    pub fn norm_at(&mut self, n: usize) -> Result<f64> {
        self.extend_to(n)?;
        Ok(self.norms[n - 1])
    }

    /// ‖x_1‖, …, ‖x_len‖.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// ‖x_i − x_j‖ for cached i, j.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let a = self.mean(i);
        let b = self.mean(j);
        let diff: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
        self.space.norm(&diff)
    }

    /// T^times v by repeated application.
    pub fn apply_power(&self, v: &[f64], times: usize) -> Vec<f64> {
        let mut cur = v.to_vec();
        let mut next = vec![0.0; v.len()];
        for _ in 0..times {
            self.op.apply_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Residuals of the three Cesàro identities and slacks of the two
    /// nonexpansive inequalities at (n, k).
    pub fn lemma33_residuals(&mut self, n: usize, k: usize) -> Result<Lemma33> {
        if n == 0 || k == 0 {
            return Err(Error::Domain("n and k must be at least 1".into()));
        }
        let need = n.checked_mul(2 * k).ok_or(Error::CapExceeded {
            requested: usize::MAX,
            cap: self.cap,
        })?;
        self.extend_to(need.max(n + k))?;
        let d = self.dim();
        let scale = self.start_norm.max(f64::MIN_POSITIVE);
        let xn = self.mean(n).to_vec();
        let nf = n as f64;
        let kf = k as f64;

        // x_{n+k} = n/(n+k)·x_n + 1/(n+k)·Σ_{i<k} T^{n+i}x
        let mut p = self.apply_power(&self.start, n);
        let mut rhs7: Vec<f64> = xn.iter().map(|v| nf / (nf + kf) * v).collect();
        for _ in 0..k {
            for (r, v) in rhs7.iter_mut().zip(&p) {
                *r += v / (nf + kf);
            }
            p = self.op.apply(&p)?;
        }
        let r7 = self.dist_to(n + k, &rhs7) / scale;

        // x_{kn} = (1/k)·Σ_{i<k} T^{in}x_n, keeping each term for the max bound.
        let mut term = xn.clone();
        let mut rhs8 = vec![0.0; d];
        let mut max_dev: f64 = 0.0;
        let mut orbit = Vec::with_capacity(k);
        for _ in 0..k {
            let dev: Vec<f64> = term.iter().zip(&xn).map(|(a, b)| a - b).collect();
            max_dev = max_dev.max(self.space.norm(&dev));
            for (r, v) in rhs8.iter_mut().zip(&term) {
                *r += v / kf;
            }
            orbit.push(term.clone());
            term = self.apply_power(&term, n);
        }
        let r8 = self.dist_to(k * n, &rhs8) / scale;

        // x_{2kn} = (1/k)·Σ_{i<k} ½·T^{in}(x_n + T^{kn}x_n); `term` is now T^{kn}x_n,
        // and T^{in}(x_n + T^{kn}x_n) = T^{in}x_n + T^{(k+i)n}x_n.
        let mut rhs9 = vec![0.0; d];
        let mut shifted = term;
        for base in &orbit {
            for ((r, a), b) in rhs9.iter_mut().zip(base).zip(&shifted) {
                *r += 0.5 * (a + b) / kf;
            }
            shifted = self.apply_power(&shifted, n);
        }
        let r9 = self.dist_to(2 * k * n, &rhs9) / scale;

        let slack10 = 2.0 * kf * self.start_norm / (nf + kf) - self.distance(n + k, n);
        let slack11 = max_dev - self.distance(k * n, n);
        Ok(Lemma33 {
            r7,
            r8,
            r9,
            slack10,
            slack11,
        })
    }

    fn dist_to(&self, n: usize, v: &[f64]) -> f64 {
        let diff: Vec<f64> = self.mean(n).iter().zip(v).map(|(a, b)| a - b).collect();
        self.space.norm(&diff)
    }

    /// CSV rows `n,c1,…,cd,norm` for the cached prefix up to `upto`.
    pub fn write_csv<W: Write>(&self, mut out: W, upto: usize) -> Result<()> {
        let d = self.dim();
        let header: Vec<String> = (1..=d).map(|i| format!("c{i}")).collect();
        writeln!(out, "n,{},norm", header.join(","))?;
        for n in 1..=upto.min(self.len()) {
            let coords: Vec<String> = self.mean(n).iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{n},{},{:.17e}", coords.join(","), self.norms[n - 1])?;
        }
        Ok(())
    }
}

/// x_{n+1} = (n·x_n + Tⁿx)/(n + 1), written as x_n + (Tⁿx − x_n)/(n + 1) so
/// that a fixed point stays exact.
fn cesaro_step(prev: &[f64], power: &[f64], n: usize, out: &mut [f64]) {
    let inv = 1.0 / (n as f64 + 1.0);
    for ((o, a), v) in out.iter_mut().zip(prev).zip(power) {
        *o = a + (v - a) * inv;
    }
}

/// Zeroes subnormal entries of Tⁿx. They sit far below every tolerance in
/// use, and left alone they slow a decaying orbit down by orders of magnitude.
fn flush_subnormal(v: &mut [f64]) {
    for x in v.iter_mut() {
        if x.is_subnormal() {
            *x = 0.0;
        }
    }
}

/// x_1, x_2, … in O(d) memory, bit-identical to [`Trajectory`].
#[derive(Debug, Clone)]
pub struct CesaroStream {
    op: Operator,
    n: usize,
    mean: Vec<f64>,
    /// Tⁿx.
    power: Vec<f64>,
    scratch: Vec<f64>,
}

impl CesaroStream {
    pub fn new(op: &Operator, x: &[f64]) -> Result<Self> {
        if op.dim() != x.len() {
            return Err(Error::Dimension {
                expected: op.dim(),
                got: x.len(),
            });
        }
        Ok(Self {
            op: op.clone(),
            n: 1,
            mean: x.to_vec(),
            power: op.apply(x)?,
            scratch: vec![0.0; x.len()],
        })
    }

    /// Index n of the current mean.
    pub fn index(&self) -> usize {
        self.n
    }

    /// x_n.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Tⁿx.
    pub fn power(&self) -> &[f64] {
        &self.power
    }

    /// Moves from x_n to x_{n+1}.
    pub fn advance(&mut self) {
        cesaro_step(&self.mean, &self.power, self.n, &mut self.scratch);
        std::mem::swap(&mut self.mean, &mut self.scratch);
        self.op.apply_into(&self.power, &mut self.scratch);
        flush_subnormal(&mut self.scratch);
        std::mem::swap(&mut self.power, &mut self.scratch);
        self.n += 1;
    }
}

/// Relative identity residuals r7–r9 (divided by ‖x‖) and inequality slacks
/// (right side minus left side).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma33 {
    pub r7: f64,
    pub r8: f64,
    pub r9: f64,
    pub slack10: f64,
    pub slack11: f64,
}
