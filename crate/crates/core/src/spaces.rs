//! Finite-dimensional ℓ_p spaces (p ≥ 2) and linear operators on them that
//! are nonexpansive by construction.
//!
//! Exact ℓ_p operator norms are intractable for p ∉ {1, 2, ∞}, so operators
//! are assembled from pieces that are contractions in *every* ℓ_p:
//!
//! - signed permutation matrices (isometries),
//! - diagonal matrices with entries in [−1, 1],
//! - products and convex combinations of the above,
//! - and, for p = 2 only, orthogonal matrices.
//!
//! [`estimate_opnorm`] is an independent cross-check that never certifies on
//! its own for p ≠ 2 (it is a lower bound there).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{display, parse_rational};

/// ℓ_p^d with p ≥ 2.
#[derive(Debug, Clone)]
pub struct LpSpace {
    dim: usize,
    p: BigRational,
    /// p as a float, cached for the norm.
    p_float: f64,
}

impl PartialEq for LpSpace {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.p == other.p
    }
}

impl Eq for LpSpace {}

impl LpSpace {
    pub fn new(dim: usize, p: BigRational) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("space dimension must be at least 1".into()));
        }
        if p < BigRational::from_integer(2.into()) {
            return Err(Error::Domain(format!(
                "exponent p must satisfy p >= 2, got {}",
                display(&p)
            )));
        }
        let p_float = p.to_f64().expect("p is a small rational");
        Ok(Self { dim, p, p_float })
    }

    /// ℓ_p^d with an integer exponent.
    pub fn with_int_p(dim: usize, p: u32) -> Result<Self> {
        Self::new(dim, BigRational::from_integer(p.into()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> &BigRational {
        &self.p
    }

    pub fn p_f64(&self) -> f64 {
        self.p_float
    }

    pub fn is_hilbert(&self) -> bool {
        self.p == BigRational::from_integer(2.into())
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        lp_norm(v, self.p_float)
    }

    /// ‖v‖^p, a monotone stand-in for the norm in comparisons. The raw sum is
    /// used while it stays well inside the normal range.
    pub fn norm_pow(&self, v: &[f64]) -> f64 {
        let p = self.p_float;
        let raw: f64 = if p == 2.0 {
            v.iter().map(|x| x * x).sum()
        } else if p == 3.0 {
            v.iter().map(|x| x.abs() * x * x).sum()
        } else if p == 4.0 {
            v.iter()
                .map(|x| {
                    let x2 = x * x;
                    x2 * x2
                })
                .sum()
        } else if p.fract() == 0.0 && p <= 64.0 {
            let e = p as i32;
            v.iter().map(|x| x.abs().powi(e)).sum()
        } else {
            v.iter().map(|x| x.abs().powf(p)).sum()
        };
        if (raw == 0.0 && v.iter().all(|&x| x == 0.0)) || (1e-250..1e250).contains(&raw) {
            raw
        } else {
            lp_norm(v, p).powf(p)
        }
    }

    /// Inverse of [`LpSpace::norm_pow`].
    pub fn pow_to_norm(&self, s: f64) -> f64 {
        let p = self.p_float;
        if p == 2.0 {
            s.sqrt()
        } else if p == 3.0 {
            s.cbrt()
        } else if p == 4.0 {
            s.sqrt().sqrt()
        } else {
            s.powf(1.0 / p)
        }
    }
}

impl FromStr for LpSpace {
    type Err = Error;

    /// `lp:<d>:<p>`, p an integer or `num/den`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let parts: Vec<&str> = lower.split(':').collect();
        match parts.as_slice() {
            ["lp", d, p] => {
                let dim: usize = d
                    .parse()
                    .map_err(|_| Error::parse("space", s, "dimension must be a natural number"))?;
                let p = parse_rational(p).map_err(|_| Error::parse("space", s, "bad exponent"))?;
                LpSpace::new(dim, p)
            }
            _ => Err(Error::parse("space", s, "expected lp:<d>:<p>")),
        }
    }
}

impl fmt::Display for LpSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lp:{}:{}", self.dim, display(&self.p))
    }
}

/// (Σ|vᵢ|^p)^{1/p}, computed on the vector rescaled by its largest entry.
/// For p = 2 the squares are summed in ascending order.
pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    assert!(p >= 1.0 && p.is_finite(), "lp_norm requires finite p >= 1");
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let sum = if p == 2.0 {
        let mut buf = [0.0f64; 32];
        if v.len() <= buf.len() {
            let sq = &mut buf[..v.len()];
            for (s, x) in sq.iter_mut().zip(v) {
                let r = x / scale;
                *s = r * r;
            }
            sq.sort_unstable_by(f64::total_cmp);
            sq.iter().sum::<f64>()
        } else {
            let mut sq: Vec<f64> = v.iter().map(|x| (x / scale).powi(2)).collect();
            sq.sort_unstable_by(f64::total_cmp);
            sq.iter().sum::<f64>()
        }
    } else if p.fract() == 0.0 && p <= 64.0 {
        let e = p as i32;
        let inv = 1.0 / scale;
        match e {
            3 => v
                .iter()
                .map(|x| {
                    let r = x.abs() * inv;
                    r * r * r
                })
                .sum::<f64>(),
            4 => v
                .iter()
                .map(|x| {
                    let r = x * inv;
                    let r2 = r * r;
                    r2 * r2
                })
                .sum::<f64>(),
            _ => v.iter().map(|x| (x.abs() * inv).powi(e)).sum::<f64>(),
        }
    } else {
        let inv = 1.0 / scale;
        v.iter().map(|x| (x.abs() * inv).powf(p)).sum::<f64>()
    };
    let root = if p == 2.0 {
        sum.sqrt()
    } else if p == 3.0 {
        sum.cbrt()
    } else if p == 4.0 {
        sum.sqrt().sqrt()
    } else {
        sum.powf(1.0 / p)
    };
    scale * root
}

/// Row-by-row product for a fixed small dimension, summed in the same order
/// as the general case.
fn apply_fixed<const D: usize>(entries: &[f64], v: &[f64], out: &mut [f64]) {
    let v: &[f64; D] = v.try_into().expect("vector length matches the operator");
    for (row, o) in entries.chunks_exact(D).zip(out.iter_mut()) {
        let row: &[f64; D] = row.try_into().expect("exact chunk");
        let mut acc = -0.0;
        for j in 0..D {
            acc += row[j] * v[j];
        }
        *o = acc;
    }
}

/// How an operator's nonexpansiveness is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Certificate {
    /// Assembled from ℓ_p-contractions; ‖T‖_p ≤ 1 in exact arithmetic.
    ByConstruction,
    /// Imported matrix whose norm bound was computed numerically.
    Estimated { bound: f64 },
    /// Imported matrix for which no bound ≤ 1 could be established.
    Uncertified { bound: f64 },
}

/// Hand-specified operators used by examples and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedOp {
    Identity,
    NegIdentity,
    /// Swap of the first two coordinates.
    Swap,
    /// ½(I + swap).
    HalfSwap,
    Zero,
}

impl FromStr for NamedOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "id" => Ok(NamedOp::Identity),
            "neg-identity" | "-identity" => Ok(NamedOp::NegIdentity),
            "swap" => Ok(NamedOp::Swap),
            "half-swap" => Ok(NamedOp::HalfSwap),
            "zero" => Ok(NamedOp::Zero),
            _ => Err(Error::parse(
                "operator",
                s,
                "expected identity, neg-identity, swap, half-swap or zero",
            )),
        }
    }
}

impl fmt::Display for NamedOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NamedOp::Identity => "identity",
            NamedOp::NegIdentity => "neg-identity",
            NamedOp::Swap => "swap",
            NamedOp::HalfSwap => "half-swap",
            NamedOp::Zero => "zero",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeFlags {
    pub include_diagonals: bool,
    pub orthogonal_for_p2: bool,
}

impl Default for RecipeFlags {
    fn default() -> Self {
        Self {
            include_diagonals: true,
            orthogonal_for_p2: true,
        }
    }
}

/// Reproducible description of a randomly generated operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorRecipe {
    pub seed: u64,
    /// Depth of the product / convex-combination tree.
    pub depth: u32,
    pub flags: RecipeFlags,
}

impl OperatorRecipe {
    pub fn new(seed: u64, depth: u32) -> Self {
        Self {
            seed,
            depth,
            flags: RecipeFlags::default(),
        }
    }
}

/// Where an operator came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum OperatorSource {
    Named { name: NamedOp },
    Recipe(OperatorRecipe),
    Csv { path: String },
    Assembled { description: String },
}

impl fmt::Display for OperatorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorSource::Named { name } => write!(f, "{name}"),
            OperatorSource::Recipe(r) => write!(
                f,
                "{}",
                serde_json::to_string(r).expect("recipe serializes")
            ),
            OperatorSource::Csv { path } => write!(f, "csv:{path}"),
            OperatorSource::Assembled { description } => f.write_str(description),
        }
    }
}

/// A d×d real matrix acting on ℓ_p^d, with its nonexpansiveness certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    /// Row-major.
    entries: Vec<f64>,
    certificate: Certificate,
    recipe: OperatorSource,
}

impl Operator {
    pub fn identity(dim: usize) -> Self {
        Self::diagonal_unchecked(vec![1.0; dim], NamedOp::Identity)
    }

    pub fn named(op: NamedOp, dim: usize) -> Result<Self> {
        let m = match op {
            NamedOp::Identity => return Ok(Self::identity(dim)),
            NamedOp::NegIdentity => return Ok(Self::diagonal_unchecked(vec![-1.0; dim], op)),
            NamedOp::Zero => return Ok(Self::diagonal_unchecked(vec![0.0; dim], op)),
            NamedOp::Swap | NamedOp::HalfSwap => {
                if dim < 2 {
                    return Err(Error::Domain(format!("{op} needs dimension >= 2")));
                }
                let mut perm: Vec<usize> = (0..dim).collect();
                perm.swap(0, 1);
                let swap = signed_permutation_matrix(&perm, &vec![1.0; dim]);
                if op == NamedOp::Swap {
                    swap
                } else {
                    let id = identity_matrix(dim);
                    combine(&id, &swap, 0.5)
                }
            }
        };
        Ok(Self {
            dim,
            entries: m,
            certificate: Certificate::ByConstruction,
            recipe: OperatorSource::Named { name: op },
        })
    }

    fn diagonal_unchecked(diag: Vec<f64>, name: NamedOp) -> Self {
        let dim = diag.len();
        let mut entries = vec![0.0; dim * dim];
        for (i, d) in diag.into_iter().enumerate() {
            entries[i * dim + i] = d;
        }
        Self {
            dim,
            entries,
            certificate: Certificate::ByConstruction,
            recipe: OperatorSource::Named { name },
        }
    }

    /// Diagonal operator; nonexpansive by construction when every entry is in [−1, 1].
    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        if !diag.iter().all(|d| d.abs() <= 1.0) {
            return Err(Error::Contract(
                "diagonal entries must lie in [-1, 1]".into(),
            ));
        }
        let dim = diag.len();
        let mut entries = vec![0.0; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            entries[i * dim + i] = *d;
        }
        Ok(Self {
            dim,
            entries,
            certificate: Certificate::ByConstruction,
            recipe: OperatorSource::Assembled {
                description: format!("diag{diag:?}"),
            },
        })
    }

    /// `(Tv)_{perm[i]} = signs[i]·v_i`; an isometry of every ℓ_p.
    pub fn signed_permutation(perm: &[usize], signs: &[f64]) -> Result<Self> {
        let dim = perm.len();
        if signs.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: signs.len(),
            });
        }
        let mut seen = vec![false; dim];
        for &j in perm {
            if j >= dim || std::mem::replace(&mut seen[j], true) {
                return Err(Error::Contract("not a permutation".into()));
            }
        }
        if signs.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::Contract("signs must be +1 or -1".into()));
        }
        Ok(Self {
            dim,
            entries: signed_permutation_matrix(perm, signs),
            certificate: Certificate::ByConstruction,
            recipe: OperatorSource::Assembled {
                description: format!("signed-perm{perm:?}"),
            },
        })
    }

    /// `self ∘ other`; certified when both factors are.
    pub fn compose(&self, other: &Operator) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            dim: self.dim,
            entries: matmul(&self.entries, &other.entries, self.dim),
            certificate: joint_certificate(&self.certificate, &other.certificate, |a, b| a * b),
            recipe: OperatorSource::Assembled {
                description: format!("({})*({})", self.recipe, other.recipe),
            },
        })
    }

    /// `λ·self + (1−λ)·other` for λ ∈ [0, 1].
    pub fn convex_combination(&self, other: &Operator, lambda: f64) -> Result<Self> {
        self.check_same_dim(other)?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain("convex weight must lie in [0, 1]".into()));
        }
        Ok(Self {
            dim: self.dim,
            entries: combine(&self.entries, &other.entries, lambda),
            certificate: joint_certificate(&self.certificate, &other.certificate, |a, b| {
                lambda * a + (1.0 - lambda) * b
            }),
            recipe: OperatorSource::Assembled {
                description: format!(
                    "{lambda}*({})+{}*({})",
                    self.recipe,
                    1.0 - lambda,
                    other.recipe
                ),
            },
        })
    }

    /// Wraps an arbitrary matrix, certifying it numerically for `space`:
    /// for p = 2 by power iteration on TᵀT, otherwise by the interpolation
    /// bound ‖T‖_p ≤ ‖T‖_1^{1/p}·‖T‖_∞^{1−1/p}.
    pub fn from_matrix(entries: Vec<f64>, space: &LpSpace, source: OperatorSource) -> Result<Self> {
        let dim = space.dim();
        if entries.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Contract("matrix entries must be finite".into()));
        }
        let mut op = Self {
            dim,
            entries,
            certificate: Certificate::Uncertified { bound: f64::NAN },
            recipe: source,
        };
        let bound = if space.is_hilbert() {
            spectral_norm(&op, 2000, 0x5eed)
        } else {
            interpolation_bound(&op, space.p_f64())
        };
        op.certificate = if bound <= 1.0 + 1e-9 {
            Certificate::Estimated { bound }
        } else {
            Certificate::Uncertified { bound }
        };
        Ok(op)
    }

    /// Reads a row-major d×d matrix from CSV (commas or whitespace).
    pub fn from_csv(path: &Path, space: &LpSpace) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            for cell in line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|c| !c.is_empty())
            {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::parse("matrix entry", cell, "not a number"))?;
                entries.push(v);
            }
        }
        Self::from_matrix(
            entries,
            space,
            OperatorSource::Csv {
                path: path.display().to_string(),
            },
        )
    }

    fn check_same_dim(&self, other: &Operator) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn recipe(&self) -> &OperatorSource {
        &self.recipe
    }

    pub fn is_certified(&self) -> bool {
        !matches!(self.certificate, Certificate::Uncertified { .. })
    }

    /// Dense matrix–vector product.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.dim];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// `out = T v` without allocation; lengths must equal `dim`.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim);
        match self.dim {
            1 => apply_fixed::<1>(&self.entries, v, out),
            2 => apply_fixed::<2>(&self.entries, v, out),
            3 => apply_fixed::<3>(&self.entries, v, out),
            4 => apply_fixed::<4>(&self.entries, v, out),
            5 => apply_fixed::<5>(&self.entries, v, out),
            6 => apply_fixed::<6>(&self.entries, v, out),
            7 => apply_fixed::<7>(&self.entries, v, out),
            8 => apply_fixed::<8>(&self.entries, v, out),
            d => {
                for (row, o) in self.entries.chunks_exact(d).zip(out.iter_mut()) {
                    *o = row.iter().zip(v).fold(-0.0, |acc, (a, b)| acc + a * b);
                }
            }
        }
    }

    pub fn transpose_apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for (i, vi) in v.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.entries[i * d + j] * vi;
            }
        }
        out
    }
}

fn joint_certificate(a: &Certificate, b: &Certificate, f: impl Fn(f64, f64) -> f64) -> Certificate {
    match (a, b) {
        (Certificate::ByConstruction, Certificate::ByConstruction) => Certificate::ByConstruction,
        _ => {
            let bound = |c: &Certificate| match c {
                Certificate::ByConstruction => 1.0,
                Certificate::Estimated { bound } | Certificate::Uncertified { bound } => *bound,
            };
            let joint = f(bound(a), bound(b));
            if joint <= 1.0 + 1e-9 {
                Certificate::Estimated { bound: joint }
            } else {
                Certificate::Uncertified { bound: joint }
            }
        }
    }
}

fn identity_matrix(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

fn signed_permutation_matrix(perm: &[usize], signs: &[f64]) -> Vec<f64> {
    let d = perm.len();
    let mut m = vec![0.0; d * d];
    for (i, (&j, &s)) in perm.iter().zip(signs).enumerate() {
        m[j * d + i] = s;
    }
    m
}

fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut c = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                c[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    c
}

fn combine(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
        .collect()
}

/// Haar-ish random orthogonal matrix via Gram–Schmidt on a Gaussian matrix.
fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        // Two passes of classical Gram–Schmidt keep orthogonality at round-off level.
        for _ in 0..2 {
            for c in &cols {
                let dot: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= dot * ci;
                }
            }
        }
        let n = lp_norm(&v, 2.0);
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            cols.push(v);
        }
    }
    let mut m = vec![0.0; d * d];
    for (j, c) in cols.iter().enumerate() {
        for (i, x) in c.iter().enumerate() {
            m[i * d + j] = *x;
        }
    }
    m
}

fn random_leaf(d: usize, include_diagonals: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if include_diagonals && rng.gen_bool(0.5) {
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            m[i * d + i] = rng.gen_range(-1.0..=1.0);
        }
        m
    } else {
        let mut perm: Vec<usize> = (0..d).collect();
        perm.shuffle(rng);
        let signs: Vec<f64> = (0..d)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        signed_permutation_matrix(&perm, &signs)
    }
}

fn random_tree(d: usize, depth: u32, flags: RecipeFlags, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if depth == 0 {
        return random_leaf(d, flags.include_diagonals, rng);
    }
    let a = random_tree(d, depth - 1, flags, rng);
    let b = random_tree(d, depth - 1, flags, rng);
    if rng.gen_bool(0.5) {
        matmul(&a, &b, d)
    } else {
        combine(&a, &b, rng.gen_range(0.0..=1.0))
    }
}

/// Random operator that is nonexpansive on `space` by construction:
/// a depth-`recipe.depth` tree of products and convex combinations of
/// signed permutations and [−1,1]-diagonals, optionally composed with a
/// random orthogonal matrix when p = 2. Deterministic in the recipe.
pub fn gen_nonexpansive(space: &LpSpace, recipe: &OperatorRecipe) -> Operator {
    let d = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    let mut m = random_tree(d, recipe.depth, recipe.flags, &mut rng);
    if space.is_hilbert() && recipe.flags.orthogonal_for_p2 && d > 1 {
        let q = random_orthogonal(d, &mut rng);
        m = matmul(&q, &m, d);
    }
    Operator {
        dim: d,
        entries: m,
        certificate: Certificate::ByConstruction,
        recipe: OperatorSource::Recipe(*recipe),
    }
}

fn interpolation_bound(op: &Operator, p: f64) -> f64 {
    let d = op.dim;
    let max_row = op
        .entries
        .chunks_exact(d)
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let max_col = (0..d)
        .map(|j| (0..d).map(|i| op.entries[i * d + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    max_col.powf(1.0 / p) * max_row.powf(1.0 - 1.0 / p)
}

fn spectral_norm(op: &Operator, iters: usize, seed: u64) -> f64 {
    let d = op.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..3 {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut tv = vec![0.0; d];
        for _ in 0..iters {
            let n = lp_norm(&v, 2.0);
            if n == 0.0 {
                break;
            }
            v.iter_mut().for_each(|x| *x /= n);
            op.apply_into(&v, &mut tv);
            best = best.max(lp_norm(&tv, 2.0));
            let next = op.transpose_apply(&tv);
            let prev = std::mem::replace(&mut v, next);
            let n_next = lp_norm(&v, 2.0);
            if n_next == 0.0 {
                break;
            }
            // Stop once the direction has settled to round-off.
            let diff: f64 = prev
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b / n_next).abs())
                .sum();
            if diff < 1e-15 * d as f64 {
                op.apply_into(&prev, &mut tv);
                best = best.max(lp_norm(&tv, 2.0));
                break;
            }
        }
    }
    best
}

/// Dual direction of y in ℓ_p: the unit ℓ_{p'}-vector attaining ⟨·, y⟩ = ‖y‖_p.
fn dual_vector(y: &[f64], p: f64) -> Vec<f64> {
    let n = lp_norm(y, p);
    if n == 0.0 {
        return vec![0.0; y.len()];
    }
    y.iter()
        .map(|v| v.signum() * (v.abs() / n).powf(p - 1.0))
        .collect()
}

/// Lower bound on ‖T‖_p from random starts followed by Boyd's normalized
/// ascent on ‖Tv‖_p/‖v‖_p; for p = 2 additionally power iteration on TᵀT.
pub fn estimate_opnorm(op: &Operator, p: f64, iters: usize, seed: u64) -> f64 {
    assert!(iters >= 1, "estimate_opnorm needs at least one iteration");
    let d = op.dim;
    let mut best = 0.0f64;
    if p == 2.0 {
        best = spectral_norm(op, iters, seed);
    }
    let q = p / (p - 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut tv = vec![0.0; d];
    let starts = 4 + d;
    for s in 0..starts {
        // Basis vectors first, then random directions.
        let mut v: Vec<f64> = if s < d {
            (0..d).map(|i| if i == s { 1.0 } else { 0.0 }).collect()
        } else {
            (0..d).map(|_| rng.sample(StandardNormal)).collect()
        };
        for _ in 0..iters.min(200) {
            let n = lp_norm(&v, p);
            if n == 0.0 {
                break;
            }
            v.iter_mut().for_each(|x| *x /= n);
            op.apply_into(&v, &mut tv);
            let ratio = lp_norm(&tv, p);
            best = best.max(ratio);
            if ratio == 0.0 {
                break;
            }
            let z = op.transpose_apply(&dual_vector(&tv, p));
            let next = dual_vector(&z, q);
            if next.iter().all(|x| *x == 0.0) {
                break;
            }
            v = next;
        }
    }
    best
}
