//! Counter-functions g: ℕ → ℕ₀ choosing the metastability window length.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use super::logdomain::{log10_sum, Log10Interval};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Family {
    /// g(n) = k.
    Const(BigUint),
    /// g(n) = a·n + c.
    Affine { a: BigUint, c: BigUint },
    /// g(n) = Σ coeffs[i]·nⁱ.
    Poly(Vec<BigUint>),
    /// g(n) = values[n − 1] for 1 ≤ n ≤ len, `tail` afterwards; g(0) = g(1).
    Table {
        values: Vec<BigUint>,
        tail: BigUint,
        source: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterFunction {
    family: Family,
    monotone: bool,
}

impl CounterFunction {
    pub fn constant(k: u64) -> Self {
        Self::from_family(Family::Const(k.into()))
    }

    pub fn affine(a: u64, c: u64) -> Self {
        Self::from_family(Family::Affine {
            a: a.into(),
            c: c.into(),
        })
    }

    /// g(n) = n.
    pub fn identity() -> Self {
        Self::affine(1, 0)
    }

    pub fn poly(coeffs: Vec<BigUint>) -> Self {
        Self::from_family(Family::Poly(coeffs))
    }

    pub fn table(values: Vec<u64>, tail: u64) -> Self {
        Self::from_family(Family::Table {
            values: values.into_iter().map(BigUint::from).collect(),
            tail: tail.into(),
            source: None,
        })
    }

    /// Reads one natural per line; the last line is the constant tail.
    pub fn table_from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut nums = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let v: BigUint = line.parse().map_err(|_| {
                Error::parse("counter-function table", line, "not a natural number")
            })?;
            nums.push(v);
        }
        let tail = nums.pop().ok_or_else(|| {
            Error::parse(
                "counter-function table",
                &path.display().to_string(),
                "empty table",
            )
        })?;
        Ok(Self::from_family(Family::Table {
            values: nums,
            tail,
            source: Some(path.display().to_string()),
        }))
    }

    fn from_family(family: Family) -> Self {
        let monotone = match &family {
            Family::Table { values, tail, .. } => {
                values.windows(2).all(|w| w[0] <= w[1]) && values.last().is_none_or(|l| l <= tail)
            }
            _ => true,
        };
        Self { family, monotone }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn eval(&self, n: &BigUint) -> BigUint {
        match &self.family {
            Family::Const(k) => k.clone(),
            Family::Affine { a, c } => a * n + c,
            Family::Poly(coeffs) => coeffs
                .iter()
                .rev()
                .fold(BigUint::zero(), |acc, c| acc * n + c),
            Family::Table { values, tail, .. } => {
                let idx = n.to_usize().unwrap_or(usize::MAX).max(1);
                values.get(idx - 1).unwrap_or(tail).clone()
            }
        }
    }

    pub fn eval_u64(&self, n: u64) -> BigUint {
        self.eval(&BigUint::from(n))
    }

    /// g(n) as a machine index, saturating at `usize::MAX`.
    pub fn eval_index(&self, n: usize) -> usize {
        self.eval(&BigUint::from(n))
            .to_usize()
            .unwrap_or(usize::MAX)
    }

    /// max_{1 ≤ i ≤ n} g(i) (taken at n = 1 when n = 0).
    pub fn envelope(&self, n: &BigUint) -> BigUint {
        if self.monotone {
            return self.eval(&n.max(&BigUint::from(1u32)).clone());
        }
        match &self.family {
            Family::Table { values, tail, .. } => {
                let k = n.to_usize().unwrap_or(usize::MAX).max(1);
                let prefix = values.iter().take(k).max().cloned().unwrap_or_default();
                if k > values.len() {
                    prefix.max(tail.clone())
                } else {
                    prefix
                }
            }
            _ => unreachable!("closed-form families are monotone"),
        }
    }

    /// Length of the region where a table deviates from its tail (0 for
    /// closed forms).
    pub(crate) fn irregular_prefix(&self) -> usize {
        match &self.family {
            Family::Table { values, .. } if !self.monotone => values.len(),
            _ => 0,
        }
    }

    /// (a, c) with g(n) = a·n + c for every n ≥ `from`, when such exist.
    pub(crate) fn eventually_affine(&self) -> Option<(BigUint, BigUint, usize)> {
        match &self.family {
            Family::Const(k) => Some((BigUint::zero(), k.clone(), 0)),
            Family::Affine { a, c } => Some((a.clone(), c.clone(), 0)),
            Family::Poly(coeffs) => {
                let deg = coeffs.iter().rposition(|c| !c.is_zero()).unwrap_or(0);
                match deg {
                    0 => Some((
                        BigUint::zero(),
                        coeffs.first().cloned().unwrap_or_default(),
                        0,
                    )),
                    1 => Some((coeffs[1].clone(), coeffs[0].clone(), 0)),
                    _ => None,
                }
            }
            Family::Table { values, tail, .. } => {
                Some((BigUint::zero(), tail.clone(), values.len() + 1))
            }
        }
    }

    /// log₁₀ g(10^x), valid only past any table prefix.
    pub(crate) fn log10_at(&self, x: f64) -> f64 {
        match &self.family {
            Family::Const(k) => log10_nat(k),
            Family::Affine { a, c } => log10_sum(&[log10_nat(a) + x, log10_nat(c)]),
            Family::Poly(coeffs) => {
                let terms: Vec<f64> = coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| log10_nat(c) + i as f64 * x)
                    .collect();
                log10_sum(&terms)
            }
            Family::Table { tail, .. } => log10_nat(tail),
        }
    }
}

pub(crate) fn log10_nat(n: &BigUint) -> f64 {
    if n.is_zero() {
        f64::NEG_INFINITY
    } else {
        Log10Interval::of_nat(n).midpoint()
    }
}

impl FromStr for CounterFunction {
    type Err = Error;

    /// `const:<k>`, `affine:<a>:<c>`, `poly:<c0>,<c1>,...`, or `table:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        let (head, rest) = trimmed
            .split_once(':')
            .ok_or_else(|| Error::parse("counter function", s, "expected <family>:<args>"))?;
        let nat = |x: &str| -> Result<BigUint> {
            x.trim().parse().map_err(|_| {
                Error::parse(
                    "counter function",
                    s,
                    format!("{x:?} is not a natural number"),
                )
            })
        };
        match head.to_ascii_lowercase().as_str() {
            "const" => Ok(Self::from_family(Family::Const(nat(rest)?))),
            "affine" => {
                let (a, c) = rest.split_once(':').ok_or_else(|| {
                    Error::parse("counter function", s, "expected affine:<a>:<c>")
                })?;
                Ok(Self::from_family(Family::Affine {
                    a: nat(a)?,
                    c: nat(c)?,
                }))
            }
            "poly" => {
                let coeffs = rest.split(',').map(nat).collect::<Result<Vec<_>>>()?;
                Ok(Self::poly(coeffs))
            }
            "table" => Self::table_from_file(Path::new(rest)),
            _ => Err(Error::parse(
                "counter function",
                s,
                "family must be const, affine, poly or table",
            )),
        }
    }
}

impl fmt::Display for CounterFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Const(k) => write!(f, "const:{k}"),
            Family::Affine { a, c } => write!(f, "affine:{a}:{c}"),
            Family::Poly(coeffs) => {
                let parts: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
            Family::Table {
                source: Some(path), ..
            } => write!(f, "table:{path}"),
            Family::Table { values, tail, .. } => {
                let parts: Vec<String> = values.iter().map(|c| c.to_string()).collect();
                write!(f, "table[{}|{tail}]", parts.join(","))
            }
        }
    }
}
