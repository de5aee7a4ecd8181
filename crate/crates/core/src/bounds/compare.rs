//! Side-by-side evaluation of the new bound against the earlier
//! Hilbert-space bound over a grid of b/ε ratios and counter-functions.

use std::fmt::Write as _;

use num_rational::BigRational;

use super::{agt_phi, hilbert_phi, CounterFunction, Log10Interval, Phi};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct CompareCell {
    pub phi: Phi,
}

impl CompareCell {
    pub fn log10(&self) -> Log10Interval {
        self.phi.log10()
    }

    pub fn budget_exceeded(&self) -> bool {
        self.phi.is_budget_exceeded()
    }

    /// The lower end is finite: the cell carries usable information.
    pub fn is_evaluable(&self) -> bool {
        self.log10().lo.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub ratio: BigRational,
    pub g: String,
    pub ours: CompareCell,
    pub agt_isometry: CompareCell,
    pub agt_general: CompareCell,
}

impl CompareRow {
    /// Upper end of ours strictly below the lower end of the isometry bound.
    pub fn ours_beats_isometry(&self) -> bool {
        self.ours.log10().hi < self.agt_isometry.log10().lo
    }

    /// As above against the general bound; `None` when that bound is not evaluable.
    pub fn ours_beats_general(&self) -> Option<bool> {
        self.agt_general
            .is_evaluable()
            .then(|| self.ours.log10().hi < self.agt_general.log10().lo)
    }
}

/// Evaluates every (b/ε, g) cell with ε = 1. Ours is the refined
/// Hilbert-space bound.
pub fn compare_grid(
    ratios: &[BigRational],
    gs: &[CounterFunction],
    digit_budget: u64,
) -> Result<Vec<CompareRow>> {
    let eps = BigRational::from_integer(1.into());
    let mut rows = Vec::with_capacity(ratios.len() * gs.len());
    for ratio in ratios {
        for g in gs {
            let ours = hilbert_phi(&eps, ratio, g, digit_budget)?.phi;
            let agt_isometry = agt_phi(&eps, ratio, g, true, digit_budget)?;
            let agt_general = agt_phi(&eps, ratio, g, false, digit_budget)?;
            rows.push(CompareRow {
                ratio: ratio.clone(),
                g: g.to_string(),
                ours: CompareCell { phi: ours },
                agt_isometry: CompareCell { phi: agt_isometry },
                agt_general: CompareCell { phi: agt_general },
            });
        }
    }
    Ok(rows)
}

/// Fixed point for ordinary magnitudes, scientific once the logarithm is
/// itself astronomically large.
fn fmt_log(v: f64) -> String {
    if !v.is_finite() {
        "inf".to_string()
    } else if v.abs() < 1e12 {
        format!("{v:.6}")
    } else {
        format!("{v:.6e}")
    }
}

fn cell_columns(out: &mut String, cell: &CompareCell) {
    let iv = cell.log10();
    let _ = write!(
        out,
        ",{},{},{}",
        fmt_log(iv.lo),
        fmt_log(iv.hi),
        cell.budget_exceeded()
    );
}

/// One row per cell; log₁₀ enclosures for every bound plus a budget flag.
pub fn to_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from(
        "b_over_eps,g,ours_log10_lo,ours_log10_hi,ours_budget_exceeded,\
         agt_iso_log10_lo,agt_iso_log10_hi,agt_iso_budget_exceeded,\
         agt_gen_log10_lo,agt_gen_log10_hi,agt_gen_budget_exceeded,\
         ours_beats_iso,ours_beats_gen\n",
    );
    for row in rows {
        let _ = write!(
            out,
            "{},\"{}\"",
            crate::rational::display(&row.ratio),
            row.g
        );
        cell_columns(&mut out, &row.ours);
        cell_columns(&mut out, &row.agt_isometry);
        cell_columns(&mut out, &row.agt_general);
        let gen = row
            .ours_beats_general()
            .map_or("n/a".to_string(), |b| b.to_string());
        let _ = writeln!(out, ",{},{}", row.ours_beats_isometry(), gen);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::DEFAULT_DIGIT_BUDGET;

    #[test]
    fn unit_ratio_row() {
        let rows = compare_grid(
            &[BigRational::from_integer(1.into())],
            &[CounterFunction::constant(1)],
            DEFAULT_DIGIT_BUDGET,
        )
        .unwrap();
        let row = &rows[0];
        assert!(!row.ours.budget_exceeded());
        assert!(!row.agt_isometry.budget_exceeded());
        assert!(row.agt_general.budget_exceeded());
        assert!(row.ours_beats_isometry());
        assert_eq!(row.ours_beats_general(), Some(true));
        let csv = to_csv(&rows);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("1,\"const:1\""));
    }
}
