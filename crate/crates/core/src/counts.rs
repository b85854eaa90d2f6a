//! Disease-state by readout count tables.
//!
//! Row 0 is the control (no disease) state and column 0 the Negative readout.
//! Readouts `1..=K` correspond one-to-one with states `1..=K`; states
//! `K+1..=J` have no matching readout.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum false-positive count below which `AdjustPolicy::Auto` applies the
/// half-count correction.
pub const DEFAULT_ADJUST_THRESHOLD: u64 = 5;

/// A validated `(J+1) x (K+1)` count table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMatrix {
    state_labels: Vec<String>,
    readout_labels: Vec<String>,
    counts: Vec<Vec<u64>>,
    row_totals: Vec<u64>,
    column_totals: Vec<u64>,
}

impl CountMatrix {
    /// Validates a raw grid and computes its margins.
    pub fn new<S: AsRef<str>>(
        raw_counts: &[Vec<i64>],
        state_labels: &[S],
        readout_labels: &[S],
    ) -> Result<Self> {
        let rows = raw_counts.len();
        if rows < 2 {
            return Err(Error::Shape(format!("need at least 2 rows, got {rows}")));
        }
        let cols = raw_counts[0].len();
        if cols < 2 {
            return Err(Error::Shape(format!("need at least 2 columns, got {cols}")));
        }
        if let Some((i, row)) = raw_counts.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::Shape(format!(
                "row {i} has {} cells, expected {cols}",
                row.len()
            )));
        }
        if rows < cols {
            return Err(Error::Shape(format!(
                "{} disease states but {} positive readouts; need J >= K",
                rows - 1,
                cols - 1
            )));
        }
        if state_labels.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                actual: state_labels.len(),
            });
        }
        if readout_labels.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                actual: readout_labels.len(),
            });
        }
        let state_labels: Vec<String> =
            state_labels.iter().map(|s| s.as_ref().trim().to_string()).collect();
        let readout_labels: Vec<String> =
            readout_labels.iter().map(|s| s.as_ref().trim().to_string()).collect();
        for k in 1..cols {
            if state_labels[k] != readout_labels[k] {
                return Err(Error::LabelMismatch {
                    index: k,
                    state: state_labels[k].clone(),
                    readout: readout_labels[k].clone(),
                });
            }
        }
        let mut counts = Vec::with_capacity(rows);
        for (i, row) in raw_counts.iter().enumerate() {
            let mut out = Vec::with_capacity(cols);
            for (k, &value) in row.iter().enumerate() {
                if value < 0 {
                    return Err(Error::NegativeCount { row: i, col: k, value });
                }
                out.push(value as u64);
            }
            counts.push(out);
        }
        Self::from_counts(counts, state_labels, readout_labels)
    }

    /// Builds from nonnegative counts; still checks shape, labels and margins.
    pub fn from_counts(
        counts: Vec<Vec<u64>>,
        state_labels: Vec<String>,
        readout_labels: Vec<String>,
    ) -> Result<Self> {
        let rows = counts.len();
        let cols = counts.first().map_or(0, Vec::len);
        if rows < 2 || cols < 2 || rows < cols || counts.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape(format!(
                "expected a rectangular grid with rows >= columns >= 2, got {rows} x {cols}"
            )));
        }
        if state_labels.len() != rows || readout_labels.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: rows + cols,
                actual: state_labels.len() + readout_labels.len(),
            });
        }
        for k in 1..cols {
            if state_labels[k].trim() != readout_labels[k].trim() {
                return Err(Error::LabelMismatch {
                    index: k,
                    state: state_labels[k].clone(),
                    readout: readout_labels[k].clone(),
                });
            }
        }
        let row_totals: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let column_totals: Vec<u64> = (0..cols).map(|k| counts.iter().map(|r| r[k]).sum()).collect();
        if row_totals[0] == 0 {
            return Err(Error::EmptyControlRow);
        }
        if row_totals[1..].iter().all(|&t| t == 0) {
            return Err(Error::EmptyCaseBlock);
        }
        Ok(CountMatrix {
            state_labels: state_labels.into_iter().map(|s| s.trim().to_string()).collect(),
            readout_labels: readout_labels.into_iter().map(|s| s.trim().to_string()).collect(),
            counts,
            row_totals,
            column_totals,
        })
    }

    /// Number of disease states `J` (excluding control).
    pub fn num_states(&self) -> usize {
        self.counts.len() - 1
    }

    /// Number of positive readouts `K`.
    pub fn num_readouts(&self) -> usize {
        self.counts[0].len() - 1
    }

    pub fn state_labels(&self) -> &[String] {
        &self.state_labels
    }

    pub fn readout_labels(&self) -> &[String] {
        &self.readout_labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn count(&self, state: usize, readout: usize) -> u64 {
        self.counts[state][readout]
    }

    pub fn row(&self, state: usize) -> &[u64] {
        &self.counts[state]
    }

    pub fn row_total(&self, state: usize) -> u64 {
        self.row_totals[state]
    }

    pub fn row_totals(&self) -> &[u64] {
        &self.row_totals
    }

    pub fn column_total(&self, readout: usize) -> u64 {
        self.column_totals[readout]
    }

    pub fn column_totals(&self) -> &[u64] {
        &self.column_totals
    }

    /// Number of controls `N0`.
    pub fn controls(&self) -> u64 {
        self.row_totals[0]
    }

    /// Number of cases `N1`.
    pub fn cases(&self) -> u64 {
        self.row_totals[1..].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.controls() + self.cases()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.state_labels.iter().position(|s| s == label.trim())
    }

    pub fn readout_index(&self, label: &str) -> Option<usize> {
        self.readout_labels.iter().position(|s| s == label.trim())
    }

    /// Raw grid as signed integers, suitable for feeding back into [`CountMatrix::new`].
    pub fn raw(&self) -> Vec<Vec<i64>> {
        self.counts
            .iter()
            .map(|r| r.iter().map(|&c| c as i64).collect())
            .collect()
    }
}

/// When to apply the half-count correction to the control row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjustPolicy {
    #[default]
    Auto,
    On,
    Off,
}

impl FromStr for AdjustPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(AdjustPolicy::Auto),
            "on" => Ok(AdjustPolicy::On),
            "off" => Ok(AdjustPolicy::Off),
            other => Err(Error::Domain(format!("unknown adjust policy {other:?}"))),
        }
    }
}

impl std::fmt::Display for AdjustPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AdjustPolicy::Auto => "auto",
            AdjustPolicy::On => "on",
            AdjustPolicy::Off => "off",
        })
    }
}

/// Control-row counts after the optional half-count correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedControlRow {
    pub adjusted_counts: Vec<f64>,
    pub adjusted_total: f64,
    pub applied: bool,
    pub policy: AdjustPolicy,
}

impl AdjustedControlRow {
    /// Estimated `P(T_k | D_0)`.
    pub fn share(&self, readout: usize) -> f64 {
        self.adjusted_counts[readout] / self.adjusted_total
    }

    pub fn shares(&self) -> Vec<f64> {
        self.adjusted_counts
            .iter()
            .map(|c| c / self.adjusted_total)
            .collect()
    }

    /// Adds one half to every cell of an arbitrary row.
    pub fn half_count(row: &[u64], policy: AdjustPolicy) -> Self {
        let adjusted_counts: Vec<f64> = row.iter().map(|&c| c as f64 + 0.5).collect();
        let total: u64 = row.iter().sum();
        AdjustedControlRow {
            adjusted_total: total as f64 + 0.5 * row.len() as f64,
            adjusted_counts,
            applied: true,
            policy,
        }
    }

    fn raw(row: &[u64], policy: AdjustPolicy) -> Self {
        AdjustedControlRow {
            adjusted_counts: row.iter().map(|&c| c as f64).collect(),
            adjusted_total: row.iter().sum::<u64>() as f64,
            applied: false,
            policy,
        }
    }
}

/// Applies the half-count correction to the control row according to `policy`.
///
/// `Auto` triggers when the smallest observed false-positive count
/// `min_{k>=1} n_0k` is below `threshold`.
pub fn adjust_control_counts(
    matrix: &CountMatrix,
    policy: AdjustPolicy,
    threshold: u64,
) -> AdjustedControlRow {
    let row = matrix.row(0);
    let apply = match policy {
        AdjustPolicy::On => true,
        AdjustPolicy::Off => false,
        AdjustPolicy::Auto => row[1..].iter().any(|&c| c < threshold),
    };
    if apply {
        AdjustedControlRow::half_count(row, policy)
    } else {
        AdjustedControlRow::raw(row, policy)
    }
}

/// Estimated conditional shares `P(D_j | D)` of the case block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseShareVector {
    pub shares: Vec<f64>,
    pub basis: u64,
}

impl CaseShareVector {
    /// Share of state `j` (1-based).
    pub fn share(&self, state: usize) -> f64 {
        self.shares[state - 1]
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    /// Builds from explicit shares; the last entry is recomputed as the
    /// remainder so the vector sums to one.
    pub fn from_leading(leading: &[f64], basis: u64) -> Self {
        let mut shares = leading.to_vec();
        let rest: f64 = leading.iter().sum();
        shares.push(1.0 - rest);
        CaseShareVector { shares, basis }
    }
}

/// Maximum-likelihood case shares `n_j+ / N1`, last share as remainder.
pub fn case_shares(matrix: &CountMatrix) -> Result<CaseShareVector> {
    let n1 = matrix.cases();
    if n1 == 0 {
        return Err(Error::EmptyCaseBlock);
    }
    let j_count = matrix.num_states();
    let leading: Vec<f64> = (1..j_count)
        .map(|j| matrix.row_total(j) as f64 / n1 as f64)
        .collect();
    Ok(CaseShareVector::from_leading(&leading, n1))
}

/// Controls against all cases pooled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollapsedMatrix {
    pub readout_labels: Vec<String>,
    pub control_row: Vec<u64>,
    pub case_row: Vec<u64>,
    pub controls: u64,
    pub cases: u64,
}

impl CollapsedMatrix {
    pub fn num_readouts(&self) -> usize {
        self.control_row.len() - 1
    }
}

/// Pools all case states into one row: `n_+k - n_0k`.
pub fn collapse_cases(matrix: &CountMatrix) -> CollapsedMatrix {
    let control_row = matrix.row(0).to_vec();
    let case_row = matrix
        .column_totals()
        .iter()
        .zip(&control_row)
        .map(|(total, control)| total - control)
        .collect();
    CollapsedMatrix {
        readout_labels: matrix.readout_labels().to_vec(),
        control_row,
        case_row,
        controls: matrix.controls(),
        cases: matrix.cases(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::liu2020;
    use approx::assert_relative_eq;

    fn binary() -> CountMatrix {
        CountMatrix::new(&[vec![9, 1], vec![2, 8]], &["Control", "Case"], &["Negative", "Case"])
            .unwrap()
    }

    #[test]
    fn liu_table_totals() {
        let m = liu2020();
        assert_eq!(m.num_states(), 10);
        assert_eq!(m.num_readouts(), 10);
        assert_eq!(m.controls(), 610);
        assert_eq!(m.cases(), 654);
        assert_eq!(m.total(), 1264);
        assert_eq!(
            m.column_totals(),
            &[912, 8, 22, 10, 31, 79, 18, 39, 43, 3, 99]
        );
    }

    #[test]
    fn binary_table_is_valid() {
        let m = binary();
        assert_eq!((m.num_states(), m.num_readouts()), (1, 1));
        assert_eq!(m.cases(), 10);
    }

    #[test]
    fn rejects_bad_grids() {
        let labels = ["C", "A"];
        let out = ["Neg", "A"];
        assert!(matches!(
            CountMatrix::new(&[vec![9, -1], vec![2, 8]], &labels, &out),
            Err(Error::NegativeCount { row: 0, col: 1, value: -1 })
        ));
        assert!(matches!(
            CountMatrix::new(&[vec![9, 1], vec![2, 8]], &labels, &["Neg", "B"]),
            Err(Error::LabelMismatch { index: 1, .. })
        ));
        assert_eq!(
            CountMatrix::new(&[vec![0, 0], vec![2, 8]], &labels, &out),
            Err(Error::EmptyControlRow)
        );
        assert_eq!(
            CountMatrix::new(&[vec![3, 1], vec![0, 0]], &labels, &out),
            Err(Error::EmptyCaseBlock)
        );
        assert!(matches!(
            CountMatrix::new(&[vec![3, 1], vec![0]], &labels, &out),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            CountMatrix::new(&[vec![3, 1, 1], vec![1, 1, 1]], &labels, &["N", "A", "B"]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn labels_are_trimmed_and_case_sensitive() {
        let m = CountMatrix::new(&[vec![5, 1], vec![2, 3]], &[" C ", " Lung"], &["Neg", "Lung "]);
        assert!(m.is_ok());
        let err = CountMatrix::new(&[vec![5, 1], vec![2, 3]], &["C", "Lung"], &["Neg", "lung"]);
        assert!(matches!(err, Err(Error::LabelMismatch { .. })));
    }

    #[test]
    fn collapse_liu() {
        let m = liu2020();
        let c = collapse_cases(&m);
        assert_eq!(c.case_row[0], 912 - 606);
        assert_eq!(c.case_row.iter().sum::<u64>(), c.cases);
        let totals: Vec<u64> = c.control_row.iter().zip(&c.case_row).map(|(a, b)| a + b).collect();
        assert_eq!(totals, m.column_totals());
    }

    #[test]
    fn collapse_single_state() {
        let m = binary();
        assert_eq!(collapse_cases(&m).case_row, m.row(1));
    }

    #[test]
    fn adjustment_policies() {
        let m = liu2020();
        let a = adjust_control_counts(&m, AdjustPolicy::Auto, DEFAULT_ADJUST_THRESHOLD);
        assert!(a.applied);
        assert_eq!(a.adjusted_counts[0], 606.5);
        assert_eq!(a.adjusted_total, 615.5);
        assert_relative_eq!(a.shares().iter().sum::<f64>(), 1.0, epsilon = 1e-15);

        let off = adjust_control_counts(&m, AdjustPolicy::Off, DEFAULT_ADJUST_THRESHOLD);
        assert!(!off.applied);
        assert_eq!(off.adjusted_counts[0], 606.0);
        assert_eq!(off.adjusted_total, 610.0);

        let dense = CountMatrix::new(
            &[vec![900, 50, 50], vec![1, 2, 3], vec![1, 1, 1]],
            &["C", "A", "B"],
            &["N", "A", "B"],
        )
        .unwrap();
        assert!(!adjust_control_counts(&dense, AdjustPolicy::Auto, 5).applied);
        assert!(adjust_control_counts(&dense, AdjustPolicy::On, 5).applied);
    }

    #[test]
    fn shares_liu() {
        let m = liu2020();
        let s = case_shares(&m).unwrap();
        assert_eq!(s.len(), 10);
        assert_relative_eq!(s.share(1), 36.0 / 654.0, epsilon = 1e-15);
        assert_relative_eq!(s.shares.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_eq!(case_shares(&binary()).unwrap().shares, vec![1.0]);
        let even = CountMatrix::new(
            &[vec![5, 0, 0], vec![25, 25, 0], vec![25, 0, 25]],
            &["C", "A", "B"],
            &["N", "A", "B"],
        )
        .unwrap();
        assert_eq!(case_shares(&even).unwrap().shares, vec![0.5, 0.5]);
    }

    #[test]
    fn validation_is_idempotent() {
        let m = liu2020();
        let again = CountMatrix::new(&m.raw(), m.state_labels(), m.readout_labels()).unwrap();
        assert_eq!(again, m);
    }
}
