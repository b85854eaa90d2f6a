//! Marginal readout distribution `P(T_k)` in the intended-use population.
//!
//! Only the collapsed two-row table is needed: `P(T_k) = c (1 - P(D)) + d P(D)`
//! with `c = P(T_k|D_0)` and `d = P(T_k|D)`. `P(D)` is treated as known.

use serde::{Deserialize, Serialize};

use crate::counts::{AdjustedControlRow, CollapsedMatrix};
use crate::error::{Error, Result};
use crate::kernels::{logit, wald_logit_interval, EstimateInterval, Flag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalParams {
    pub readout: usize,
    pub control_rate: f64,
    pub case_rate: f64,
    pub overall: f64,
    /// `P(T_k)`.
    pub b0: f64,
    /// `1 - P(T_k)`.
    pub b1: f64,
}

impl MarginalParams {
    pub fn new(readout: usize, control_rate: f64, case_rate: f64, overall: f64) -> Self {
        let b0 = control_rate * (1.0 - overall) + case_rate * overall;
        MarginalParams {
            readout,
            control_rate,
            case_rate,
            overall,
            b0,
            b1: 1.0 - b0,
        }
    }

    /// `Q = logit(P(T_k))`.
    pub fn q(&self) -> f64 {
        logit(self.b0)
    }

    /// Gradient of `Q` with respect to `(control_rate, case_rate)`.
    pub fn gradient(&self) -> Result<[f64; 2]> {
        let scale = self.b0 * self.b1;
        if !(scale > 0.0) {
            return Err(Error::ZeroDenominator(format!("P(T_{})(1 - P(T_{}))", self.readout, self.readout)));
        }
        Ok([(1.0 - self.overall) / scale, self.overall / scale])
    }
}

fn check_inputs(collapsed: &CollapsedMatrix, adjusted: &AdjustedControlRow, overall: f64, readout: usize) -> Result<()> {
    if !(overall > 0.0 && overall < 1.0) {
        return Err(Error::InvalidIncidence(format!(
            "overall incidence must lie in (0, 1), got {overall}"
        )));
    }
    if adjusted.adjusted_counts.len() != collapsed.num_readouts() + 1 {
        return Err(Error::DimensionMismatch {
            expected: collapsed.num_readouts() + 1,
            actual: adjusted.adjusted_counts.len(),
        });
    }
    if readout > collapsed.num_readouts() {
        return Err(Error::Domain(format!("readout {readout} out of range")));
    }
    if collapsed.cases == 0 {
        return Err(Error::EmptyCaseBlock);
    }
    Ok(())
}

pub fn marginal_params(
    collapsed: &CollapsedMatrix,
    adjusted: &AdjustedControlRow,
    overall_incidence: f64,
    readout: usize,
) -> Result<MarginalParams> {
    check_inputs(collapsed, adjusted, overall_incidence, readout)?;
    let c = adjusted.share(readout);
    let d = collapsed.case_row[readout] as f64 / collapsed.cases as f64;
    Ok(MarginalParams::new(readout, c, d, overall_incidence))
}

pub fn marginal_estimate(
    collapsed: &CollapsedMatrix,
    adjusted: &AdjustedControlRow,
    overall_incidence: f64,
    readout: usize,
    alpha: f64,
) -> Result<EstimateInterval> {
    let params = marginal_params(collapsed, adjusted, overall_incidence, readout)?;
    let [gc, gd] = params.gradient()?;
    let (c, d) = (params.control_rate, params.case_rate);
    let variance = gc * gc * c * (1.0 - c) / collapsed.controls as f64
        + gd * gd * d * (1.0 - d) / collapsed.cases as f64;
    let mut interval = wald_logit_interval(params.b0, variance, alpha);
    if adjusted.applied {
        interval.flags.insert(Flag::AdjustedControls);
    }
    Ok(interval)
}

pub fn marginal_table(
    collapsed: &CollapsedMatrix,
    adjusted: &AdjustedControlRow,
    overall_incidence: f64,
    alpha: f64,
) -> Result<Vec<EstimateInterval>> {
    (0..=collapsed.num_readouts())
        .map(|k| marginal_estimate(collapsed, adjusted, overall_incidence, k, alpha))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::{adjust_control_counts, collapse_cases, AdjustPolicy, CountMatrix};
    use crate::fixtures::liu2020;
    use approx::assert_relative_eq;

    #[test]
    fn screening_truth() {
        let controls = [0.98, 0.01, 0.01];
        // Collapsed case rates with p = (0.5, 0.4, 0.1).
        let cases = [
            0.5 * 0.25 + 0.4 * 0.30 + 0.1 * 0.60,
            0.5 * 0.65 + 0.4 * 0.20 + 0.1 * 0.20,
            0.5 * 0.10 + 0.4 * 0.50 + 0.1 * 0.20,
        ];
        let expected = [96.92, 1.66, 1.42];
        let mut total = 0.0;
        for k in 0..3 {
            let b0 = MarginalParams::new(k, controls[k], cases[k], 0.016).b0;
            assert!((b0 * 100.0 - expected[k]).abs() < 0.005, "{k}: {b0}");
            total += b0;
        }
        assert_relative_eq!(total, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn liu_marginal_negative() {
        let m = liu2020();
        let adj = adjust_control_counts(&m, AdjustPolicy::On, 5);
        let collapsed = collapse_cases(&m);
        let table = marginal_table(&collapsed, &adj, 0.0133, 0.05).unwrap();
        let p0 = table[0].point * 100.0;
        assert!((97.8..=97.9).contains(&p0), "{p0}");
        let c = 606.5 / 615.5;
        let d = 306.0 / 654.0;
        assert_relative_eq!(table[0].point, c * (1.0 - 0.0133) + d * 0.0133, epsilon = 1e-15);
        let sum: f64 = table.iter().map(|e| e.point).sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
        assert!(table.iter().all(|e| e.lower <= e.point && e.point <= e.upper));
        assert!(table[0].flags.contains(&Flag::AdjustedControls));
    }

    #[test]
    fn raw_points_sum_to_one() {
        let m = liu2020();
        let adj = adjust_control_counts(&m, AdjustPolicy::Off, 5);
        let collapsed = collapse_cases(&m);
        // Raw control row has zeros, so some readouts sit between 0 and the case rate.
        let sum: f64 = (0..=m.num_readouts())
            .map(|k| marginal_params(&collapsed, &adj, 0.0133, k).unwrap().b0)
            .sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn point_lies_between_rates() {
        let m = liu2020();
        let adj = adjust_control_counts(&m, AdjustPolicy::On, 5);
        let collapsed = collapse_cases(&m);
        for k in 0..=m.num_readouts() {
            let p = marginal_params(&collapsed, &adj, 0.2, k).unwrap();
            let (lo, hi) = if p.control_rate < p.case_rate {
                (p.control_rate, p.case_rate)
            } else {
                (p.case_rate, p.control_rate)
            };
            assert!(lo <= p.b0 && p.b0 <= hi);
        }
    }

    #[test]
    fn vanishing_incidence_returns_control_shares() {
        let m = liu2020();
        let adj = adjust_control_counts(&m, AdjustPolicy::On, 5);
        let collapsed = collapse_cases(&m);
        let table = marginal_table(&collapsed, &adj, 1e-15, 0.05).unwrap();
        for (k, e) in table.iter().enumerate() {
            assert_relative_eq!(e.point, adj.share(k), epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_column_is_zero_denominator() {
        let m = CountMatrix::new(&[vec![10, 0], vec![5, 0]], &["C", "X"], &["N", "X"]).unwrap();
        let adj = adjust_control_counts(&m, AdjustPolicy::Off, 5);
        let collapsed = collapse_cases(&m);
        assert!(matches!(
            marginal_estimate(&collapsed, &adj, 0.1, 1, 0.05),
            Err(Error::ZeroDenominator(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = MarginalParams::new(1, 0.02, 0.3, 0.05);
        let g = p.gradient().unwrap();
        let h = 1e-6;
        let fd_c = (MarginalParams::new(1, 0.02 + h, 0.3, 0.05).q() - MarginalParams::new(1, 0.02 - h, 0.3, 0.05).q()) / (2.0 * h);
        let fd_d = (MarginalParams::new(1, 0.02, 0.3 + h, 0.05).q() - MarginalParams::new(1, 0.02, 0.3 - h, 0.05).q()) / (2.0 * h);
        assert_relative_eq!(g[0], fd_c, max_relative = 1e-6);
        assert_relative_eq!(g[1], fd_d, max_relative = 1e-6);
    }
}
