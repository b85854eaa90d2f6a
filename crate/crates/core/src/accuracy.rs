//! Intrinsic accuracy `P(T_k | D_j)` of each disease state.
//!
//! The number of cases `n_j+` of a given state is random under case-control
//! sampling, so the row proportion `n_jk / n_j+` is a compound random
//! variable. Dividing by `P(n_j+ > 0)` removes the bias from the `0/0 = 0`
//! convention, and the variance accounts for the randomness of `n_j+` through
//! `E(1/n_j+ | n_j+ > 0)`.

use serde::{Deserialize, Serialize};

use crate::counts::{AdjustedControlRow, CaseShareVector, CountMatrix};
use crate::error::{Error, Result};
use crate::kernels::{
    midp_interval, truncated_moments, wald_logit_interval, EstimateInterval, Flag, Method,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyEstimate {
    pub state: usize,
    pub readout: usize,
    /// Raw row proportion `n_jk / n_j+` (0 for an empty row).
    pub tilde: f64,
    /// Truncation-corrected estimate `tilde / P(n_j+ > 0)`.
    pub point: f64,
    /// Variance of `point`.
    pub sigma2: f64,
    pub logit_variance: f64,
    pub prob_positive: f64,
    pub interval: EstimateInterval,
}

/// Law of the random row size `n_j+ ~ Binomial(N1, share)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RowLaw {
    pub prob_positive: f64,
    pub mean_inverse: f64,
    pub mean_given_positive: f64,
}

impl RowLaw {
    pub(crate) fn new(cases: u64, share: f64) -> Result<Self> {
        let m = truncated_moments(cases, share)?;
        Ok(RowLaw {
            prob_positive: m.prob_positive,
            mean_inverse: m.mean_inverse_given_positive,
            mean_given_positive: m.mean_given_positive,
        })
    }

    /// Variance of the truncation-corrected estimate at accuracy `a`.
    pub(crate) fn sigma2(&self, a: f64) -> f64 {
        let p = self.prob_positive;
        let v = (a * a * (1.0 - p) + a * (1.0 - a) * self.mean_inverse) / p;
        v.max(0.0)
    }

    /// Delta-method variance of the logit of the row proportion at accuracy `a`.
    pub(crate) fn logit_variance(&self, a: f64) -> f64 {
        let p = self.prob_positive;
        p * (a * (1.0 - p) + (1.0 - a) * self.mean_inverse) / (a * (1.0 - a).powi(2))
    }
}

fn check_state(matrix: &CountMatrix, state: usize) -> Result<()> {
    if state == 0 || state > matrix.num_states() {
        return Err(Error::Domain(format!(
            "state index {state} outside 1..={}",
            matrix.num_states()
        )));
    }
    Ok(())
}

/// Estimates `P(T_k | D_j)` with a logit-scale Wald interval.
///
/// `shares` supplies the `P(D_j | D)` used in the Binomial law of `n_j+`:
/// the sample shares, or registry shares when those are treated as known.
///
/// When `n_jk` is 0 or `n_j+`, the interval is built from the row with one
/// half added to each cell and then widened to include the unadjusted point.
pub fn accuracy_estimate(
    matrix: &CountMatrix,
    state: usize,
    readout: usize,
    shares: &CaseShareVector,
    alpha: f64,
) -> Result<AccuracyEstimate> {
    check_state(matrix, state)?;
    if readout > matrix.num_readouts() {
        return Err(Error::Domain(format!(
            "readout index {readout} outside 0..={}",
            matrix.num_readouts()
        )));
    }
    if shares.len() != matrix.num_states() {
        return Err(Error::DimensionMismatch {
            expected: matrix.num_states(),
            actual: shares.len(),
        });
    }
    let row_total = matrix.row_total(state);
    let hits = matrix.count(state, readout);
    if row_total == 0 {
        let interval = EstimateInterval {
            point: 0.0,
            lower: 0.0,
            upper: 1.0,
            alpha,
            method: Method::Degenerate,
            flags: [Flag::EmptyRow].into_iter().collect(),
        };
        return Ok(AccuracyEstimate {
            state,
            readout,
            tilde: 0.0,
            point: 0.0,
            sigma2: 0.0,
            logit_variance: f64::NAN,
            prob_positive: f64::NAN,
            interval,
        });
    }
    let law = RowLaw::new(matrix.cases(), shares.share(state))?;
    let tilde = hits as f64 / row_total as f64;
    let point = tilde / law.prob_positive;
    let sigma2 = law.sigma2(point);

    let (logit_variance, interval) = if hits == 0 || hits == row_total {
        let cells = matrix.num_readouts() as f64 + 1.0;
        let tilde_adj = (hits as f64 + 0.5) / (row_total as f64 + 0.5 * cells);
        let var = law.logit_variance(tilde_adj / law.prob_positive);
        let mut ci = wald_logit_interval(tilde_adj, var, alpha)
            .repoint(point.min(1.0))
            .with_flag(Flag::DegenerateProportion)
            .with_flag(Flag::AdjustedForInterval);
        ci.method = Method::Degenerate;
        (var, ci)
    } else {
        let var = law.logit_variance(point);
        let ci = wald_logit_interval(tilde, var, alpha).repoint(point.min(1.0));
        (var, ci)
    };
    Ok(AccuracyEstimate {
        state,
        readout,
        tilde,
        point,
        sigma2,
        logit_variance,
        prob_positive: law.prob_positive,
        interval,
    })
}

/// Probability that a case of state `j` reads Negative.
pub fn false_negative_estimate(
    matrix: &CountMatrix,
    state: usize,
    shares: &CaseShareVector,
    alpha: f64,
) -> Result<AccuracyEstimate> {
    accuracy_estimate(matrix, state, 0, shares, alpha)
}

/// Probability that a case of state `j` gets any positive readout, regardless
/// of whether the readout names the right state.
pub fn crude_sensitivity(
    matrix: &CountMatrix,
    state: usize,
    shares: &CaseShareVector,
    alpha: f64,
) -> Result<EstimateInterval> {
    let fnr = false_negative_estimate(matrix, state, shares, alpha)?;
    let mut out = fnr.interval.complement();
    out.point = (1.0 - fnr.point).clamp(0.0, 1.0);
    Ok(out)
}

/// Specificity and per-readout false-positive rates with Mid-P intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRates {
    pub specificity: EstimateInterval,
    /// Indexed by readout `1..=K`; entry 0 is unused and equals `specificity`.
    pub false_positive: Vec<EstimateInterval>,
}

/// Mid-P intervals for every cell of the control row.
///
/// Points use the adjusted shares when the correction was applied; the
/// intervals are always computed on the raw integer counts.
pub fn control_rates(
    matrix: &CountMatrix,
    adjusted: &AdjustedControlRow,
    alpha: f64,
) -> Result<ControlRates> {
    let n0 = matrix.controls();
    let mut cells = Vec::with_capacity(matrix.num_readouts() + 1);
    for k in 0..=matrix.num_readouts() {
        let mut ci = midp_interval(matrix.count(0, k), n0, alpha)?;
        if adjusted.applied {
            ci = ci
                .repoint(adjusted.share(k))
                .with_flag(Flag::AdjustedControls)
                .with_flag(Flag::RawCountInterval);
        }
        cells.push(ci);
    }
    Ok(ControlRates {
        specificity: cells[0].clone(),
        false_positive: cells,
    })
}

/// Pooled proportion of correctly classified cases over states `1..=K`.
pub fn aggregate_accuracy(matrix: &CountMatrix) -> Result<f64> {
    let k_count = matrix.num_readouts();
    let (hits, total) = (1..=k_count).fold((0u64, 0u64), |(h, t), j| {
        (h + matrix.count(j, j), t + matrix.row_total(j))
    });
    if total == 0 {
        return Err(Error::EmptyCaseBlock);
    }
    Ok(hits as f64 / total as f64)
}
