//! Stratified analyses and the stage decomposition of `PVP_k`.
//!
//! Records carry one extra label (a disease stage, an age band, a site). The
//! pooled table is the cell-wise sum over strata. For a stage `s0` of state
//! `k`,
//!
//! ```text
//! PVP_k(s0) = P(T_k|D_k,s0) P(s0|D_k) P(D_k|D) P(D) / P(T_k)
//! ```
//!
//! with the unstratified denominator, so the stage values add up to `PVP_k`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::counts::{AdjustedControlRow, CountMatrix};
use crate::error::{Error, Result};
use crate::kernels::{expit, wald_logit_interval, Flag, Method};
use crate::predictive::{IncidenceSpec, PredictiveContext, PredictiveEstimate, PredictiveMetric};

/// Step for the central differences of the stage logit.
pub const STAGE_GRADIENT_STEP: f64 = 1e-6;

/// One line of long-format input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumRecord {
    pub state: String,
    pub stratum: String,
    pub readout: String,
    pub count: i64,
}

impl StratumRecord {
    pub fn new(state: &str, stratum: &str, readout: &str, count: i64) -> Self {
        StratumRecord {
            state: state.trim().to_string(),
            stratum: stratum.trim().to_string(),
            readout: readout.trim().to_string(),
            count,
        }
    }
}

/// Records grouped by stratum over a common label layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedRecords {
    strata: Vec<String>,
    /// `tables[s][j][k]`, laid out like the pooled matrix.
    tables: Vec<Vec<Vec<u64>>>,
    pooled: CountMatrix,
}

impl StratifiedRecords {
    pub fn strata(&self) -> &[String] {
        &self.strata
    }

    pub fn pooled(&self) -> &CountMatrix {
        &self.pooled
    }

    pub fn stratum_index(&self, label: &str) -> Option<usize> {
        self.strata.iter().position(|s| s == label.trim())
    }

    /// Raw counts of one stratum; rows may be empty.
    pub fn stratum_counts(&self, stratum: usize) -> &[Vec<u64>] {
        &self.tables[stratum]
    }

    /// One stratum as a validated matrix, for a stand-alone analysis with a
    /// stratum-specific incidence. Fails if the stratum has no controls.
    pub fn stratum_matrix(&self, stratum: usize) -> Result<CountMatrix> {
        CountMatrix::from_counts(
            self.tables[stratum].clone(),
            self.pooled.state_labels().to_vec(),
            self.pooled.readout_labels().to_vec(),
        )
    }

    /// `P(S = s | D_j)` for every stratum.
    pub fn stage_shares(&self, state: usize) -> Vec<f64> {
        let total = self.pooled.row_total(state) as f64;
        self.tables
            .iter()
            .map(|t| {
                if total > 0.0 {
                    t[state].iter().sum::<u64>() as f64 / total
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Groups records into strata.
///
/// The first state seen is the control state. The one readout label that is
/// not a state label is the Negative readout. States whose label is also a
/// readout come next, in order of first appearance, followed by the
/// remaining states. Repeated cells are summed.
pub fn partition_by_stratum(records: &[StratumRecord]) -> Result<StratifiedRecords> {
    if records.is_empty() {
        return Err(Error::Shape("no records".into()));
    }
    for (i, r) in records.iter().enumerate() {
        if r.count < 0 {
            return Err(Error::NegativeCount {
                row: i,
                col: 0,
                value: r.count,
            });
        }
    }
    let mut states: Vec<&str> = Vec::new();
    let mut readouts: Vec<&str> = Vec::new();
    let mut strata: Vec<String> = Vec::new();
    for r in records {
        if !states.contains(&r.state.as_str()) {
            states.push(&r.state);
        }
        if !readouts.contains(&r.readout.as_str()) {
            readouts.push(&r.readout);
        }
        if !strata.contains(&r.stratum) {
            strata.push(r.stratum.clone());
        }
    }
    let control = states[0];
    let negatives: Vec<&str> = readouts.iter().copied().filter(|r| !states.contains(r)).collect();
    if negatives.len() != 1 {
        return Err(Error::Shape(format!(
            "expected exactly one readout label that is not a state label, found {negatives:?}"
        )));
    }
    if readouts.contains(&control) {
        return Err(Error::LabelMismatch {
            index: 0,
            state: control.to_string(),
            readout: control.to_string(),
        });
    }
    let mut state_order = vec![control];
    state_order.extend(states[1..].iter().copied().filter(|s| readouts.contains(s)));
    state_order.extend(states[1..].iter().copied().filter(|s| !readouts.contains(s)));
    let mut readout_order = vec![negatives[0]];
    readout_order.extend(state_order[1..].iter().copied().filter(|s| readouts.contains(s)));

    let row_of: BTreeMap<&str, usize> = state_order.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let col_of: BTreeMap<&str, usize> = readout_order.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let stratum_of: BTreeMap<&str, usize> = strata.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let blank = vec![vec![0u64; readout_order.len()]; state_order.len()];
    let mut tables = vec![blank.clone(); strata.len()];
    let mut pooled = blank;
    for r in records {
        let (j, k, s) = (row_of[r.state.as_str()], col_of[r.readout.as_str()], stratum_of[r.stratum.as_str()]);
        tables[s][j][k] += r.count as u64;
        pooled[j][k] += r.count as u64;
    }
    let pooled = CountMatrix::from_counts(
        pooled,
        state_order.iter().map(|s| s.to_string()).collect(),
        readout_order.iter().map(|s| s.to_string()).collect(),
    )?;
    Ok(StratifiedRecords {
        strata,
        tables,
        pooled,
    })
}

struct StageInputs {
    /// `phi_k` without the pooled `A_kk`.
    base: Vec<f64>,
    /// Index of `A_kk` inside the full `phi_k`.
    skip: usize,
    a0: f64,
    a1: f64,
    q0: f64,
    prob_positive: f64,
    overall: f64,
}

impl StageInputs {
    fn psi(&self) -> Vec<f64> {
        let mut psi = self.base.clone();
        psi.extend([self.a0, self.a1, self.q0]);
        psi
    }

    /// `Z = logit(PVP_k(s0))` as a function of `psi`.
    fn z(&self, psi: &[f64]) -> f64 {
        let n = self.base.len();
        let (a0, a1, q0) = (psi[n], psi[n + 1], psi[n + 2]);
        let mut phi = psi[..n].to_vec();
        let a_kk = (a0 * q0 + a1 * (1.0 - q0)) / self.prob_positive;
        phi.insert(self.skip, a_kk);
        let j_count = phi.len() / 2;
        let share = if self.skip < j_count {
            phi[j_count + self.skip]
        } else {
            1.0 - phi[j_count + 1..].iter().sum::<f64>()
        };
        let part = a0 * q0 * share * self.overall / self.prob_positive;
        let cases: f64 = (1..=j_count)
            .map(|j| {
                let p = if j < j_count {
                    phi[j_count + j]
                } else {
                    1.0 - phi[j_count + 1..].iter().sum::<f64>()
                };
                phi[j] * p
            })
            .sum();
        let den = phi[0] * (1.0 - self.overall) + self.overall * cases;
        (part / (den - part)).ln()
    }

    fn point(&self) -> f64 {
        expit(self.z(&self.psi()))
    }
}

fn central_gradient(f: impl Fn(&[f64]) -> f64, at: &[f64]) -> Vec<f64> {
    let mut x = at.to_vec();
    (0..at.len())
        .map(|i| {
            let h = STAGE_GRADIENT_STEP;
            x[i] = at[i] + h;
            let up = f(&x);
            x[i] = at[i] - h;
            let down = f(&x);
            x[i] = at[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Stage-specific predictive value of readout `k` restricted to stratum `s0`.
pub fn stage_pvp_estimate(
    records: &StratifiedRecords,
    adjusted: &AdjustedControlRow,
    incidence: &IncidenceSpec,
    readout: usize,
    stratum: usize,
    alpha: f64,
) -> Result<PredictiveEstimate> {
    let matrix = records.pooled();
    if readout == 0 || readout > matrix.num_readouts() {
        return Err(Error::Domain(format!("readout {readout} has no matching state")));
    }
    if stratum >= records.strata.len() {
        return Err(Error::Domain(format!("stratum index {stratum} out of range")));
    }
    let k = readout;
    let n_total = matrix.row_total(k);
    let n_stage: u64 = records.tables[stratum][k].iter().sum();
    if n_stage == 0 {
        return Err(Error::EmptyStratum {
            stratum: records.strata[stratum].clone(),
            state: matrix.state_labels()[k].clone(),
        });
    }
    let ctx = PredictiveContext::new(matrix, adjusted, incidence)?;
    let prob_positive = ctx.row_prob_positive(k);
    if !(prob_positive > 0.0) {
        return Err(Error::ZeroDenominator(format!("P(n_{k}+ > 0)")));
    }
    let phi = ctx.phi(k);
    let cov = ctx.covariance(k);
    let x_stage = records.tables[stratum][k][k];
    let n_rest = n_total - n_stage;
    let x_rest = matrix.count(k, k) - x_stage;

    let mut base = phi.values.clone();
    base.remove(k);
    let build = |x0: f64, n0: f64, x1: f64, n1: f64| StageInputs {
        base: base.clone(),
        skip: k,
        a0: x0 / n0,
        a1: if n1 > 0.0 { x1 / n1 } else { 0.0 },
        q0: n0 / (n0 + n1),
        prob_positive,
        overall: ctx.overall(),
    };
    let inputs = build(x_stage as f64, n_stage as f64, x_rest as f64, n_rest as f64);
    let point = inputs.point();

    let variance_of = |inputs: &StageInputs, n0: f64, n1: f64| -> f64 {
        let psi = inputs.psi();
        let g = central_gradient(|x| inputs.z(x), &psi);
        let dim = psi.len();
        let phi_idx = |i: usize| if i < k { i } else { i + 1 };
        let mut v = 0.0;
        for a in 0..dim - 3 {
            for b in 0..dim - 3 {
                v += g[a] * g[b] * cov.get(phi_idx(a), phi_idx(b));
            }
        }
        let (a0, a1, q0) = (inputs.a0, inputs.a1, inputs.q0);
        v += g[dim - 3].powi(2) * a0 * (1.0 - a0) / n0;
        if n1 > 0.0 {
            v += g[dim - 2].powi(2) * a1 * (1.0 - a1) / n1;
        }
        v += g[dim - 1].powi(2) * q0 * (1.0 - q0) / (n0 + n1);
        v
    };

    let usable = |p: f64, v: f64| p > 0.0 && p < 1.0 && v.is_finite() && v >= 0.0;
    let variance = variance_of(&inputs, n_stage as f64, n_rest as f64);
    let (logit_variance, mut interval) = if usable(point, variance) {
        (variance, wald_logit_interval(point, variance, alpha))
    } else {
        // Half-count the stage cells and rebuild the interval around the raw point.
        let (n0, n1) = (n_stage as f64 + 1.0, n_rest as f64 + if n_rest > 0 { 1.0 } else { 0.0 });
        let alt = build(x_stage as f64 + 0.5, n0, x_rest as f64 + 0.5, n1);
        let alt_point = alt.point();
        let alt_var = variance_of(&alt, n0, n1);
        let mut ci = if usable(alt_point, alt_var) {
            wald_logit_interval(alt_point, alt_var, alpha)
                .repoint(point)
                .with_flag(Flag::AdjustedForInterval)
        } else {
            wald_logit_interval(point, f64::NAN, alpha)
        };
        ci.method = Method::Degenerate;
        ci.flags.insert(Flag::DegenerateProportion);
        (alt_var, ci)
    };
    interval.flags.insert(Flag::BlockDiagonalCovariance);
    if ctx.is_adjusted() {
        interval.flags.insert(Flag::AdjustedControls);
    }
    if ctx.fixed() {
        interval.flags.insert(Flag::FixedIncidence);
    }
    Ok(PredictiveEstimate {
        readout,
        metric: PredictiveMetric::Pvp,
        point,
        logit_variance,
        interval,
        incidence_mode: incidence.mode(),
        adjusted_controls: ctx.is_adjusted(),
    })
}
