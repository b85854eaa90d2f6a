//! Predictive values `PVP_k = P(D_k | T_k)` and `PVN_k = P(D_0 | T_k)`.
//!
//! Case-control data identify the conditional readout rates but not the
//! disease incidence, so predictive values are assembled by Bayes' rule from
//! the parameter vector
//!
//! ```text
//! phi_k = [P(T_k|D_0), P(T_k|D_1), ..., P(T_k|D_J), P(D_1|D), ..., P(D_{J-1}|D)]
//! ```
//!
//! and a supplied overall incidence `P(D)`. `P(D_J|D)` is always the
//! remainder `1 - sum_{j<J} P(D_j|D)`. Intervals are Wald intervals on the
//! logit scale with delta-method variances `g' V g`.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::accuracy::RowLaw;
use crate::counts::{case_shares, AdjustedControlRow, CountMatrix};
use crate::error::{Error, Result};
use crate::kernels::{wald_logit_interval, EstimateInterval, Flag, Method};

/// Where the conditional shares `P(D_j | D)` come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncidenceMode {
    /// Estimated from the case block; random.
    Sample,
    /// Taken from an external registry; fixed.
    Registry,
}

impl FromStr for IncidenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sample" => Ok(IncidenceMode::Sample),
            "registry" => Ok(IncidenceMode::Registry),
            other => Err(Error::InvalidIncidence(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for IncidenceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IncidenceMode::Sample => "sample",
            IncidenceMode::Registry => "registry",
        })
    }
}

/// Overall incidence and the source of the conditional case shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidenceSpec {
    overall: f64,
    mode: IncidenceMode,
    registry_shares: Option<Vec<f64>>,
}

impl IncidenceSpec {
    pub fn sample(overall: f64) -> Result<Self> {
        Self::new(overall, IncidenceMode::Sample, None)
    }

    pub fn registry(overall: f64, shares: Vec<f64>) -> Result<Self> {
        Self::new(overall, IncidenceMode::Registry, Some(shares))
    }

    pub fn new(overall: f64, mode: IncidenceMode, registry_shares: Option<Vec<f64>>) -> Result<Self> {
        if !(overall > 0.0 && overall < 1.0) {
            return Err(Error::InvalidIncidence(format!(
                "overall incidence must lie in (0, 1), got {overall}"
            )));
        }
        match (mode, &registry_shares) {
            (IncidenceMode::Sample, Some(_)) => {
                return Err(Error::InvalidIncidence(
                    "registry shares given in sample mode".into(),
                ))
            }
            (IncidenceMode::Registry, None) => {
                return Err(Error::InvalidIncidence(
                    "registry mode needs registry shares".into(),
                ))
            }
            (IncidenceMode::Registry, Some(shares)) => {
                if shares.iter().any(|s| !(0.0..=1.0).contains(s)) {
                    return Err(Error::InvalidIncidence(
                        "registry shares must lie in [0, 1]".into(),
                    ));
                }
                let total: f64 = shares.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidIncidence(format!(
                        "registry shares sum to {total}, not 1"
                    )));
                }
            }
            (IncidenceMode::Sample, None) => {}
        }
        Ok(IncidenceSpec {
            overall,
            mode,
            registry_shares,
        })
    }

    pub fn overall(&self) -> f64 {
        self.overall
    }

    pub fn mode(&self) -> IncidenceMode {
        self.mode
    }

    pub fn registry_shares(&self) -> Option<&[f64]> {
        self.registry_shares.as_deref()
    }

    pub fn is_fixed(&self) -> bool {
        self.mode == IncidenceMode::Registry
    }
}

/// The `2J` parameters that determine the predictive values of readout `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiVector {
    pub readout: usize,
    pub values: Vec<f64>,
}

impl PhiVector {
    pub fn new(readout: usize, control_rate: f64, accuracies: &[f64], leading_shares: &[f64]) -> Result<Self> {
        if accuracies.is_empty() || leading_shares.len() + 1 != accuracies.len() {
            return Err(Error::DimensionMismatch {
                expected: accuracies.len().saturating_sub(1),
                actual: leading_shares.len(),
            });
        }
        let mut values = Vec::with_capacity(2 * accuracies.len());
        values.push(control_rate);
        values.extend_from_slice(accuracies);
        values.extend_from_slice(leading_shares);
        Ok(PhiVector { readout, values })
    }

    pub fn num_states(&self) -> usize {
        self.values.len() / 2
    }

    pub fn control_rate(&self) -> f64 {
        self.values[0]
    }

    /// `P(T_k | D_j)` for `j` in `1..=J`.
    pub fn accuracy(&self, state: usize) -> f64 {
        self.values[state]
    }

    /// `P(D_j | D)` for `j` in `1..=J`; the last is the remainder.
    pub fn share(&self, state: usize) -> f64 {
        share_of(&self.values, self.num_states(), state)
    }

    /// `P(T_k)` given overall incidence `pd`.
    pub fn marginal(&self, pd: f64) -> f64 {
        marginal_of(&self.values, self.num_states(), pd)
    }

    /// `P(D_j | T_k)` for `j` in `1..=J`.
    pub fn posterior_state(&self, state: usize, pd: f64) -> Result<f64> {
        let den = self.marginal(pd);
        if den <= 0.0 {
            return Err(Error::ZeroDenominator(format!("P(T_{})", self.readout)));
        }
        Ok(self.accuracy(state) * self.share(state) * pd / den)
    }
}

fn share_of(values: &[f64], j_count: usize, state: usize) -> f64 {
    if state < j_count {
        values[j_count + state]
    } else {
        1.0 - values[j_count + 1..].iter().sum::<f64>()
    }
}

fn marginal_of(values: &[f64], j_count: usize, pd: f64) -> f64 {
    let cases: f64 = (1..=j_count)
        .map(|j| values[j] * share_of(values, j_count, j))
        .sum();
    values[0] * (1.0 - pd) + pd * cases
}

/// `PVP_k` as a function of a raw parameter slice; used by the gradient
/// oracles as well as the estimators.
pub fn pvp_of(values: &[f64], readout: usize, pd: f64) -> f64 {
    let j_count = values.len() / 2;
    values[readout] * share_of(values, j_count, readout) * pd / marginal_of(values, j_count, pd)
}

/// `PVN_k` as a function of a raw parameter slice.
pub fn pvn_of(values: &[f64], pd: f64) -> f64 {
    let j_count = values.len() / 2;
    values[0] * (1.0 - pd) / marginal_of(values, j_count, pd)
}

fn logit_of(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `logit(PVP_k)` on a raw parameter slice.
pub fn u_of(values: &[f64], readout: usize, pd: f64) -> f64 {
    logit_of(pvp_of(values, readout, pd))
}

/// `logit(PVN_k)` on a raw parameter slice.
pub fn w_of(values: &[f64], pd: f64) -> f64 {
    logit_of(pvn_of(values, pd))
}

pub fn pvp_point(phi: &PhiVector, incidence: &IncidenceSpec) -> Result<f64> {
    let k = phi.readout;
    if k == 0 || k > phi.num_states() {
        return Err(Error::Domain(format!("PVP needs a positive readout, got {k}")));
    }
    let den = phi.marginal(incidence.overall());
    if den <= 0.0 {
        return Err(Error::ZeroDenominator(format!("P(T_{k})")));
    }
    Ok(pvp_of(&phi.values, k, incidence.overall()))
}

pub fn pvn_point(phi: &PhiVector, incidence: &IncidenceSpec) -> Result<f64> {
    let den = phi.marginal(incidence.overall());
    if den <= 0.0 {
        return Err(Error::ZeroDenominator(format!("P(T_{})", phi.readout)));
    }
    Ok(pvn_of(&phi.values, incidence.overall()))
}

fn interior(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} is {value}; gradient undefined")))
    }
}

/// Gradient of `logit(PVP_k)` with respect to `phi_k`.
///
/// Registry mode returns zeros for the share entries.
pub fn gradient_u(phi: &PhiVector, incidence: &IncidenceSpec) -> Result<Vec<f64>> {
    let k = phi.readout;
    let j_count = phi.num_states();
    if k == 0 || k > j_count {
        return Err(Error::Domain(format!("PVP needs a positive readout, got {k}")));
    }
    let pd = incidence.overall();
    let a_k = phi.accuracy(k);
    let p_k = phi.share(k);
    let numerator = a_k * p_k * pd;
    let rest = phi.marginal(pd) - numerator;
    interior("P(T_k|D_k)", a_k)?;
    interior("P(D_k|D)", p_k)?;
    interior("R_U", rest)?;

    let mut g = vec![0.0; 2 * j_count];
    g[0] = -(1.0 - pd) / rest;
    for j in 1..=j_count {
        g[j] = if j == k {
            1.0 / a_k
        } else {
            -pd * phi.share(j) / rest
        };
    }
    if !incidence.is_fixed() {
        let a_last = phi.accuracy(j_count);
        for m in 1..j_count {
            // d(log num)/dp_m, then d(log R_U)/dp_m with p_J = 1 - sum p.
            let mut d_num = 0.0;
            if m == k {
                d_num += 1.0 / p_k;
            }
            if k == j_count {
                d_num -= 1.0 / p_k;
            }
            let mut d_rest = 0.0;
            if m != k {
                d_rest += phi.accuracy(m);
            }
            if k != j_count {
                d_rest -= a_last;
            }
            g[j_count + m] = d_num - pd * d_rest / rest;
        }
    }
    Ok(g)
}

/// Gradient of `logit(PVN_k)` with respect to `phi_k`.
pub fn gradient_w(phi: &PhiVector, incidence: &IncidenceSpec) -> Result<Vec<f64>> {
    let j_count = phi.num_states();
    let pd = incidence.overall();
    let beta = phi.control_rate();
    let cases = phi.marginal(pd) - beta * (1.0 - pd);
    interior("P(T_k|D_0)", beta)?;
    interior("R_W", cases)?;

    let mut g = vec![0.0; 2 * j_count];
    g[0] = 1.0 / beta;
    for j in 1..=j_count {
        g[j] = -pd * phi.share(j) / cases;
    }
    if !incidence.is_fixed() {
        let a_last = phi.accuracy(j_count);
        for m in 1..j_count {
            g[j_count + m] = -pd * (phi.accuracy(m) - a_last) / cases;
        }
    }
    Ok(g)
}

/// Symmetric `2J x 2J` covariance of the estimated `phi_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiCovariance {
    pub dim: usize,
    /// Row-major entries.
    pub values: Vec<f64>,
}

impl PhiCovariance {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.dim + col]
    }

    fn set_sym(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.dim + col] = v;
        self.values[col * self.dim + row] = v;
    }

    /// `g' V g`.
    pub fn quadratic_form(&self, g: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, gi) in g.iter().enumerate() {
            if *gi == 0.0 {
                continue;
            }
            let row = &self.values[i * self.dim..(i + 1) * self.dim];
            acc += gi * row.iter().zip(g).map(|(v, gj)| v * gj).sum::<f64>();
        }
        acc
    }
}

/// Assembles the covariance from its blocks: the control-rate binomial
/// variance, `diag(sigma2)` for the accuracies, the accuracy/share
/// cross-covariances `eta` on the leading diagonal, and the multinomial
/// covariance of the leading shares. Fixed shares zero the last two blocks.
pub fn assemble_covariance(
    controls: u64,
    cases: u64,
    phi: &PhiVector,
    sigma2: &[f64],
    eta: &[f64],
    fixed_shares: bool,
) -> Result<PhiCovariance> {
    let j_count = phi.num_states();
    if sigma2.len() != j_count {
        return Err(Error::DimensionMismatch {
            expected: j_count,
            actual: sigma2.len(),
        });
    }
    if eta.len() + 1 != j_count {
        return Err(Error::DimensionMismatch {
            expected: j_count - 1,
            actual: eta.len(),
        });
    }
    let dim = 2 * j_count;
    let mut cov = PhiCovariance {
        dim,
        values: vec![0.0; dim * dim],
    };
    let beta = phi.control_rate();
    cov.set_sym(0, 0, beta * (1.0 - beta) / controls as f64);
    for (j, s) in sigma2.iter().enumerate() {
        cov.set_sym(1 + j, 1 + j, *s);
    }
    if !fixed_shares {
        let n1 = cases as f64;
        for (j, e) in eta.iter().enumerate() {
            cov.set_sym(1 + j, j_count + 1 + j, *e);
        }
        for a in 1..j_count {
            for b in a..j_count {
                let va = phi.values[j_count + a];
                let vb = phi.values[j_count + b];
                let v = if a == b { va - va * vb } else { -va * vb };
                cov.set_sym(j_count + a, j_count + b, v / n1);
            }
        }
    }
    Ok(cov)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictiveMetric {
    Pvp,
    Pvn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveEstimate {
    pub readout: usize,
    pub metric: PredictiveMetric,
    pub point: f64,
    pub logit_variance: f64,
    pub interval: EstimateInterval,
    pub incidence_mode: IncidenceMode,
    pub adjusted_controls: bool,
}

/// Everything needed to evaluate `phi_k`, its covariance and the predictive
/// values for every readout of one table. Row laws are computed once.
#[derive(Debug, Clone)]
pub struct PredictiveContext {
    overall: f64,
    mode: IncidenceMode,
    controls: u64,
    cases: u64,
    raw_control_row: Vec<f64>,
    control_shares: Vec<f64>,
    adjusted_controls: bool,
    shares: Vec<f64>,
    laws: Vec<Option<RowLaw>>,
    case_rows: Vec<Vec<f64>>,
    case_totals: Vec<f64>,
}

impl PredictiveContext {
    pub fn new(matrix: &CountMatrix, adjusted: &AdjustedControlRow, incidence: &IncidenceSpec) -> Result<Self> {
        let j_count = matrix.num_states();
        if adjusted.adjusted_counts.len() != matrix.num_readouts() + 1 {
            return Err(Error::DimensionMismatch {
                expected: matrix.num_readouts() + 1,
                actual: adjusted.adjusted_counts.len(),
            });
        }
        let shares = match incidence.registry_shares() {
            Some(s) => {
                if s.len() != j_count {
                    return Err(Error::DimensionMismatch {
                        expected: j_count,
                        actual: s.len(),
                    });
                }
                s.to_vec()
            }
            None => case_shares(matrix)?.shares,
        };
        let cases = matrix.cases();
        let laws = shares
            .iter()
            .map(|&s| {
                if s > 0.0 {
                    RowLaw::new(cases, s.min(1.0)).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let case_rows: Vec<Vec<f64>> = (1..=j_count)
            .map(|j| matrix.row(j).iter().map(|&c| c as f64).collect())
            .collect();
        let case_totals = (1..=j_count).map(|j| matrix.row_total(j) as f64).collect();
        Ok(PredictiveContext {
            overall: incidence.overall(),
            mode: incidence.mode(),
            controls: matrix.controls(),
            cases,
            raw_control_row: matrix.row(0).iter().map(|&c| c as f64).collect(),
            control_shares: adjusted.shares(),
            adjusted_controls: adjusted.applied,
            shares,
            laws,
            case_rows,
            case_totals,
        })
    }

    fn num_states(&self) -> usize {
        self.case_rows.len()
    }

    pub(crate) fn overall(&self) -> f64 {
        self.overall
    }

    pub(crate) fn is_adjusted(&self) -> bool {
        self.adjusted_controls
    }

    /// `P(n_j+ > 0)`, or 0 when the state has no mass.
    pub(crate) fn row_prob_positive(&self, state: usize) -> f64 {
        self.laws[state - 1].map_or(0.0, |l| l.prob_positive)
    }

    fn num_readouts(&self) -> usize {
        self.raw_control_row.len() - 1
    }

    pub(crate) fn fixed(&self) -> bool {
        self.mode == IncidenceMode::Registry
    }

    fn incidence(&self) -> IncidenceSpec {
        IncidenceSpec {
            overall: self.overall,
            mode: self.mode,
            registry_shares: self.fixed().then(|| self.shares.clone()),
        }
    }

    /// Copy with one half added to every control and case cell.
    fn with_half_counts(&self) -> Self {
        let mut out = self.clone();
        let cells = self.num_readouts() as f64 + 1.0;
        if !self.adjusted_controls {
            let total = self.controls as f64 + 0.5 * cells;
            out.control_shares = self.raw_control_row.iter().map(|c| (c + 0.5) / total).collect();
        }
        for (row, total) in out.case_rows.iter_mut().zip(out.case_totals.iter_mut()) {
            row.iter_mut().for_each(|c| *c += 0.5);
            *total += 0.5 * cells;
        }
        out
    }

    /// `(A_jk, sigma2_jk, eta_jj)` for state `j`.
    fn accuracy_terms(&self, state: usize, readout: usize) -> (f64, f64, f64) {
        let idx = state - 1;
        match self.laws[idx] {
            Some(law) if self.case_totals[idx] > 0.0 => {
                let a = self.case_rows[idx][readout] / self.case_totals[idx] / law.prob_positive;
                let eta = a * (law.mean_given_positive / self.cases as f64 - self.shares[idx]);
                (a, law.sigma2(a), eta)
            }
            _ => (0.0, 0.0, 0.0),
        }
    }

    pub fn phi(&self, readout: usize) -> PhiVector {
        let j_count = self.num_states();
        let accuracies: Vec<f64> = (1..=j_count).map(|j| self.accuracy_terms(j, readout).0).collect();
        let mut values = Vec::with_capacity(2 * j_count);
        values.push(self.control_shares[readout]);
        values.extend(accuracies);
        values.extend_from_slice(&self.shares[..j_count - 1]);
        PhiVector { readout, values }
    }

    pub fn covariance(&self, readout: usize) -> PhiCovariance {
        let j_count = self.num_states();
        let phi = self.phi(readout);
        let terms: Vec<(f64, f64, f64)> = (1..=j_count).map(|j| self.accuracy_terms(j, readout)).collect();
        let sigma2: Vec<f64> = terms.iter().map(|t| t.1).collect();
        let eta: Vec<f64> = terms[..j_count - 1].iter().map(|t| t.2).collect();
        assemble_covariance(self.controls, self.cases, &phi, &sigma2, &eta, self.fixed())
            .expect("dimensions are consistent by construction")
    }

    fn point_and_variance(&self, readout: usize, metric: PredictiveMetric) -> Result<(f64, Option<f64>)> {
        let incidence = self.incidence();
        let phi = self.phi(readout);
        let point = match metric {
            PredictiveMetric::Pvp => pvp_point(&phi, &incidence)?,
            PredictiveMetric::Pvn => pvn_point(&phi, &incidence)?,
        };
        let gradient = match metric {
            PredictiveMetric::Pvp => gradient_u(&phi, &incidence),
            PredictiveMetric::Pvn => gradient_w(&phi, &incidence),
        };
        let variance = gradient
            .ok()
            .map(|g| self.covariance(readout).quadratic_form(&g))
            .filter(|v| v.is_finite() && *v >= 0.0);
        Ok((point, variance))
    }

    pub fn estimate(&self, readout: usize, metric: PredictiveMetric, alpha: f64) -> Result<PredictiveEstimate> {
        if readout > self.num_readouts() || (metric == PredictiveMetric::Pvp && readout == 0) {
            return Err(Error::Domain(format!("readout {readout} invalid for {metric:?}")));
        }
        let (point, variance) = self.point_and_variance(readout, metric)?;
        let regular = variance
            .filter(|_| point > 0.0 && point < 1.0)
            .map(|v| (v, wald_logit_interval(point, v, alpha)))
            .filter(|(_, ci)| ci.method != Method::Degenerate);
        let (logit_variance, mut interval) = match regular {
            Some(found) => found,
            None => {
                let alt = self.with_half_counts();
                let fallback = alt.point_and_variance(readout, metric).ok().and_then(|(p, v)| v.map(|v| (p, v)));
                let mut ci = match fallback {
                    Some((p, v)) => wald_logit_interval(p, v, alpha)
                        .repoint(point)
                        .with_flag(Flag::AdjustedForInterval),
                    None => wald_logit_interval(point, f64::NAN, alpha),
                };
                ci.method = Method::Degenerate;
                ci.flags.insert(Flag::DegenerateProportion);
                (fallback.map_or(f64::NAN, |f| f.1), ci)
            }
        };
        if self.adjusted_controls {
            interval.flags.insert(Flag::AdjustedControls);
        }
        if self.fixed() {
            interval.flags.insert(Flag::FixedIncidence);
        }
        Ok(PredictiveEstimate {
            readout,
            metric,
            point,
            logit_variance,
            interval,
            incidence_mode: self.mode,
            adjusted_controls: self.adjusted_controls,
        })
    }

    /// Pooled PVP over all positive readouts; point estimate only.
    pub fn overall_pvp(&self) -> Result<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for k in 1..=self.num_readouts() {
            let phi = self.phi(k);
            num += phi.accuracy(k) * phi.share(k) * self.overall;
            den += phi.marginal(self.overall);
        }
        if den <= 0.0 {
            return Err(Error::ZeroDenominator("sum of positive readout probabilities".into()));
        }
        Ok(num / den)
    }
}

/// `phi_k` estimated from a table.
pub fn build_phi(
    matrix: &CountMatrix,
    adjusted: &AdjustedControlRow,
    incidence: &IncidenceSpec,
    readout: usize,
) -> Result<PhiVector> {
    if readout > matrix.num_readouts() {
        return Err(Error::Domain(format!("readout {readout} out of range")));
    }
    Ok(PredictiveContext::new(matrix, adjusted, incidence)?.phi(readout))
}

pub fn phi_covariance(
    matrix: &CountMatrix,
    adjusted: &AdjustedControlRow,
    incidence: &IncidenceSpec,
    readout: usize,
) -> Result<PhiCovariance> {
    if readout > matrix.num_readouts() {
        return Err(Error::Domain(format!("readout {readout} out of range")));
    }
    Ok(PredictiveContext::new(matrix, adjusted, incidence)?.covariance(readout))
}

pub fn predictive_estimate(
    matrix: &CountMatrix,
    adjusted: &AdjustedControlRow,
    incidence: &IncidenceSpec,
    readout: usize,
    metric: PredictiveMetric,
    alpha: f64,
) -> Result<PredictiveEstimate> {
    PredictiveContext::new(matrix, adjusted, incidence)?.estimate(readout, metric, alpha)
}

pub fn overall_pvp_point(
    matrix: &CountMatrix,
    adjusted: &AdjustedControlRow,
    incidence: &IncidenceSpec,
) -> Result<f64> {
    PredictiveContext::new(matrix, adjusted, incidence)?.overall_pvp()
}
