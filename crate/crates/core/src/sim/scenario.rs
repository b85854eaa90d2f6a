use serde::{Deserialize, Serialize};

use crate::counts::AdjustPolicy;
use crate::error::{Error, Result};
use crate::predictive::{pvn_of, pvp_of, IncidenceMode};

fn default_alpha() -> f64 {
    0.05
}

fn default_mode() -> IncidenceMode {
    IncidenceMode::Sample
}

/// A simulation setting: sample sizes, true conditional readout rows and the
/// analysis options applied to every replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Number of controls.
    pub n0: u64,
    /// Number of cases.
    pub n1: u64,
    pub overall_incidence: f64,
    /// `P(D_j | D)` for `j < J`; the last state gets the remainder.
    pub case_shares: Vec<f64>,
    /// `P(T_k | D_j)` for `j = 0..=J`, each of length `K + 1`.
    pub rows: Vec<Vec<f64>>,
    pub replicates: u64,
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub incidence_mode: IncidenceMode,
    #[serde(default)]
    pub adjust_policy: AdjustPolicy,
    /// Second policy evaluated on the same replicates, for side-by-side tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_policy: Option<AdjustPolicy>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout_labels: Option<Vec<String>>,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ScenarioSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn num_states(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    pub fn num_readouts(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len().saturating_sub(1))
    }

    /// All `J` case shares including the remainder.
    pub fn full_shares(&self) -> Vec<f64> {
        let mut shares = self.case_shares.clone();
        shares.push(1.0 - self.case_shares.iter().sum::<f64>());
        shares
    }

    pub fn state_labels(&self) -> Vec<String> {
        self.state_labels.clone().unwrap_or_else(|| {
            std::iter::once("Control".to_string())
                .chain((1..=self.num_states()).map(|j| format!("D{j}")))
                .collect()
        })
    }

    pub fn readout_labels(&self) -> Vec<String> {
        self.readout_labels.clone().unwrap_or_else(|| {
            std::iter::once("Negative".to_string())
                .chain((1..=self.num_readouts()).map(|k| format!("D{k}")))
                .collect()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.rows.len() < 2 {
            return bad("need a control row and at least one case row".into());
        }
        let width = self.rows[0].len();
        if width < 2 || self.rows.iter().any(|r| r.len() != width) {
            return bad("rows must share a length of at least 2".into());
        }
        if self.num_readouts() > self.num_states() {
            return bad("more positive readouts than disease states".into());
        }
        for (j, row) in self.rows.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return bad(format!("row {j} has a probability outside [0, 1]"));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return bad(format!("row {j} sums to {total}"));
            }
        }
        if self.case_shares.len() + 1 != self.num_states() {
            return bad(format!(
                "{} case shares given for {} states; expected J - 1",
                self.case_shares.len(),
                self.num_states()
            ));
        }
        if self.case_shares.iter().any(|p| *p < 0.0) || self.case_shares.iter().sum::<f64>() > 1.0 + 1e-12 {
            return bad("case shares must be nonnegative and sum to at most 1".into());
        }
        if !(self.overall_incidence > 0.0 && self.overall_incidence < 1.0) {
            return bad("overall incidence must lie in (0, 1)".into());
        }
        if self.n0 == 0 || self.n1 == 0 {
            return bad("n0 and n1 must be positive".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)".into());
        }
        if self.state_labels.as_ref().is_some_and(|l| l.len() != self.rows.len())
            || self.readout_labels.as_ref().is_some_and(|l| l.len() != width)
        {
            return bad("label count does not match the rows".into());
        }
        Ok(())
    }

    /// `phi_k` at the true parameters.
    pub(crate) fn true_phi(&self, readout: usize) -> Vec<f64> {
        let mut phi = Vec::with_capacity(2 * self.num_states());
        phi.push(self.rows[0][readout]);
        phi.extend(self.rows[1..].iter().map(|r| r[readout]));
        phi.extend_from_slice(&self.case_shares);
        phi
    }
}

/// Metric identifiers in table order.
pub fn metric_ids(spec: &ScenarioSpec) -> Vec<String> {
    let k_count = spec.num_readouts();
    let mut ids = vec!["SP_0".to_string()];
    ids.extend((1..=k_count).map(|k| format!("A_{k}")));
    ids.push("PVN_0".into());
    ids.extend((1..=k_count).map(|k| format!("PVP_{k}")));
    ids.extend((0..=k_count).map(|k| format!("P(T_{k})")));
    ids
}

/// True value of every metric, in table order.
pub fn scenario_truth(spec: &ScenarioSpec) -> Result<Vec<(String, f64)>> {
    spec.validate()?;
    let k_count = spec.num_readouts();
    let pd = spec.overall_incidence;
    let shares = spec.full_shares();
    let mut values = vec![spec.rows[0][0]];
    values.extend((1..=k_count).map(|k| spec.rows[k][k]));
    values.push(pvn_of(&spec.true_phi(0), pd));
    values.extend((1..=k_count).map(|k| pvp_of(&spec.true_phi(k), k, pd)));
    for k in 0..=k_count {
        let cases: f64 = spec.rows[1..].iter().zip(&shares).map(|(r, p)| r[k] * p).sum();
        values.push(spec.rows[0][k] * (1.0 - pd) + cases * pd);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidScenario("true metrics are undefined".into()));
    }
    Ok(metric_ids(spec).into_iter().zip(values).collect())
}
