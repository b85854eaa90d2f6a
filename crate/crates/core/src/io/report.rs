use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::accuracy::{accuracy_estimate, aggregate_accuracy, control_rates, crude_sensitivity, false_negative_estimate};
use crate::counts::{adjust_control_counts, case_shares, collapse_cases, AdjustPolicy, CaseShareVector, CountMatrix, DEFAULT_ADJUST_THRESHOLD};
use crate::error::{Error, Result};
use crate::kernels::EstimateInterval;
use crate::marginal::marginal_estimate;
use crate::predictive::{IncidenceMode, IncidenceSpec, PredictiveContext, PredictiveMetric};

/// An interval, or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateInterval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MetricEntry {
    fn from_result(r: Result<EstimateInterval>) -> Self {
        match r {
            Ok(e) => MetricEntry {
                estimate: Some(e),
                error: None,
            },
            Err(e) => MetricEntry {
                estimate: None,
                error: Some(e.to_string()),
            },
        }
    }

    pub fn point(&self) -> Option<f64> {
        self.estimate.as_ref().map(|e| e.point)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub adjust_policy: AdjustPolicy,
    pub adjustment_applied: bool,
    pub incidence_mode: IncidenceMode,
    pub overall_incidence: f64,
    pub alpha: f64,
    pub controls: u64,
    pub cases: u64,
    pub matrix_sha256: String,
    pub incidence_sha256: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicRow {
    pub state: usize,
    pub label: String,
    pub cases: u64,
    pub false_negative: MetricEntry,
    pub crude_sensitivity: MetricEntry,
    /// Absent for states without a matching readout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<MetricEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlBlock {
    pub specificity: MetricEntry,
    /// Readouts `1..=K`.
    pub false_positive: Vec<MetricEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveRow {
    pub readout: usize,
    pub label: String,
    /// Absent for the Negative readout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pvp: Option<MetricEntry>,
    pub pvn: MetricEntry,
    pub marginal: MetricEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub provenance: Provenance,
    pub intrinsic: Vec<IntrinsicRow>,
    pub control: ControlBlock,
    pub readouts: Vec<PredictiveRow>,
    pub aggregate_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overall_pvp: Option<f64>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    format!("{:x}", Sha256::digest(bytes))
}

/// Runs every estimator on one table. Per-metric failures are recorded in
/// the report rather than aborting the analysis.
pub fn analyze_matrix(
    matrix: &CountMatrix,
    incidence: &IncidenceSpec,
    alpha: f64,
    policy: AdjustPolicy,
    matrix_bytes: &[u8],
    incidence_bytes: &[u8],
) -> Result<AnalysisReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let adjusted = adjust_control_counts(matrix, policy, DEFAULT_ADJUST_THRESHOLD);
    let shares = match incidence.registry_shares() {
        Some(s) => CaseShareVector {
            shares: s.to_vec(),
            basis: matrix.cases(),
        },
        None => case_shares(matrix)?,
    };
    let k_count = matrix.num_readouts();
    let labels = matrix.state_labels();

    let intrinsic = (1..=matrix.num_states())
        .map(|j| IntrinsicRow {
            state: j,
            label: labels[j].clone(),
            cases: matrix.row_total(j),
            false_negative: MetricEntry::from_result(false_negative_estimate(matrix, j, &shares, alpha).map(|e| e.interval)),
            crude_sensitivity: MetricEntry::from_result(crude_sensitivity(matrix, j, &shares, alpha)),
            accuracy: (j <= k_count)
                .then(|| MetricEntry::from_result(accuracy_estimate(matrix, j, j, &shares, alpha).map(|e| e.interval))),
        })
        .collect();

    let control = match control_rates(matrix, &adjusted, alpha) {
        Ok(rates) => ControlBlock {
            specificity: MetricEntry::from_result(Ok(rates.specificity)),
            false_positive: rates.false_positive[1..]
                .iter()
                .map(|c| MetricEntry::from_result(Ok(c.clone())))
                .collect(),
        },
        Err(e) => ControlBlock {
            specificity: MetricEntry::from_result(Err(e.clone())),
            false_positive: (1..=k_count).map(|_| MetricEntry::from_result(Err(e.clone()))).collect(),
        },
    };

    let ctx = PredictiveContext::new(matrix, &adjusted, incidence);
    let predictive = |k: usize, metric: PredictiveMetric| {
        MetricEntry::from_result(
            ctx.as_ref()
                .map_err(Clone::clone)
                .and_then(|c| c.estimate(k, metric, alpha))
                .map(|e| e.interval),
        )
    };
    let collapsed = collapse_cases(matrix);
    let readouts = (0..=k_count)
        .map(|k| PredictiveRow {
            readout: k,
            label: matrix.readout_labels()[k].clone(),
            pvp: (k > 0).then(|| predictive(k, PredictiveMetric::Pvp)),
            pvn: predictive(k, PredictiveMetric::Pvn),
            marginal: MetricEntry::from_result(marginal_estimate(&collapsed, &adjusted, incidence.overall(), k, alpha)),
        })
        .collect();
    let overall_pvp = ctx.as_ref().ok().and_then(|c| c.overall_pvp().ok());

    Ok(AnalysisReport {
        provenance: Provenance {
            adjust_policy: policy,
            adjustment_applied: adjusted.applied,
            incidence_mode: incidence.mode(),
            overall_incidence: incidence.overall(),
            alpha,
            controls: matrix.controls(),
            cases: matrix.cases(),
            matrix_sha256: sha256_hex(matrix_bytes),
            incidence_sha256: sha256_hex(incidence_bytes),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        intrinsic,
        control,
        readouts,
        aggregate_accuracy: aggregate_accuracy(matrix)?,
        overall_pvp,
    })
}

fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// Rounds every float in a JSON tree to six significant digits.
pub fn round_json(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().unwrap_or(0.0), 6);
            if let Some(num) = serde_json::Number::from_f64(r) {
                *n = num;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Pretty JSON with sorted keys and six significant digits.
pub fn to_stable_json<T: Serialize>(value: &T) -> Result<String> {
    let mut tree = serde_json::to_value(value).map_err(|e| Error::Domain(e.to_string()))?;
    round_json(&mut tree);
    let mut text = serde_json::to_string_pretty(&tree).map_err(|e| Error::Domain(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn pct(x: f64, decimals: usize) -> String {
    format!("{:.*}", decimals, 100.0 * x)
}

fn csv_text(rows: Vec<Vec<String>>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn interval_cells(entry: Option<&MetricEntry>, decimals: usize) -> [String; 3] {
    match entry.and_then(|e| e.estimate.as_ref()) {
        Some(e) => [pct(e.point, decimals), pct(e.lower, decimals), pct(e.upper, decimals)],
        None => [String::new(), String::new(), String::new()],
    }
}

/// False-negative proportion and intrinsic accuracy with its interval, in
/// percent, one row per state that has a matching readout.
pub fn intrinsic_csv(report: &AnalysisReport) -> String {
    let mut rows = vec![vec![
        "state".to_string(),
        "false_negative".into(),
        "accuracy".into(),
        "accuracy_lower".into(),
        "accuracy_upper".into(),
    ]];
    for r in report.intrinsic.iter().filter(|r| r.accuracy.is_some()) {
        let [fnr, ..] = interval_cells(Some(&r.false_negative), 1);
        let [a, lo, hi] = interval_cells(r.accuracy.as_ref(), 1);
        rows.push(vec![r.label.clone(), fnr, a, lo, hi]);
    }
    csv_text(rows)
}

/// Marginal readout distribution and predictive value (PVN for the
/// Negative readout, PVP otherwise), in percent.
pub fn readout_csv(report: &AnalysisReport) -> String {
    let mut rows = vec![vec![
        "readout".to_string(),
        "marginal".into(),
        "marginal_lower".into(),
        "marginal_upper".into(),
        "predictive_metric".into(),
        "predictive".into(),
        "predictive_lower".into(),
        "predictive_upper".into(),
    ]];
    for r in &report.readouts {
        let [m, mlo, mhi] = interval_cells(Some(&r.marginal), 1);
        let (name, entry) = match &r.pvp {
            Some(p) => ("PVP", p),
            None => ("PVN", &r.pvn),
        };
        let [p, plo, phi] = interval_cells(Some(entry), 1);
        rows.push(vec![r.label.clone(), m, mlo, mhi, name.into(), p, plo, phi]);
    }
    csv_text(rows)
}

/// One point of the benefit (intrinsic accuracy) versus cost (`1 - PVP`) plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBenefitPoint {
    pub readout: String,
    pub benefit: f64,
    pub cost: f64,
    pub in_target_region: bool,
}

pub fn cost_benefit_points(report: &AnalysisReport) -> Result<Vec<CostBenefitPoint>> {
    report
        .readouts
        .iter()
        .filter_map(|r| r.pvp.as_ref().map(|p| (r, p)))
        .map(|(r, pvp)| {
            let benefit = report
                .intrinsic
                .iter()
                .find(|i| i.state == r.readout)
                .and_then(|i| i.accuracy.as_ref())
                .and_then(MetricEntry::point)
                .ok_or_else(|| Error::Domain(format!("no accuracy estimate for {}", r.label)))?;
            let pvp = pvp
                .point()
                .ok_or_else(|| Error::Domain(format!("no PVP estimate for {}", r.label)))?;
            let benefit = benefit.clamp(0.0, 1.0);
            let cost = (1.0 - pvp).clamp(0.0, 1.0);
            Ok(CostBenefitPoint {
                readout: r.label.clone(),
                benefit,
                cost,
                in_target_region: benefit >= 0.5 && cost <= 0.5,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{liu2020, LIU2020_CSV};

    fn liu_report(alpha: f64) -> AnalysisReport {
        let inc = IncidenceSpec::sample(0.0133).unwrap();
        analyze_matrix(&liu2020(), &inc, alpha, AdjustPolicy::Auto, LIU2020_CSV.as_bytes(), b"{}").unwrap()
    }

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.123456789, 6), 0.123457);
        assert_eq!(round_sig(-98765.4321, 6), -98765.4);
        assert_eq!(round_sig(0.0, 6), 0.0);
    }

    #[test]
    fn report_is_deterministic() {
        let a = to_stable_json(&liu_report(0.05)).unwrap();
        let b = to_stable_json(&liu_report(0.05)).unwrap();
        assert_eq!(a, b);
        let back: AnalysisReport = serde_json::from_str(&a).unwrap();
        assert_eq!(back.intrinsic.len(), 10);
    }

    #[test]
    fn intervals_bracket_points() {
        let r = liu_report(0.05);
        assert!(r.provenance.adjustment_applied);
        let mut entries: Vec<&MetricEntry> = vec![&r.control.specificity];
        for i in &r.intrinsic {
            entries.extend([&i.false_negative, &i.crude_sensitivity]);
            entries.extend(i.accuracy.as_ref());
        }
        for p in &r.readouts {
            entries.extend([&p.pvn, &p.marginal]);
            entries.extend(p.pvp.as_ref());
        }
        for e in entries {
            let e = e.estimate.as_ref().unwrap();
            assert!(e.lower <= e.point && e.point <= e.upper, "{e:?}");
        }
    }

    #[test]
    fn wider_alpha_narrows_intervals() {
        let wide = liu_report(0.05);
        let narrow = liu_report(0.5);
        for (w, n) in wide.readouts.iter().zip(&narrow.readouts) {
            let (w, n) = (w.marginal.estimate.as_ref().unwrap(), n.marginal.estimate.as_ref().unwrap());
            assert_eq!(w.point, n.point);
            assert!(n.width() < w.width());
        }
    }

    #[test]
    fn cost_benefit_rows() {
        let pts = cost_benefit_points(&liu_report(0.05)).unwrap();
        assert_eq!(pts.len(), 10);
        let lung = pts.iter().find(|p| p.readout == "Lung").unwrap();
        assert!((lung.benefit - 0.640).abs() < 0.005);
        let kidney = pts.iter().find(|p| p.readout == "Kidney").unwrap();
        assert!((kidney.benefit - 0.120).abs() < 0.005);
        assert!(kidney.cost > 0.85 && !kidney.in_target_region);
    }

    #[test]
    fn table_csv_shapes() {
        let r = liu_report(0.05);
        let t_int = intrinsic_csv(&r);
        assert_eq!(t_int.lines().count(), 11);
        assert!(t_int.contains("Uterus,75.0,22.2,11.4,38.8"));
        let t_rd = readout_csv(&r);
        assert_eq!(t_rd.lines().count(), 12);
        assert!(t_rd.lines().nth(1).unwrap().starts_with("Negative,97.8"));
    }
}
