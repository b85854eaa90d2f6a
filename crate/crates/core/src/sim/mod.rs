//! Monte Carlo studies of bias, coverage and interval width.
//!
//! Replicate `i` of a study draws from a ChaCha20 stream keyed by
//! `(seed, i)`, so results do not depend on scheduling or thread count.

mod scenario;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accuracy::{accuracy_estimate, control_rates};
use crate::counts::{
    adjust_control_counts, case_shares, collapse_cases, AdjustPolicy, CaseShareVector, CountMatrix,
    DEFAULT_ADJUST_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::kernels::EstimateInterval;
use crate::marginal::marginal_estimate;
use crate::predictive::{IncidenceMode, IncidenceSpec, PredictiveContext, PredictiveMetric};

pub use scenario::{metric_ids, scenario_truth, ScenarioSpec};

/// Generator for replicate `index`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Multinomial draw by sequential conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, trials: u64, probs: &[f64]) -> Vec<u64> {
    let mut left = trials;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        let draw = if i + 1 == probs.len() {
            left
        } else if left == 0 || p <= 0.0 {
            0
        } else if p >= mass {
            left
        } else {
            Binomial::new(left, (p / mass).min(1.0))
                .expect("probability in [0, 1]")
                .sample(rng)
        };
        out.push(draw);
        left -= draw;
        mass -= p;
    }
    out
}

/// One simulated study table with fixed `n0` controls and `n1` cases.
pub fn sample_replicate<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<CountMatrix> {
    let row_sizes = multinomial(rng, spec.n1, &spec.full_shares());
    let mut counts = vec![multinomial(rng, spec.n0, &spec.rows[0])];
    for (row, size) in spec.rows[1..].iter().zip(row_sizes) {
        counts.push(multinomial(rng, size, row));
    }
    CountMatrix::from_counts(counts, spec.state_labels(), spec.readout_labels())
}

fn incidence_for(spec: &ScenarioSpec) -> Result<IncidenceSpec> {
    match spec.incidence_mode {
        IncidenceMode::Sample => IncidenceSpec::sample(spec.overall_incidence),
        IncidenceMode::Registry => IncidenceSpec::registry(spec.overall_incidence, spec.full_shares()),
    }
}

/// Estimates for every metric of one replicate, in [`metric_ids`] order.
/// A metric that cannot be estimated is `None`.
pub fn evaluate_replicate(
    matrix: &CountMatrix,
    spec: &ScenarioSpec,
    policy: AdjustPolicy,
) -> Result<Vec<Option<EstimateInterval>>> {
    let alpha = spec.alpha;
    let k_count = matrix.num_readouts();
    let incidence = incidence_for(spec)?;
    let adjusted = adjust_control_counts(matrix, policy, DEFAULT_ADJUST_THRESHOLD);
    let shares = match incidence.registry_shares() {
        Some(s) => CaseShareVector {
            shares: s.to_vec(),
            basis: matrix.cases(),
        },
        None => case_shares(matrix)?,
    };
    let mut out = Vec::with_capacity(3 * k_count + 3);
    out.push(control_rates(matrix, &adjusted, alpha).ok().map(|c| c.specificity));
    for k in 1..=k_count {
        out.push(accuracy_estimate(matrix, k, k, &shares, alpha).ok().map(|a| a.interval));
    }
    let ctx = PredictiveContext::new(matrix, &adjusted, &incidence).ok();
    let predictive = |k: usize, metric: PredictiveMetric| {
        ctx.as_ref()
            .and_then(|c| c.estimate(k, metric, alpha).ok())
            .map(|e| e.interval)
    };
    out.push(predictive(0, PredictiveMetric::Pvn));
    for k in 1..=k_count {
        out.push(predictive(k, PredictiveMetric::Pvp));
    }
    let collapsed = collapse_cases(matrix);
    for k in 0..=k_count {
        out.push(marginal_estimate(&collapsed, &adjusted, spec.overall_incidence, k, alpha).ok());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub metric: String,
    /// All percentages.
    pub value: f64,
    pub bias: f64,
    pub coverage: f64,
    pub width: f64,
    /// Replicates where the metric could not be estimated; counted as not
    /// covering and left out of the bias and width means.
    pub failures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun {
    pub adjust_policy: AdjustPolicy,
    pub rows: Vec<StudyRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub scenario: ScenarioSpec,
    pub replicates: u64,
    pub seed: u64,
    /// The scenario's own policy first, then the comparison policy if any.
    pub runs: Vec<PolicyRun>,
}

impl StudyReport {
    pub fn primary(&self) -> &[StudyRow] {
        &self.runs[0].rows
    }

    pub fn comparison(&self) -> Option<&[StudyRow]> {
        self.runs.get(1).map(|r| r.rows.as_slice())
    }

    pub fn row(&self, metric: &str) -> Option<&StudyRow> {
        self.primary().iter().find(|r| r.metric == metric)
    }
}

struct Accumulator {
    bias: f64,
    width: f64,
    covered: u64,
    estimated: u64,
}

fn summarize(truth: &[(String, f64)], draws: &[Vec<Option<EstimateInterval>>], replicates: u64) -> Vec<StudyRow> {
    let mut acc: Vec<Accumulator> = truth
        .iter()
        .map(|_| Accumulator {
            bias: 0.0,
            width: 0.0,
            covered: 0,
            estimated: 0,
        })
        .collect();
    for draw in draws {
        for ((a, (_, value)), est) in acc.iter_mut().zip(truth).zip(draw) {
            if let Some(ci) = est {
                a.estimated += 1;
                a.bias += ci.point - value;
                a.width += ci.width();
                if ci.contains(*value) {
                    a.covered += 1;
                }
            }
        }
    }
    truth
        .iter()
        .zip(acc)
        .map(|((metric, value), a)| {
            let n = a.estimated.max(1) as f64;
            StudyRow {
                metric: metric.clone(),
                value: 100.0 * value,
                bias: 100.0 * a.bias / n,
                coverage: 100.0 * a.covered as f64 / replicates as f64,
                width: 100.0 * a.width / n,
                failures: replicates - a.estimated,
            }
        })
        .collect()
}

/// Runs every replicate of `spec`, in parallel, and aggregates in replicate order.
pub fn run_study(spec: &ScenarioSpec) -> Result<StudyReport> {
    let truth = scenario_truth(spec)?;
    let mut policies = vec![spec.adjust_policy];
    policies.extend(spec.compare_policy);
    let draws: Vec<Vec<Vec<Option<EstimateInterval>>>> = (0..spec.replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(spec.seed, i);
            let matrix = sample_replicate(spec, &mut rng)?;
            policies.iter().map(|p| evaluate_replicate(&matrix, spec, *p)).collect()
        })
        .collect::<Result<_>>()?;
    let runs = policies
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let per_policy: Vec<Vec<Option<EstimateInterval>>> = draws.iter().map(|d| d[i].clone()).collect();
            PolicyRun {
                adjust_policy: *p,
                rows: summarize(&truth, &per_policy, spec.replicates),
            }
        })
        .collect();
    Ok(StudyReport {
        scenario: spec.clone(),
        replicates: spec.replicates,
        seed: spec.seed,
        runs,
    })
}

/// Table of expected counts, rounded; handy as a noise-free replicate.
pub fn expected_counts(spec: &ScenarioSpec) -> Result<CountMatrix> {
    spec.validate()?;
    let shares = spec.full_shares();
    let mut counts = vec![spec.rows[0].iter().map(|p| (p * spec.n0 as f64).round() as u64).collect()];
    for (row, share) in spec.rows[1..].iter().zip(shares) {
        counts.push(row.iter().map(|p| (p * share * spec.n1 as f64).round() as u64).collect());
    }
    CountMatrix::from_counts(counts, spec.state_labels(), spec.readout_labels())
        .map_err(|e| Error::InvalidScenario(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn screening(n: u64) -> ScenarioSpec {
        ScenarioSpec {
            name: Some("screening".into()),
            n0: n,
            n1: n,
            overall_incidence: 0.016,
            case_shares: vec![0.5, 0.4],
            rows: vec![
                vec![0.98, 0.01, 0.01],
                vec![0.25, 0.65, 0.10],
                vec![0.30, 0.20, 0.50],
                vec![0.60, 0.20, 0.20],
            ],
            replicates: 200,
            seed: 7,
            incidence_mode: IncidenceMode::Sample,
            adjust_policy: AdjustPolicy::Off,
            compare_policy: None,
            alpha: 0.05,
            state_labels: None,
            readout_labels: None,
        }
    }

    #[test]
    fn truth_values() {
        let t = scenario_truth(&screening(500)).unwrap();
        let get = |id: &str| 100.0 * t.iter().find(|(m, _)| m == id).unwrap().1;
        for (id, v) in [("PVP_1", 31.25), ("PVP_2", 22.60), ("PVN_0", 99.50), ("P(T_0)", 96.92), ("P(T_1)", 1.66), ("P(T_2)", 1.42)] {
            assert!((get(id) - v).abs() < 0.005, "{id} {}", get(id));
        }
    }

    #[test]
    fn replay_is_identical() {
        let spec = screening(500);
        let a = sample_replicate(&spec, &mut replicate_rng(3, 11)).unwrap();
        let b = sample_replicate(&spec, &mut replicate_rng(3, 11)).unwrap();
        let c = sample_replicate(&spec, &mut replicate_rng(3, 12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.controls(), 500);
        assert_eq!(a.cases(), 500);
    }

    #[test]
    fn single_state_gets_all_cases() {
        let spec = ScenarioSpec {
            case_shares: vec![],
            rows: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            ..screening(100)
        };
        let m = sample_replicate(&spec, &mut replicate_rng(1, 0)).unwrap();
        assert_eq!(m.row_total(1), 100);
    }

    #[test]
    fn multinomial_conserves_trials() {
        let mut rng = replicate_rng(5, 0);
        for _ in 0..100 {
            let d = multinomial(&mut rng, 37, &[0.2, 0.0, 0.5, 0.3]);
            assert_eq!(d.iter().sum::<u64>(), 37);
            assert_eq!(d[1], 0);
        }
    }

    #[test]
    fn expected_count_table_estimates_truth() {
        let spec = screening(100_000);
        let m = expected_counts(&spec).unwrap();
        let est = evaluate_replicate(&m, &spec, AdjustPolicy::Off).unwrap();
        let truth = scenario_truth(&spec).unwrap();
        for ((id, v), e) in truth.iter().zip(est) {
            let e = e.unwrap();
            assert!((e.point - v).abs() < 1e-3, "{id}: {} vs {v}", e.point);
        }
    }

    #[test]
    fn one_replicate_echoes_evaluation() {
        let spec = ScenarioSpec {
            replicates: 1,
            ..screening(500)
        };
        let report = run_study(&spec).unwrap();
        let m = sample_replicate(&spec, &mut replicate_rng(spec.seed, 0)).unwrap();
        let est = evaluate_replicate(&m, &spec, spec.adjust_policy).unwrap();
        for (row, e) in report.primary().iter().zip(est) {
            let e = e.unwrap();
            assert!((row.bias - 100.0 * (e.point - row.value / 100.0)).abs() < 1e-9);
            assert!((row.width - 100.0 * e.width()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_rows() {
        let mut spec = screening(500);
        spec.rows[1][0] = 0.3;
        assert!(matches!(spec.validate(), Err(Error::InvalidScenario(_))));
        let mut spec = screening(500);
        spec.replicates = 0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn compare_policy_adds_a_run() {
        let spec = ScenarioSpec {
            replicates: 20,
            adjust_policy: AdjustPolicy::On,
            compare_policy: Some(AdjustPolicy::Off),
            ..screening(500)
        };
        let report = run_study(&spec).unwrap();
        assert_eq!(report.runs.len(), 2);
        assert_eq!(report.runs[1].adjust_policy, AdjustPolicy::Off);
    }
}
