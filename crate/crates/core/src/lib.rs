//! Per-category accuracy, predictive values and marginal readout rates for
//! multi-category screening tests evaluated in case-control studies.
//!
//! A study is summarised by a [`CountMatrix`] whose row 0 holds controls and
//! whose column 0 is the Negative readout. Readout `k` names state `k`.
//!
//! ```
//! use screenstat::{adjust_control_counts, predictive_estimate, AdjustPolicy, CountMatrix,
//!     IncidenceSpec, PredictiveMetric};
//!
//! let m = CountMatrix::new(
//!     &[vec![480, 12, 8], vec![19, 74, 7], vec![18, 4, 28]],
//!     &["Control", "A", "B"],
//!     &["Negative", "A", "B"],
//! ).unwrap();
//! let adjusted = adjust_control_counts(&m, AdjustPolicy::Auto, 5);
//! let incidence = IncidenceSpec::sample(0.02).unwrap();
//! let pvp = predictive_estimate(&m, &adjusted, &incidence, 1, PredictiveMetric::Pvp, 0.05).unwrap();
//! assert!(pvp.interval.lower < pvp.point && pvp.point < pvp.interval.upper);
//! ```

pub mod accuracy;
pub mod counts;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod kernels;
pub mod marginal;
pub mod predictive;
pub mod sim;
pub mod strata;

pub use accuracy::{
    accuracy_estimate, aggregate_accuracy, control_rates, crude_sensitivity, false_negative_estimate,
    AccuracyEstimate, ControlRates,
};
pub use counts::{
    adjust_control_counts, case_shares, collapse_cases, AdjustPolicy, AdjustedControlRow, CaseShareVector,
    CollapsedMatrix, CountMatrix, DEFAULT_ADJUST_THRESHOLD,
};
pub use error::{Error, Result};
pub use kernels::{
    expit, logit, midp_interval, normal_quantile, prob_positive, truncated_moments, wald_logit_interval,
    z_critical, EstimateInterval, Flag, Method, TruncatedBinomialMoments,
};
pub use marginal::{marginal_estimate, marginal_params, marginal_table, MarginalParams};
pub use predictive::{
    build_phi, gradient_u, gradient_w, overall_pvp_point, phi_covariance, predictive_estimate, pvn_point,
    pvp_point, IncidenceMode, IncidenceSpec, PhiCovariance, PhiVector, PredictiveContext, PredictiveEstimate,
    PredictiveMetric,
};
pub use sim::{run_study, scenario_truth, ScenarioSpec, StudyReport, StudyRow};
pub use strata::{partition_by_stratum, stage_pvp_estimate, StratifiedRecords, StratumRecord};
