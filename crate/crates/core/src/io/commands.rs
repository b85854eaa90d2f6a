use std::path::{Path, PathBuf};

use crate::counts::AdjustPolicy;
use crate::error::{Error, Result};
use crate::sim::{run_study, ScenarioSpec, StudyReport, StudyRow};

use super::report::{analyze_matrix, cost_benefit_points, readout_csv, intrinsic_csv, to_stable_json, AnalysisReport, CostBenefitPoint};
use super::{parse_matrix_str, read_text, write_text, IncidenceConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzeOptions {
    pub alpha: f64,
    pub adjust: AdjustPolicy,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            alpha: 0.05,
            adjust: AdjustPolicy::Auto,
        }
    }
}

/// `out.json` -> `out.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Analyzes a matrix file and writes the JSON report to `out`, plus
/// `<stem>.intrinsic.csv` and `<stem>.readouts.csv` beside it.
pub fn cmd_analyze(matrix_path: &Path, incidence_path: &Path, options: AnalyzeOptions, out: &Path) -> Result<AnalysisReport> {
    let matrix_text = read_text(matrix_path)?;
    let incidence_text = read_text(incidence_path)?;
    let matrix = parse_matrix_str(&matrix_text)?;
    let incidence = IncidenceConfig::from_json(&incidence_text)?.resolve(&matrix)?;
    let report = analyze_matrix(
        &matrix,
        &incidence,
        options.alpha,
        options.adjust,
        matrix_text.as_bytes(),
        incidence_text.as_bytes(),
    )?;
    write_text(out, &to_stable_json(&report)?)?;
    write_text(&sibling(out, "intrinsic.csv"), &intrinsic_csv(&report))?;
    write_text(&sibling(out, "readouts.csv"), &readout_csv(&report))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutputs {
    pub report: StudyReport,
    pub json: PathBuf,
    pub table: PathBuf,
}

fn study_csv(report: &StudyReport) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["metric", "Value", "Bias", "Coverage", "Width"])
        .expect("in-memory write");
    let paired = |f: &dyn Fn(&StudyRow) -> String, i: usize| match report.comparison() {
        Some(other) => format!("{} ({})", f(&report.primary()[i]), f(&other[i])),
        None => f(&report.primary()[i]),
    };
    for (i, row) in report.primary().iter().enumerate() {
        writer
            .write_record([
                row.metric.clone(),
                format!("{:.2}", row.value),
                paired(&|r| format!("{:.3}", r.bias), i),
                paired(&|r| format!("{:.2}", r.coverage), i),
                paired(&|r| format!("{:.3}", r.width), i),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Runs a scenario file and writes the JSON report to `out` and the
/// percent table to `<stem>.csv`.
pub fn cmd_simulate(scenario_path: &Path, out: &Path) -> Result<SimulateOutputs> {
    let spec = ScenarioSpec::from_json(&read_text(scenario_path)?)?;
    let report = run_study(&spec)?;
    let table = sibling(out, "csv");
    if table == out {
        return Err(Error::io(out, "report and table paths coincide; use a .json output"));
    }
    write_text(out, &to_stable_json(&report)?)?;
    write_text(&table, &study_csv(&report))?;
    Ok(SimulateOutputs {
        report,
        json: out.to_path_buf(),
        table,
    })
}

/// Reads an analysis report and writes `readout,benefit,cost,in_target_region`.
pub fn cmd_cost_benefit(report_path: &Path, out: &Path) -> Result<Vec<CostBenefitPoint>> {
    let report: AnalysisReport = serde_json::from_str(&read_text(report_path)?).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let points = cost_benefit_points(&report)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["readout", "benefit", "cost", "in_target_region"])
        .expect("in-memory write");
    for p in &points {
        writer
            .write_record([
                p.readout.clone(),
                format!("{:.4}", p.benefit),
                format!("{:.4}", p.cost),
                p.in_target_region.to_string(),
            ])
            .expect("in-memory write");
    }
    let text = String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8");
    write_text(out, &text)?;
    Ok(points)
}
