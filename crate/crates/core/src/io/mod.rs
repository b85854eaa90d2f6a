//! File formats and the command implementations behind the binary.

mod commands;
mod report;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::counts::CountMatrix;
use crate::error::{Error, Result};
use crate::predictive::{IncidenceMode, IncidenceSpec};
use crate::strata::{partition_by_stratum, StratifiedRecords, StratumRecord};

pub use commands::{cmd_analyze, cmd_cost_benefit, cmd_simulate, AnalyzeOptions, SimulateOutputs};
pub use report::{
    analyze_matrix, cost_benefit_points, round_json, readout_csv, intrinsic_csv, to_stable_json, AnalysisReport,
    ControlBlock, CostBenefitPoint, IntrinsicRow, MetricEntry, PredictiveRow, Provenance,
};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn parse_error(record: Option<&csv::StringRecord>, message: impl Into<String>) -> Error {
    Error::Parse {
        line: record.and_then(|r| r.position()).map_or(0, |p| p.line() as usize),
        message: message.into(),
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

/// Parses the wide matrix layout: a header `state,<readout labels...>` and
/// one row per disease state, control first. `#` starts a comment line.
pub fn parse_matrix_str(text: &str) -> Result<CountMatrix> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.len() < 3 {
        return Err(parse_error(Some(&header), "header needs a state column and at least two readouts"));
    }
    let readouts: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut states = Vec::new();
    let mut grid = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        if record.len() != header.len() {
            return Err(parse_error(
                Some(&record),
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        states.push(record[0].to_string());
        let row = record
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<i64>()
                    .map_err(|_| parse_error(Some(&record), format!("cell {cell:?} is not an integer")))
            })
            .collect::<Result<Vec<i64>>>()?;
        grid.push(row);
    }
    CountMatrix::new(&grid, &states, &readouts)
}

pub fn parse_matrix_csv(path: impl AsRef<Path>) -> Result<CountMatrix> {
    parse_matrix_str(&read_text(path.as_ref())?)
}

/// Writes a matrix in the layout read by [`parse_matrix_str`].
pub fn write_matrix_csv(matrix: &CountMatrix) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["state".to_string()];
    header.extend(matrix.readout_labels().iter().cloned());
    writer.write_record(&header).expect("in-memory write");
    for (label, row) in matrix.state_labels().iter().zip(matrix.counts()) {
        let mut line = vec![label.clone()];
        line.extend(row.iter().map(u64::to_string));
        writer.write_record(&line).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Parses long-format records with columns `state,stratum,readout,count`.
pub fn parse_records_str(text: &str) -> Result<StratifiedRecords> {
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(csv_error)?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| parse_error(Some(&header), format!("missing column {name:?}")))
    };
    let (cs, cg, cr, cn) = (column("state")?, column("stratum")?, column("readout")?, column("count")?);
    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        if record.len() != header.len() {
            return Err(parse_error(
                Some(&record),
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let count = record[cn]
            .parse::<u64>()
            .map_err(|_| parse_error(Some(&record), format!("count {:?} is not a nonnegative integer", &record[cn])))?;
        records.push(StratumRecord::new(&record[cs], &record[cg], &record[cr], count as i64));
    }
    partition_by_stratum(&records)
}

pub fn parse_records_csv(path: impl AsRef<Path>) -> Result<StratifiedRecords> {
    parse_records_str(&read_text(path.as_ref())?)
}

/// Incidence configuration as stored on disk. Registry shares are keyed by
/// state label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidenceConfig {
    pub overall: f64,
    #[serde(default = "default_mode")]
    pub mode: IncidenceMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shares: Option<BTreeMap<String, f64>>,
}

fn default_mode() -> IncidenceMode {
    IncidenceMode::Sample
}

impl IncidenceConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read_text(path.as_ref())?)
    }

    /// Orders registry shares by the matrix's state labels.
    pub fn resolve(&self, matrix: &CountMatrix) -> Result<IncidenceSpec> {
        match (self.mode, &self.shares) {
            (IncidenceMode::Registry, Some(map)) => {
                let labels = &matrix.state_labels()[1..];
                if let Some(extra) = map.keys().find(|k| !labels.iter().any(|l| l == k.trim())) {
                    return Err(Error::InvalidIncidence(format!("unknown state {extra:?} in shares")));
                }
                let shares = labels
                    .iter()
                    .map(|l| {
                        map.iter()
                            .find(|(k, _)| k.trim() == l)
                            .map(|(_, v)| *v)
                            .ok_or_else(|| Error::InvalidIncidence(format!("no registry share for {l:?}")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                IncidenceSpec::registry(self.overall, shares)
            }
            (mode, shares) => IncidenceSpec::new(self.overall, mode, shares.as_ref().map(|m| m.values().copied().collect())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::liu2020;

    #[test]
    fn liu_fixture_totals() {
        let m = liu2020();
        assert_eq!(m.total(), 1264);
        assert_eq!(m.column_totals()[0], 912);
    }

    #[test]
    fn binary_csv() {
        let m = parse_matrix_str("state,Negative,Flu\nHealthy,90,10\nFlu,3,17\n").unwrap();
        assert_eq!(m.num_states(), 1);
        assert_eq!(m.num_readouts(), 1);
    }

    #[test]
    fn ragged_row_is_parse_error() {
        let err = parse_matrix_str("state,N,A\nC,1,2\nA,3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn bad_cell_is_parse_error() {
        assert!(matches!(parse_matrix_str("state,N,A\nC,1,x\nA,3,4\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn negative_cell_is_validation_error() {
        assert!(matches!(
            parse_matrix_str("state,N,A\nC,1,-2\nA,3,4\n"),
            Err(Error::NegativeCount { .. })
        ));
    }

    #[test]
    fn round_trip() {
        let m = liu2020();
        assert_eq!(parse_matrix_str(&write_matrix_csv(&m)).unwrap(), m);
    }

    #[test]
    fn records_negative_count_is_parse_error() {
        let text = "state,stratum,readout,count\nC,all,N,5\nA,I,A,-1\n";
        assert!(matches!(parse_records_str(text), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn records_single_stratum_matches_matrix() {
        let m = parse_matrix_str("state,N,A,B\nC,50,3,2\nA,4,10,1\nB,5,2,9\n").unwrap();
        let mut text = String::from("state,stratum,readout,count\n");
        for (j, s) in m.state_labels().iter().enumerate() {
            for (k, r) in m.readout_labels().iter().enumerate() {
                text.push_str(&format!("{s},all,{r},{}\n", m.count(j, k)));
            }
        }
        assert_eq!(parse_records_str(&text).unwrap().pooled(), &m);
    }

    #[test]
    fn incidence_config() {
        let m = liu2020();
        let sample = IncidenceConfig::from_json(r#"{"overall":0.0133,"mode":"sample"}"#).unwrap();
        assert_eq!(sample.resolve(&m).unwrap().mode(), IncidenceMode::Sample);
        let mut map = BTreeMap::new();
        for l in &m.state_labels()[1..] {
            map.insert(l.clone(), 0.1);
        }
        let registry = IncidenceConfig {
            overall: 0.0133,
            mode: IncidenceMode::Registry,
            shares: Some(map.clone()),
        };
        assert_eq!(registry.resolve(&m).unwrap().registry_shares().unwrap().len(), 10);
        map.remove("Lung");
        let missing = IncidenceConfig {
            shares: Some(map),
            ..registry
        };
        assert!(matches!(missing.resolve(&m), Err(Error::InvalidIncidence(_))));
        assert!(IncidenceConfig::from_json(r#"{"overall":2}"#).unwrap().resolve(&m).is_err());
    }
}
