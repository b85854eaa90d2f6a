//! Bundled data sets.

use crate::counts::CountMatrix;
use crate::io::{parse_matrix_str, parse_records_str};
use crate::strata::StratifiedRecords;

/// A published validation-set confusion matrix (610 controls, 654 cases) as CSV.
pub const LIU2020_CSV: &str = include_str!("../fixtures/liu2020.csv");

/// The bundled validation-set confusion matrix.
pub fn liu2020() -> CountMatrix {
    parse_matrix_str(LIU2020_CSV).expect("bundled fixture is valid")
}

/// Synthetic long-format records with an early/late stage label.
pub const STAGED_SYNTHETIC_CSV: &str = include_str!("../fixtures/staged_synthetic.csv");

pub fn staged_synthetic() -> StratifiedRecords {
    parse_records_str(STAGED_SYNTHETIC_CSV).expect("bundled fixture is valid")
}
