//! CSV rows and small report formats shared by the library and the CLI.

use crate::moc::ModulusKind;
use serde::{Deserialize, Serialize};

/// One norm-series measurement, emitted as a CSV row
/// `time,kind,parameter,seminorm,supnorm,pair_count,min_separation`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormRow {
    pub time: f64,
    pub kind: String,
    pub parameter: f64,
    pub seminorm: f64,
    pub supnorm: f64,
    pub pair_count: usize,
    pub min_separation: f64,
}

pub const NORM_CSV_HEADER: &str = "time,kind,parameter,seminorm,supnorm,pair_count,min_separation";

impl NormRow {
    pub fn new(time: f64, kind: ModulusKind, seminorm: f64, supnorm: f64, pairs: usize, min_sep: f64) -> Self {
        NormRow {
            time,
            kind: kind.label(),
            parameter: kind.parameter(),
            seminorm,
            supnorm,
            pair_count: pairs,
            min_separation: min_sep,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.12e},{},{:.12e},{:.12e},{:.12e},{},{:.12e}",
            self.time, self.kind, self.parameter, self.seminorm, self.supnorm, self.pair_count, self.min_separation
        )
    }
}

/// Render a full CSV document from rows.
pub fn norm_csv(rows: &[NormRow]) -> String {
    let mut out = String::from(NORM_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Two-column gnuplot-ready data.
pub fn plot_data(xs: &[f64], ys: &[f64]) -> String {
    let mut out = String::new();
    for (x, y) in xs.iter().zip(ys) {
        out.push_str(&format!("{x:.12e} {y:.12e}\n"));
    }
    out
}
