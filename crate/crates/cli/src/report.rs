//! Report rows and their CSV / JSON encodings.

use std::io::Write;

use monoid_moments::{Family, Moment};
use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;

/// One (x, moment) line of a `moments` or `sweep` report. The prediction
/// columns are empty below `x = 16`, where `log log x` is not used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub x: u64,
    pub h: u32,
    pub family: Family,
    pub moment: Moment,
    pub empirical: u64,
    pub predicted: Option<f64>,
    pub residual: Option<f64>,
    pub normalized: Option<f64>,
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub x: u64,
    pub h: u32,
    pub family: Family,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalOrderRow {
    pub x: u64,
    pub h: u32,
    pub family: Family,
    pub epsilon: f64,
    pub exceptions: u64,
    pub eligible: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check: String,
    pub subject: String,
    pub passed: bool,
    pub detail: String,
}

/// Writes rows as CSV with a header line, or as a pretty JSON array.
pub fn write_rows<T: Serialize, W: Write>(rows: &[T], format: OutputFormat, out: W) -> anyhow::Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ReportRow {
        ReportRow {
            x: 1000,
            h: 2,
            family: Family::HFree,
            moment: Moment::M1,
            empirical: 1684,
            predicted: Some(1_600.123_456_789_012_3),
            residual: Some(83.876_543_210_987_7),
            normalized: Some(0.1 + 0.2),
            runtime_ms: 3,
        }
    }

    #[test]
    fn csv_header_is_fixed() {
        let mut buf = Vec::new();
        write_rows(&[row()], OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "x,h,family,moment,empirical,predicted,residual,normalized,runtime_ms"
        );
        assert!(text.contains(",h-free,m1,1684,"));
    }

    #[test]
    fn csv_and_json_round_trip_to_the_same_rows() {
        let rows = vec![
            row(),
            ReportRow { x: 10_000, normalized: Some(-1e-300), ..row() },
            ReportRow { x: 10, predicted: None, residual: None, normalized: None, ..row() },
        ];
        let mut csv_buf = Vec::new();
        write_rows(&rows, OutputFormat::Csv, &mut csv_buf).unwrap();
        let mut json_buf = Vec::new();
        write_rows(&rows, OutputFormat::Json, &mut json_buf).unwrap();
        let from_csv: Vec<ReportRow> =
            csv::Reader::from_reader(csv_buf.as_slice()).deserialize().collect::<Result<_, _>>().unwrap();
        let from_json: Vec<ReportRow> = serde_json::from_slice(&json_buf).unwrap();
        assert_eq!(from_csv, rows);
        assert_eq!(from_json, rows);
    }
}
