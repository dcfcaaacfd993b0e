//! Column-named numeric tables, read from and written to CSV.
//!
//! Floats are written with Rust's shortest round-trip formatting so a table
//! read back from its own CSV is bit-identical. Empty cells read as NaN.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}, column `{column}`: cannot parse `{cell}` as a number")]
    Parse { row: usize, column: String, cell: String },
    #[error("row {row} has {got} cells, header has {expected}")]
    Width { row: usize, expected: usize, got: usize },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Telemetry {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Telemetry {
    pub fn new(columns: Vec<String>) -> Result<Self, TelemetryError> {
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(TelemetryError::DuplicateColumn(c.clone()));
            }
        }
        Ok(Self { columns, rows: Vec::new() })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<(), TelemetryError> {
        if row.len() != self.columns.len() {
            return Err(TelemetryError::Width { row: self.rows.len(), expected: self.columns.len(), got: row.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.index_of(name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TelemetryError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_cell(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, TelemetryError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut table = Self::new(columns)?;
        for (i, record) in r.records().enumerate() {
            let record = record?;
            if record.len() != table.columns.len() {
                return Err(TelemetryError::Width { row: i, expected: table.columns.len(), got: record.len() });
            }
            let mut row = Vec::with_capacity(record.len());
            for (j, cell) in record.iter().enumerate() {
                let v = if cell.is_empty() {
                    f64::NAN
                } else {
                    cell.parse::<f64>().map_err(|_| TelemetryError::Parse {
                        row: i,
                        column: table.columns[j].clone(),
                        cell: cell.to_string(),
                    })?
                };
                row.push(v);
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    /// `{"columns": [...], "rows": [[...], ...]}` with NaN written as null.
    pub fn write_json<W: Write>(&self, writer: W) -> Result<(), TelemetryError> {
        let rows: Vec<Vec<Option<f64>>> =
            self.rows.iter().map(|r| r.iter().map(|v| v.is_finite().then_some(*v)).collect()).collect();
        let doc = serde_json::json!({ "columns": self.columns, "rows": rows });
        serde_json::to_writer(writer, &doc).map_err(|e| TelemetryError::Io(e.into()))
    }

    pub fn save(&self, path: &Path) -> Result<(), TelemetryError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self, TelemetryError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

pub(crate) fn format_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(values in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 0..60)) {
            let mut t = Telemetry::new(vec!["time".into(), "a".into(), "b".into()]).unwrap();
            for chunk in values.chunks_exact(3) {
                t.push_row(chunk.to_vec()).unwrap();
            }
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            let back = Telemetry::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.columns(), t.columns());
            for (x, y) in back.rows().iter().flatten().zip(t.rows().iter().flatten()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn json_uses_null_for_missing() {
        let mut t = Telemetry::new(vec!["time".into(), "x".into()]).unwrap();
        t.push_row(vec![0.0, f64::NAN]).unwrap();
        t.push_row(vec![0.5, 2.0]).unwrap();
        let mut buf = Vec::new();
        t.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["columns"][1], "x");
        assert!(v["rows"][0][1].is_null());
        assert_eq!(v["rows"][1][1], 2.0);
    }

    #[test]
    fn empty_cells_and_garbage() {
        let t = Telemetry::read_csv("time,x\n0,\n1,2.5\n".as_bytes()).unwrap();
        assert!(t.rows()[0][1].is_nan());
        assert_eq!(t.column("x").unwrap()[1], 2.5);
        assert!(matches!(Telemetry::read_csv("time,x\n0,abc\n".as_bytes()), Err(TelemetryError::Parse { .. })));
        assert!(matches!(Telemetry::new(vec!["a".into(), "a".into()]), Err(TelemetryError::DuplicateColumn(_))));
    }
}
