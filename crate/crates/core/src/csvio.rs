//! Plain CSV tables of named real columns.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};

/// Named columns of equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            columns: vec![Vec::new(); headers.len()],
        }
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} values, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        for (c, &v) in self.columns.iter_mut().zip(row) {
            c.push(v);
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.headers.iter().position(|h| h == name)?;
        Some(&self.columns[i])
    }

    fn check(&self) -> Result<()> {
        if self.headers.len() != self.columns.len() {
            return Err(Error::InvalidInput(format!(
                "{} headers for {} columns",
                self.headers.len(),
                self.columns.len()
            )));
        }
        let n = self.rows();
        if let Some((h, c)) = self.headers.iter().zip(&self.columns).find(|(_, c)| c.len() != n) {
            return Err(Error::InvalidInput(format!(
                "column `{h}` has {} rows, expected {n}",
                c.len()
            )));
        }
        Ok(())
    }
}

/// Shortest decimal that parses back to the same `f64`; integral values
/// print without a fractional part.
pub fn format_real(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if v.fract() == 0.0 && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    format!("{v:?}")
}

pub fn emit_csv(table: &CsvTable, path: &Path) -> Result<()> {
    table.check()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    let wrap = |e: csv::Error| Error::io(path, e.into());
    w.write_record(&table.headers).map_err(wrap)?;
    for r in 0..table.rows() {
        w.write_record(table.columns.iter().map(|c| format_real(c[r])))
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let wrap = |e: csv::Error| Error::io(path, e.into());
    let headers: Vec<String> = r.headers().map_err(wrap)?.iter().map(String::from).collect();
    let mut table = CsvTable {
        columns: vec![Vec::new(); headers.len()],
        headers,
    };
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(wrap)?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    Error::Serde(format!("{}: row {}: `{s}` is not a number", path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        table.push_row(&row)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        emit_csv(&CsvTable::new(&["k", "err_rho", "err_current"]), &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "k,err_rho,err_current\n");
        let back = read_csv(&path).unwrap();
        assert_eq!(back.rows(), 0);
        assert_eq!(back.headers.len(), 3);
    }

    #[test]
    fn ragged_columns_rejected() {
        let t = CsvTable {
            headers: vec!["a".into(), "b".into()],
            columns: vec![vec![1.0], vec![]],
        };
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_csv(&t, &dir.path().join("t.csv")).is_err());
    }

    #[test]
    fn formatting() {
        assert_eq!(format_real(3.0), "3");
        assert_eq!(format_real(0.1), "0.1");
        assert_eq!(format_real(1e-20), "1e-20");
        assert_eq!(format_real(-0.0), "-0");
        assert_eq!(format_real(2e20), "2e20");
    }

    proptest! {
        #[test]
        fn write_then_read_is_identity(rows in proptest::collection::vec((any::<f64>(), any::<f64>()), 0..20)) {
            let mut t = CsvTable::new(&["x", "y"]);
            for (a, b) in &rows {
                t.push_row(&[*a, *b]).unwrap();
            }
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("t.csv");
            emit_csv(&t, &path).unwrap();
            let back = read_csv(&path).unwrap();
            prop_assert_eq!(back.rows(), rows.len());
            for (c, d) in t.columns.iter().zip(&back.columns) {
                for (u, v) in c.iter().zip(d) {
                    prop_assert!(u.to_bits() == v.to_bits() || (u.is_nan() && v.is_nan()));
                }
            }
        }
    }
}
