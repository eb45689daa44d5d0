//! CSV tables whose header cells read `name [unit]`.

use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<String>>,
}

/// `"t [time]"` becomes `"t"`.
pub fn bare_name(header: &str) -> String {
    header.split('[').next().unwrap_or("").trim().to_string()
}

/// Shortest round-trip formatting, so reruns are byte-identical.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

impl Table {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Self {
            columns: columns.iter().map(|(n, u)| (n.to_string(), u.to_string())).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| num(v)).collect());
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<String> = self.columns.iter().map(|(n, u)| format!("{n} [{u}]")).collect();
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

/// Numeric columns of a CSV, by bare column name.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericCsv {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl NumericCsv {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Non-numeric cells become NaN.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(text.as_bytes());
        let names: Vec<String> = match r.headers() {
            Ok(h) => h.iter().map(bare_name).collect(),
            Err(_) => Vec::new(),
        };
        let mut columns = vec![Vec::new(); names.len()];
        for rec in r.records() {
            let rec = rec.map_err(|e| CliError::SchemaMismatch {
                kind: "csv".into(),
                reason: e.to_string(),
            })?;
            for (c, cell) in columns.iter_mut().zip(rec.iter()) {
                c.push(cell.parse().unwrap_or(f64::NAN));
            }
        }
        Ok(Self { names, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}
