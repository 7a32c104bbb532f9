use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub t: f64,
    pub discrepancy: f64,
    pub n: Option<usize>,
    /// Critical value or tolerance the discrepancy is read against.
    pub tolerance: Option<f64>,
    pub columns: BTreeMap<String, f64>,
}

impl TableRow {
    pub fn new(t: f64, discrepancy: f64) -> Self {
        TableRow { t, discrepancy, n: None, tolerance: None, columns: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.columns.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub experiment: String,
    pub rows: Vec<TableRow>,
    /// Discrepancy nonincreasing in t up to `allowed_inversions` increases.
    pub monotone_trend: bool,
    pub allowed_inversions: usize,
    pub applicable: bool,
    pub notes: Vec<String>,
}

impl ConvergenceTable {
    pub fn new(experiment: &str, allowed_inversions: usize) -> Self {
        ConvergenceTable {
            experiment: experiment.to_string(),
            rows: Vec::new(),
            monotone_trend: true,
            allowed_inversions,
            applicable: true,
            notes: Vec::new(),
        }
    }

    pub fn not_applicable(experiment: &str, reason: String) -> Self {
        let mut t = Self::new(experiment, 0);
        t.applicable = false;
        t.monotone_trend = false;
        t.notes.push(reason);
        t
    }

    pub fn push(&mut self, row: TableRow) {
        debug_assert!(self.rows.last().is_none_or(|r| r.t < row.t));
        self.rows.push(row);
        self.monotone_trend = self.applicable && self.inversions() <= self.allowed_inversions;
    }

    pub fn inversions(&self) -> usize {
        self.rows.windows(2).filter(|w| w[1].discrepancy > w[0].discrepancy).count()
    }

    /// Strictly decreasing discrepancy.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].discrepancy < w[0].discrepancy)
    }

    pub fn last(&self) -> Option<&TableRow> {
        self.rows.last()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.rows.iter().flat_map(|r| r.columns.keys().cloned()).collect();
        names.sort();
        names.dedup();
        names
    }

    /// Writes `t,discrepancy,n,tolerance,<extra columns>` rows.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let names = self.column_names();
        write!(out, "t,discrepancy,n,tolerance")?;
        for n in &names {
            write!(out, ",{n}")?;
        }
        writeln!(out)?;
        for r in &self.rows {
            write!(out, "{},{},", r.t, r.discrepancy)?;
            if let Some(n) = r.n {
                write!(out, "{n}")?;
            }
            write!(out, ",")?;
            if let Some(tol) = r.tolerance {
                write!(out, "{tol}")?;
            }
            for n in &names {
                write!(out, ",")?;
                if let Some(v) = r.columns.get(n) {
                    write!(out, "{v}")?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8")
    }
}
