use std::io::Write;

use serde::Serialize;

use super::table::{ConvergenceTable, TableRow};
use crate::error::Result;

/// JSON report `{experiment, params, rows, verdict}`.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub params: serde_json::Value,
    pub rows: Vec<TableRow>,
    pub verdict: bool,
    pub monotone_trend: bool,
    pub applicable: bool,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(table: &ConvergenceTable, params: serde_json::Value, verdict: bool) -> Self {
        Report {
            experiment: table.experiment.clone(),
            params,
            rows: table.rows.clone(),
            verdict,
            monotone_trend: table.monotone_trend,
            applicable: table.applicable,
            notes: table.notes.clone(),
        }
    }

    pub fn write_json<W: Write>(&self, out: &mut W) -> Result<()> {
        serde_json::to_writer_pretty(&mut *out, self).map_err(|e| crate::Error::Output(e.to_string()))?;
        writeln!(out)?;
        Ok(())
    }
}
