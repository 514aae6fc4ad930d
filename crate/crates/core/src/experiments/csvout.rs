//! CSV artifacts: LF line endings, header row, RFC-4180 quoting, and numbers
//! printed with 17 significant digits so equal runs give equal bytes.

use std::fs::File;
use std::path::Path;

use crate::error::Result;

/// `{:.16e}` formatting; NaN prints as an empty field.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

/// Outcome of one declared tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flag {
    Pass,
    Fail,
    /// Recorded for comparison; no tolerance applies.
    Info,
}

impl Flag {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Flag::Pass
        } else {
            Flag::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Pass => "pass",
            Flag::Fail => "fail",
            Flag::Info => "info",
        }
    }
}

/// One row of `summary.csv` or `report.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub name: String,
    pub value: f64,
    /// Human-readable tolerance, e.g. `< 0.05`; empty for info rows.
    pub tolerance: String,
    pub flag: Flag,
}

impl MetricRow {
    pub fn check(name: impl Into<String>, value: f64, tolerance: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value, tolerance: tolerance.into(), flag: Flag::from_bool(ok) }
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), value, tolerance: String::new(), flag: Flag::Info }
    }

    pub fn passed(&self) -> bool {
        self.flag != Flag::Fail
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

/// Writes a header plus numeric rows.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| fmt_num(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `first_column,value,tolerance,flag` rows.
pub fn write_metrics(path: &Path, first_column: &str, rows: &[MetricRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([first_column, "value", "tolerance", "flag"])?;
    for r in rows {
        w.write_record([r.name.as_str(), &fmt_num(r.value), &r.tolerance, r.flag.as_str()])?;
    }
    w.flush()?;
    Ok(())
}
