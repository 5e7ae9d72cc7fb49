//! Writing suite reports to disk.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Check, ConvergenceReport, GeneratorSpec};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::operator::TRACE_HEADER;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidInput(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub index: usize,
    pub generator: GeneratorSpec,
    pub kernel: KernelSpec,
    pub atoms: usize,
    pub lambda: u32,
    pub depth: u32,
    pub all_ok: bool,
    pub checks: Vec<Check>,
}

/// Every check of every record with its verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub all_ok: bool,
    pub records: Vec<RecordSummary>,
}

impl Summary {
    pub fn of(report: &ConvergenceReport) -> Self {
        Summary {
            all_ok: report.all_ok(),
            records: report
                .records
                .iter()
                .enumerate()
                .map(|(index, r)| RecordSummary {
                    index,
                    generator: r.generator.clone(),
                    kernel: r.kernel.clone(),
                    atoms: r.atoms,
                    lambda: r.lambda,
                    depth: r.depth,
                    all_ok: r.all_ok,
                    checks: r.checks.clone(),
                })
                .collect(),
        }
    }
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn to_json<T: Serialize>(value: &T, path: &Path) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    Ok(text)
}

/// Writes `trace_<i>.csv` per record (a header-only `trace_0.csv` when there
/// are none) or `report.json`, plus `summary.json`. Returns the paths written.
pub fn emit_report(report: &ConvergenceReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv => {
            if report.records.is_empty() {
                write(dir.join("trace_0.csv"), &format!("{TRACE_HEADER}\n"), &mut written)?;
            }
            for (i, r) in report.records.iter().enumerate() {
                write(dir.join(format!("trace_{i}.csv")), &r.trace.to_csv(), &mut written)?;
            }
        }
        ReportFormat::Json => {
            let path = dir.join("report.json");
            let text = to_json(report, &path)?;
            write(path, &text, &mut written)?;
        }
    }
    let path = dir.join("summary.json");
    let text = to_json(&Summary::of(report), &path)?;
    write(path, &text, &mut written)?;
    Ok(written)
}
