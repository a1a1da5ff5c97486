use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::SimConfig;
use crate::harness::point::RunResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Format implied by a file extension, CSV unless it is `.json`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// The emitted columns, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub axis_value: f64,
    pub ber: f64,
    pub ber_ci_lo: f64,
    pub ber_ci_hi: f64,
    pub snr_db: f64,
    pub bits: u64,
    pub seed: u64,
}

impl From<&RunResult> for ResultRow {
    fn from(r: &RunResult) -> Self {
        Self {
            axis_value: r.axis_value,
            ber: r.ber,
            ber_ci_lo: r.ber_ci_lo,
            ber_ci_hi: r.ber_ci_hi,
            snr_db: r.snr_db,
            bits: r.bits,
            seed: r.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub results: Vec<ResultRow>,
    pub config: SimConfig,
    pub config_sha256: String,
}

fn rows(results: &[RunResult]) -> Result<Vec<ResultRow>> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let mut rows: Vec<ResultRow> = results.iter().map(ResultRow::from).collect();
    rows.sort_by(|a, b| a.axis_value.total_cmp(&b.axis_value));
    Ok(rows)
}

pub fn results_to_csv(results: &[RunResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows(results)? {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn results_to_json(results: &[RunResult], config: &SimConfig) -> Result<String> {
    let report = JsonReport {
        results: rows(results)?,
        config: config.clone(),
        config_sha256: config.sha256()?,
    };
    Ok(serde_json::to_string_pretty(&report)?)
}

/// Writes results to `path`. Nothing is created when `results` is empty.
pub fn emit_results(results: &[RunResult], config: &SimConfig, path: &Path, format: Format) -> Result<()> {
    let text = match format {
        Format::Csv => results_to_csv(results)?,
        Format::Json => results_to_json(results, config)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn parse_json(text: &str) -> Result<JsonReport> {
    Ok(serde_json::from_str(text)?)
}
