//! Regret CSV and run-summary JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{fit_regret_exponent, InvariantCounters, RegretFit, RegretRecord};
use crate::config::RunConfig;

pub const CSV_HEADER: &str = "episode,episode_regret,cum_regret";
/// Fraction of episodes used when fitting the growth exponent in summaries.
pub const SUMMARY_WINDOW: f64 = 0.5;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("expected header `{CSV_HEADER}`, found `{0}`")]
    Header(String),
    #[error("line {line}: {msg}")]
    Row { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Reals are written with 17 significant digits.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn regret_csv(record: &RegretRecord) -> String {
    let mut out = String::with_capacity(48 * (record.episodes() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (k, (r, c)) in record
        .episode_regret
        .iter()
        .zip(&record.cumulative_regret)
        .enumerate()
    {
        let _ = writeln!(out, "{k},{},{}", real(*r), real(*c));
    }
    out
}

pub fn write_regret_csv(path: impl AsRef<Path>, record: &RegretRecord) -> Result<(), IoError> {
    fs::write(path, regret_csv(record))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretRow {
    pub episode: u64,
    pub episode_regret: f64,
    pub cum_regret: f64,
}

/// Parses the regret CSV, rejecting any other header or malformed rows.
pub fn parse_regret_csv(text: &str) -> Result<Vec<RegretRow>, IoError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim_end();
    if header != CSV_HEADER {
        return Err(IoError::Header(header.to_string()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(IoError::Row {
                line: line_no,
                msg: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let bad = |what: &str| IoError::Row {
            line: line_no,
            msg: format!("unparsable {what}"),
        };
        rows.push(RegretRow {
            episode: fields[0].trim().parse().map_err(|_| bad("episode"))?,
            episode_regret: fields[1].trim().parse().map_err(|_| bad("episode_regret"))?,
            cum_regret: fields[2].trim().parse().map_err(|_| bad("cum_regret"))?,
        });
    }
    Ok(rows)
}

pub fn read_regret_csv(path: impl AsRef<Path>) -> Result<Vec<RegretRow>, IoError> {
    parse_regret_csv(&fs::read_to_string(path)?)
}

/// Per-run summary. `config` alone reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub episodes: u64,
    pub final_cumulative_regret: f64,
    pub fitted_slope: Option<f64>,
    pub fit: Option<RegretFit>,
    pub fit_error: Option<String>,
    pub invariants: InvariantCounters,
    pub runtime_seconds: f64,
}

impl RunSummary {
    pub fn new(config: RunConfig, record: &RegretRecord) -> Self {
        let (fit, fit_error) = match fit_regret_exponent(&record.cumulative_regret, SUMMARY_WINDOW) {
            Ok(fit) => (Some(fit), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            config,
            episodes: record.episodes() as u64,
            final_cumulative_regret: record.final_regret(),
            fitted_slope: fit.and_then(|f| f.slope()),
            fit,
            fit_error,
            invariants: record.invariants.clone(),
            runtime_seconds: record.wall_time_secs,
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
