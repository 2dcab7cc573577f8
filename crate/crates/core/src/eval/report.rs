//! Flat report tables and their CSV / JSON serialization.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::experiment::EvalReport;
use super::metrics::EntityCounts;
use super::ExperimentConfig;
use crate::corpus::EntityClass;
use crate::error::{Error, Result};

/// One (config, k, fold, run, book) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub config_id: String,
    pub k: usize,
    pub fold: usize,
    pub run: usize,
    pub book: String,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

impl RunRow {
    pub(crate) fn new(config_id: &str, k: usize, fold: usize, run: usize, book: &str, c: EntityCounts) -> Self {
        let prf = c.prf();
        RunRow {
            config_id: config_id.to_string(),
            k,
            fold,
            run,
            book: book.to_string(),
            true_positives: c.true_positives,
            predicted: c.predicted,
            gold: c.gold,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            precision_undefined: prf.precision_undefined,
            recall_undefined: prf.recall_undefined,
        }
    }
}

/// Scores at one `k`: the mean over (fold, run) cells and the micro
/// average over everything pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub config_id: String,
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl CurveRow {
    pub(crate) fn new(config_id: &str, k: usize, mean: [f64; 3], pooled: EntityCounts) -> Self {
        let micro = pooled.prf();
        CurveRow {
            config_id: config_id.to_string(),
            k,
            precision: mean[0],
            recall: mean[1],
            f1: mean[2],
            micro_precision: micro.precision,
            micro_recall: micro.recall,
            micro_f1: micro.f1,
            true_positives: pooled.true_positives,
            predicted: pooled.predicted,
            gold: pooled.gold,
        }
    }
}

/// A book's own entities, pooled over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookRow {
    pub config_id: String,
    pub k: usize,
    pub book: String,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl BookRow {
    pub(crate) fn new(config_id: &str, k: usize, book: &str, c: EntityCounts) -> Self {
        let prf = c.prf();
        BookRow {
            config_id: config_id.to_string(),
            k,
            book: book.to_string(),
            true_positives: c.true_positives,
            predicted: c.predicted,
            gold: c.gold,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub config_id: String,
    pub k: usize,
    pub class: EntityClass,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassRow {
    pub(crate) fn new(config_id: &str, k: usize, class: EntityClass, c: EntityCounts) -> Self {
        let prf = c.prf();
        ClassRow {
            config_id: config_id.to_string(),
            k,
            class,
            true_positives: c.true_positives,
            predicted: c.predicted,
            gold: c.gold,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub config_id: String,
    pub method: String,
    pub scorer: String,
    pub n: usize,
    pub window: String,
    pub runs: usize,
    pub folds: usize,
    pub seed: u64,
    /// Space-separated.
    pub k_values: String,
    pub sentences: usize,
    pub best_k: usize,
    pub best_f1: f64,
}

impl SummaryRow {
    pub(crate) fn new(config: &ExperimentConfig, config_id: &str, curves: &[CurveRow], sentences: usize) -> Self {
        let best = curves
            .iter()
            .fold(None::<&CurveRow>, |best, c| match best {
                Some(b) if b.f1 >= c.f1 => Some(b),
                _ => Some(c),
            });
        SummaryRow {
            config_id: config_id.to_string(),
            method: config.method.to_string(),
            scorer: config.scorer.as_ref().map(|s| s.kind().to_string()).unwrap_or_default(),
            n: config.n,
            window: config.window.to_string(),
            runs: config.runs,
            folds: config.folds,
            seed: config.seed,
            k_values: config.k_values().iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
            sentences,
            best_k: best.map_or(0, |b| b.k),
            best_f1: best.map_or(0.0, |b| b.f1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::InvalidInput(format!("unknown report format {s:?}"))),
        }
    }
}

fn write_table<T: Serialize>(dir: &Path, name: &str, format: ReportFormat, rows: &[T]) -> Result<PathBuf> {
    let path = dir.join(format!("{name}.{}", format.extension()));
    let bytes = match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row)?;
            }
            w.into_inner().map_err(|e| Error::io(&path, e.into_error()))?
        }
        ReportFormat::Json => {
            let mut v = serde_json::to_vec_pretty(rows)?;
            v.push(b'\n');
            v
        }
    };
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `curves`, `per_book`, `per_class`, `summary` and `runs` tables for
/// all reports into `dir`, once per format. Returns the written paths.
pub fn emit_report(reports: &[EvalReport], dir: impl AsRef<Path>, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let curves: Vec<&CurveRow> = reports.iter().flat_map(|r| &r.curves).collect();
    let books: Vec<&BookRow> = reports.iter().flat_map(|r| &r.per_book).collect();
    let classes: Vec<&ClassRow> = reports.iter().flat_map(|r| &r.per_class).collect();
    let summary: Vec<&SummaryRow> = reports.iter().map(|r| &r.summary).collect();
    let runs: Vec<&RunRow> = reports.iter().flat_map(|r| &r.rows).collect();
    let mut written = Vec::new();
    for &format in formats {
        written.push(write_table(dir, "curves", format, &curves)?);
        written.push(write_table(dir, "per_book", format, &books)?);
        written.push(write_table(dir, "per_class", format, &classes)?);
        written.push(write_table(dir, "summary", format, &summary)?);
        written.push(write_table(dir, "runs", format, &runs)?);
    }
    Ok(written)
}
