//! CSV artifacts of the sweep: results, summary, and per-run traces.
//!
//! Every writer here has a matching reader, and floats are written in the
//! shortest form that parses back to the identical bits, so all three files
//! round-trip exactly.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use tlosslab::trainer::{EpochRecord, TrainTrace};
use tlosslab::{Error, Result};

/// One sweep cell in `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub loss: String,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    /// `ok`, or `failed` when the run aborted on a non-finite loss.
    pub status: String,
    /// Mean test dice over the final 10 epochs; empty for failed runs.
    pub last10_mean_test_dice: Option<f64>,
    /// Trace file name relative to the output directory; empty when failed.
    pub trace_file: String,
}

/// One aggregated condition in `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub loss: String,
    pub alpha: f64,
    pub beta: f64,
    pub mean_dice: f64,
    pub std_dice: f64,
    /// Number of completed (non-failed) seeds behind the aggregate.
    pub n_seeds: usize,
}

/// One epoch in a per-run trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub dice_vs_clean: f64,
    pub dice_vs_noisy: f64,
    pub test_dice: f64,
    pub nu_tilde: f64,
}

impl From<&EpochRecord> for TraceRow {
    fn from(r: &EpochRecord) -> Self {
        Self {
            epoch: r.epoch,
            train_loss: r.train_loss,
            dice_vs_clean: r.train_dice_clean,
            dice_vs_noisy: r.train_dice_noisy,
            test_dice: r.test_dice,
            nu_tilde: r.nu_tilde,
        }
    }
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(csv_err)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

pub fn write_results<W: Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    write_rows(w, rows)
}

pub fn read_results<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    read_rows(r)
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    write_rows(w, rows)
}

pub fn read_summary<R: Read>(r: R) -> Result<Vec<SummaryRow>> {
    read_rows(r)
}

pub fn write_trace<W: Write>(w: W, trace: &TrainTrace) -> Result<()> {
    let rows: Vec<TraceRow> = trace.epochs.iter().map(TraceRow::from).collect();
    write_rows(w, &rows)
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<TraceRow>> {
    read_rows(r)
}

pub fn read_results_file(path: &Path) -> Result<Vec<ResultRow>> {
    read_results(std::fs::File::open(path)?)
}

pub fn read_summary_file(path: &Path) -> Result<Vec<SummaryRow>> {
    read_summary(std::fs::File::open(path)?)
}

pub fn read_trace_file(path: &Path) -> Result<Vec<TraceRow>> {
    read_trace(std::fs::File::open(path)?)
}
