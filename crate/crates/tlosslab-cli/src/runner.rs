//! Sweep engine: expands the config into cells, runs each cell (optionally
//! in parallel), and aggregates per-condition summaries.
//!
//! A cell's corrupted labels depend only on (dataset seed, alpha, beta, run
//! seed), never on the loss, so every loss at the same noise condition and
//! seed trains against identical labels: the comparison across losses is
//! paired. Runs that abort on a non-finite loss become `failed` rows and do
//! not stop the sweep; they are excluded from aggregates.

use crate::config::{SweepConfig, TrainSettings};
use crate::csvio::{self, ResultRow, SummaryRow};
use rayon::prelude::*;
use std::path::Path;
use tlosslab::datagen::{self, Dataset};
use tlosslab::losses::LossSpec;
use tlosslab::metrics;
use tlosslab::noise::{self, NoiseConfig};
use tlosslab::seed;
use tlosslab::trainer::{self, TrainTrace};
use tlosslab::{Error, Result};

/// One run: a loss at one noise condition with one seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub loss: LossSpec,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl Cell {
    pub fn trace_file(&self) -> String {
        format!(
            "trace_{}_a{}_b{}_s{}.csv",
            self.loss.kind, self.alpha, self.beta, self.seed
        )
    }
}

/// Expands the grid in a fixed order: losses, then conditions (the no-noise
/// cell first, then positive alphas crossed with betas), then seeds.
pub fn cells(cfg: &SweepConfig) -> Vec<Cell> {
    let mut conditions: Vec<(f64, f64)> = Vec::new();
    if cfg.alphas.iter().any(|&a| a == 0.0) {
        conditions.push((0.0, 0.0));
    }
    for &a in cfg.alphas.iter().filter(|&&a| a > 0.0) {
        for &b in &cfg.betas {
            conditions.push((a, b));
        }
    }
    let mut out = Vec::with_capacity(cfg.n_cells());
    for &loss in &cfg.losses {
        for &(alpha, beta) in &conditions {
            for &seed in &cfg.seeds {
                out.push(Cell {
                    loss,
                    alpha,
                    beta,
                    seed,
                });
            }
        }
    }
    out
}

/// Seed of a cell's label corruption. Depends on everything that defines
/// the noise condition and nothing else (in particular not the loss).
pub fn noise_seed(dataset_seed: u64, alpha: f64, beta: f64, run_seed: u64) -> u64 {
    seed::mix(&[
        dataset_seed,
        seed::tag("sweep-noise"),
        alpha.to_bits(),
        beta.to_bits(),
        run_seed,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Failed => "failed",
        }
    }
}

/// Outcome of one cell, trace included so callers can inspect or write it.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub cell: Cell,
    pub status: RunStatus,
    pub last10_mean_test_dice: Option<f64>,
    pub trace: Option<TrainTrace>,
}

impl RunResult {
    pub fn to_row(&self) -> ResultRow {
        ResultRow {
            loss: self.cell.loss.kind.to_string(),
            alpha: self.cell.alpha,
            beta: self.cell.beta,
            seed: self.cell.seed,
            status: self.status.as_str().into(),
            last10_mean_test_dice: self.last10_mean_test_dice,
            trace_file: match self.status {
                RunStatus::Ok => self.cell.trace_file(),
                RunStatus::Failed => String::new(),
            },
        }
    }
}

/// The base dataset with this cell's corrupted training labels.
fn cell_dataset(base: &Dataset, dataset_seed: u64, cell: &Cell) -> Result<Dataset> {
    let mut data = base.clone();
    if cell.alpha > 0.0 {
        let noise_cfg = NoiseConfig {
            alpha: cell.alpha,
            beta: cell.beta,
            seed: noise_seed(dataset_seed, cell.alpha, cell.beta, cell.seed),
        };
        let originals: Vec<_> = base.train.iter().map(|s| s.train_mask.clone()).collect();
        let (corrupted, _records) = noise::corrupt_dataset(&originals, &noise_cfg)?;
        data.set_train_labels(corrupted)?;
    }
    Ok(data)
}

/// Runs one cell. A non-finite training loss yields a `Failed` result;
/// any other error propagates.
pub fn run_cell(
    base: &Dataset,
    dataset_seed: u64,
    train: &TrainSettings,
    cell: &Cell,
) -> Result<RunResult> {
    let data = cell_dataset(base, dataset_seed, cell)?;
    let cfg = train.to_train_config(cell.loss, cell.seed);
    match trainer::train(&data, &cfg) {
        Ok(outcome) => {
            let series = outcome.trace.test_dice_series();
            let k = series.len().min(10);
            let last10 = metrics::last_k_mean(&series, k)?;
            Ok(RunResult {
                cell: *cell,
                status: RunStatus::Ok,
                last10_mean_test_dice: Some(last10),
                trace: Some(outcome.trace),
            })
        }
        Err(Error::NonFiniteLoss { .. }) => Ok(RunResult {
            cell: *cell,
            status: RunStatus::Failed,
            last10_mean_test_dice: None,
            trace: None,
        }),
        Err(e) => Err(e),
    }
}

/// Everything a sweep produces, still in memory.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub results: Vec<RunResult>,
    pub summaries: Vec<SummaryRow>,
}

/// Mean and sample standard deviation of completed runs, grouped by
/// (loss, alpha, beta) in first-appearance order. Conditions whose every
/// seed failed are dropped.
pub fn summarize_results(results: &[RunResult]) -> Result<Vec<SummaryRow>> {
    let mut groups: Vec<((String, u64, u64), (f64, f64), Vec<f64>)> = Vec::new();
    for r in results {
        if r.status != RunStatus::Ok {
            continue;
        }
        let dice = r
            .last10_mean_test_dice
            .ok_or_else(|| Error::Empty("dice of a completed run"))?;
        let key = (
            r.cell.loss.kind.to_string(),
            r.cell.alpha.to_bits(),
            r.cell.beta.to_bits(),
        );
        match groups.iter_mut().find(|(k, _, _)| *k == key) {
            Some((_, _, values)) => values.push(dice),
            None => groups.push((key, (r.cell.alpha, r.cell.beta), vec![dice])),
        }
    }
    groups
        .into_iter()
        .map(|((loss, _, _), (alpha, beta), values)| {
            let stat = metrics::summary_of(&values)?;
            Ok(SummaryRow {
                loss,
                alpha,
                beta,
                mean_dice: stat.mean,
                std_dice: stat.std,
                n_seeds: stat.n,
            })
        })
        .collect()
}

/// Generates the dataset once, runs every cell, and aggregates. `jobs`
/// limits the worker threads; `None` uses the default pool. Results are in
/// cell order regardless of parallelism.
pub fn run_sweep(cfg: &SweepConfig, jobs: Option<usize>) -> Result<SweepOutput> {
    cfg.validate()?;
    let base = datagen::generate(&cfg.dataset)?;
    let all = cells(cfg);
    let work = |cells: &[Cell]| -> Result<Vec<RunResult>> {
        cells
            .par_iter()
            .map(|c| run_cell(&base, cfg.dataset.seed, &cfg.train, c))
            .collect()
    };
    let results = match jobs {
        Some(j) => {
            if j == 0 {
                return Err(Error::Config("jobs must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?
                .install(|| work(&all))?
        }
        None => work(&all)?,
    };
    let summaries = summarize_results(&results)?;
    Ok(SweepOutput { results, summaries })
}

/// Writes `results.csv`, `summary.csv`, and one trace CSV per completed run.
pub fn write_outputs(out_dir: &Path, output: &SweepOutput) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let rows: Vec<ResultRow> = output.results.iter().map(RunResult::to_row).collect();
    csvio::write_results(std::fs::File::create(out_dir.join("results.csv"))?, &rows)?;
    csvio::write_summary(
        std::fs::File::create(out_dir.join("summary.csv"))?,
        &output.summaries,
    )?;
    for r in &output.results {
        if let Some(trace) = &r.trace {
            let file = std::fs::File::create(out_dir.join(r.cell.trace_file()))?;
            csvio::write_trace(file, trace)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::load_json;
    use tlosslab::losses::LossKind;

    fn tiny_sweep_json(dir: &Path) -> std::path::PathBuf {
        let path = dir.join("sweep.json");
        std::fs::write(
            &path,
            format!(
                r#"{{
                    "losses": [{{"kind": "mse"}}, {{"kind": "tloss"}}],
                    "alphas": [0.0, 0.5],
                    "betas": [0.7],
                    "seeds": [0, 1],
                    "dataset": {{"n_train": 6, "n_test": 3, "seed": 9, "side": 16}},
                    "train": {{"epochs": 3, "batch_size": 4, "hidden_dim": 4}},
                    "out_dir": {:?}
                }}"#,
                dir.join("out")
            ),
        )
        .unwrap();
        path
    }

    #[test]
    fn grid_expansion_matches_cardinality_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let cfg: SweepConfig = load_json(&tiny_sweep_json(dir.path())).unwrap();
        let all = cells(&cfg);
        assert_eq!(all.len(), cfg.n_cells());
        assert_eq!(all.len(), 2 * 2 * (1 + 1));
        // First cells: mse at the no-noise condition, seeds in order.
        assert_eq!(all[0].loss.kind, LossKind::Mse);
        assert_eq!((all[0].alpha, all[0].beta, all[0].seed), (0.0, 0.0, 0));
        assert_eq!(all[1].seed, 1);
        assert_eq!((all[2].alpha, all[2].beta), (0.5, 0.7));
        assert_eq!(all[4].loss.kind, LossKind::Tloss);
    }

    #[test]
    fn single_cell_sweep_has_one_row() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg: SweepConfig = load_json(&tiny_sweep_json(dir.path())).unwrap();
        cfg.losses.truncate(1);
        cfg.alphas = vec![0.0];
        cfg.seeds = vec![0];
        let out = run_sweep(&cfg, Some(1)).unwrap();
        assert_eq!(out.results.len(), 1);
        assert_eq!(out.results[0].status, RunStatus::Ok);
        assert_eq!(out.summaries.len(), 1);
        assert_eq!(out.summaries[0].n_seeds, 1);
        assert_eq!(out.summaries[0].std_dice, 0.0);
    }

    #[test]
    fn noise_seed_ignores_loss_and_separates_conditions() {
        let a = noise_seed(1, 0.5, 0.7, 0);
        assert_eq!(a, noise_seed(1, 0.5, 0.7, 0));
        assert_ne!(a, noise_seed(1, 0.5, 0.7, 1));
        assert_ne!(a, noise_seed(1, 0.3, 0.7, 0));
        assert_ne!(a, noise_seed(1, 0.5, 0.5, 0));
        assert_ne!(a, noise_seed(2, 0.5, 0.7, 0));
    }

    #[test]
    fn cells_share_labels_across_losses() {
        let dir = tempfile::tempdir().unwrap();
        let cfg: SweepConfig = load_json(&tiny_sweep_json(dir.path())).unwrap();
        let base = datagen::generate(&cfg.dataset).unwrap();
        let mk = |loss| Cell {
            loss: LossSpec::new(loss),
            alpha: 0.5,
            beta: 0.7,
            seed: 1,
        };
        let d1 = cell_dataset(&base, cfg.dataset.seed, &mk(LossKind::Mse)).unwrap();
        let d2 = cell_dataset(&base, cfg.dataset.seed, &mk(LossKind::Tloss)).unwrap();
        let masks = |d: &Dataset| -> Vec<_> {
            d.train.iter().map(|s| s.train_mask.clone()).collect()
        };
        assert_eq!(masks(&d1), masks(&d2));
        // And the corruption really changed something at alpha = 0.5.
        assert_ne!(masks(&d1), masks(&base));
    }

    #[test]
    fn sweep_is_deterministic_and_jobs_invariant() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg: SweepConfig = load_json(&tiny_sweep_json(dir.path())).unwrap();
        cfg.losses = vec![LossSpec::new(LossKind::Mse)];
        let a = run_sweep(&cfg, Some(1)).unwrap();
        let b = run_sweep(&cfg, Some(3)).unwrap();
        assert_eq!(a.results.len(), b.results.len());
        for (x, y) in a.results.iter().zip(&b.results) {
            assert_eq!(x.cell, y.cell);
            assert_eq!(x.trace, y.trace);
        }
        assert_eq!(a.summaries, b.summaries);
    }

    #[test]
    fn summary_matches_recomputation_from_results() {
        let dir = tempfile::tempdir().unwrap();
        let cfg: SweepConfig = load_json(&tiny_sweep_json(dir.path())).unwrap();
        let out = run_sweep(&cfg, Some(2)).unwrap();
        assert_eq!(out.results.len(), cfg.n_cells());
        for s in &out.summaries {
            let group: Vec<f64> = out
                .results
                .iter()
                .filter(|r| {
                    r.cell.loss.kind.to_string() == s.loss
                        && r.cell.alpha == s.alpha
                        && r.cell.beta == s.beta
                        && r.status == RunStatus::Ok
                })
                .map(|r| r.last10_mean_test_dice.unwrap())
                .collect();
            assert_eq!(group.len(), s.n_seeds);
            let mean = group.iter().sum::<f64>() / group.len() as f64;
            assert!((mean - s.mean_dice).abs() < 1e-12);
        }
    }

    #[test]
    fn outputs_roundtrip_through_own_readers() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg: SweepConfig = load_json(&tiny_sweep_json(dir.path())).unwrap();
        cfg.losses = vec![LossSpec::new(LossKind::Tloss)];
        cfg.seeds = vec![0];
        let out = run_sweep(&cfg, Some(1)).unwrap();
        let out_dir = dir.path().join("artifacts");
        write_outputs(&out_dir, &out).unwrap();

        let rows = csvio::read_results_file(&out_dir.join("results.csv")).unwrap();
        assert_eq!(rows.len(), out.results.len());
        for (row, run) in rows.iter().zip(&out.results) {
            assert_eq!(*row, run.to_row());
        }
        let summaries = csvio::read_summary_file(&out_dir.join("summary.csv")).unwrap();
        assert_eq!(summaries, out.summaries);
        for run in &out.results {
            let trace = csvio::read_trace_file(&out_dir.join(run.cell.trace_file())).unwrap();
            assert_eq!(trace.len(), run.trace.as_ref().unwrap().epochs.len());
            let want: Vec<csvio::TraceRow> = run
                .trace
                .as_ref()
                .unwrap()
                .epochs
                .iter()
                .map(csvio::TraceRow::from)
                .collect();
            assert_eq!(trace, want);
        }
    }
}
