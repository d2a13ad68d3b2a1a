//! Subcommand implementations. Each returns the process exit code: 0 for
//! success, 1 when a check failed. Config problems surface as
//! `Error::Config` and become exit code 2 in `main`.

use crate::config::{self, InjectNoiseConfig, SweepConfig};
use crate::limits;
use crate::runner;
use serde::Serialize;
use std::path::Path;
use tlosslab::datagen::{self, DatasetConfig};
use tlosslab::gradcheck;
use tlosslab::{noise, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[derive(Serialize)]
struct GenDataReport<'a> {
    out_dir: &'a Path,
    side: usize,
    n_train: usize,
    n_test: usize,
}

pub fn gen_data(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
    json: bool,
) -> Result<i32> {
    let mut cfg: DatasetConfig = config::load_json(config_path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let dataset = datagen::generate(&cfg)?;
    datagen::export(&dataset, out_dir)?;
    if json {
        print_json(&GenDataReport {
            out_dir,
            side: dataset.side,
            n_train: dataset.train.len(),
            n_test: dataset.test.len(),
        })?;
    } else {
        println!(
            "wrote {} train and {} test samples ({}x{}) to {}",
            dataset.train.len(),
            dataset.test.len(),
            dataset.side,
            dataset.side,
            out_dir.display()
        );
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct InjectNoiseReport<'a> {
    out_dir: &'a Path,
    n_masks: usize,
    n_selected: usize,
    mean_dice_vs_original: f64,
}

pub fn inject_noise(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
    json: bool,
) -> Result<i32> {
    let mut cfg: InjectNoiseConfig = config::load_json(config_path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let noise_cfg = cfg.noise_config();
    noise_cfg.validate()?;
    let mut dataset = datagen::import(&cfg.data_dir)?;
    let originals: Vec<_> = dataset.train.iter().map(|s| s.train_mask.clone()).collect();
    let (corrupted, records) = noise::corrupt_dataset(&originals, &noise_cfg)?;
    dataset.set_train_labels(corrupted)?;
    datagen::export(&dataset, out_dir)?;
    let manifest = std::fs::File::create(out_dir.join("manifest.jsonl"))?;
    noise::write_manifest(manifest, &records)?;

    let n_selected = records.iter().filter(|r| r.selected).count();
    let mean_dice =
        records.iter().map(|r| r.dice_vs_original).sum::<f64>() / records.len().max(1) as f64;
    if json {
        print_json(&InjectNoiseReport {
            out_dir,
            n_masks: records.len(),
            n_selected,
            mean_dice_vs_original: mean_dice,
        })?;
    } else {
        println!(
            "corrupted {n_selected} of {} training masks (mean dice vs original {mean_dice:.4}); wrote {}",
            records.len(),
            out_dir.display()
        );
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SweepReport<'a> {
    out_dir: &'a Path,
    n_cells: usize,
    n_failed: usize,
    summary: &'a [crate::csvio::SummaryRow],
}

pub fn sweep(
    config_path: &Path,
    out_override: Option<&Path>,
    jobs: Option<usize>,
    seed_override: Option<u64>,
    json: bool,
) -> Result<i32> {
    let mut cfg: SweepConfig = config::load_json(config_path)?;
    if let Some(out) = out_override {
        cfg.out_dir = out.to_path_buf();
    }
    if let Some(seed) = seed_override {
        cfg.dataset.seed = seed;
        cfg.seeds = vec![seed];
    }
    let output = runner::run_sweep(&cfg, jobs)?;
    runner::write_outputs(&cfg.out_dir, &output)?;
    let n_failed = output
        .results
        .iter()
        .filter(|r| r.status == runner::RunStatus::Failed)
        .count();
    if json {
        print_json(&SweepReport {
            out_dir: &cfg.out_dir,
            n_cells: output.results.len(),
            n_failed,
            summary: &output.summaries,
        })?;
    } else {
        println!(
            "ran {} cells ({n_failed} failed); artifacts in {}",
            output.results.len(),
            cfg.out_dir.display()
        );
        println!("loss       alpha  beta   mean_dice  std_dice  n");
        for s in &output.summaries {
            println!(
                "{:<10} {:<6} {:<6} {:<10.4} {:<9.4} {}",
                s.loss, s.alpha, s.beta, s.mean_dice, s.std_dice, s.n_seeds
            );
        }
    }
    Ok(EXIT_OK)
}

pub fn grad_check(seed_override: Option<u64>, json: bool) -> Result<i32> {
    let report = gradcheck::run_all(seed_override.unwrap_or(0))?;
    if json {
        print_json(&report)?;
    } else {
        for s in &report.suites {
            println!(
                "{}: {} configs, {} gradients, max rel err {:.3e} (tolerance {:.0e}) -> {}",
                s.name,
                s.n_configs,
                s.n_gradients,
                s.max_rel_err,
                s.tolerance,
                if s.passed() { "ok" } else { "FAILED" }
            );
            if !s.passed() {
                println!("  worst case: {}", s.worst_case);
            }
        }
    }
    Ok(if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

pub fn limits_check(json: bool) -> Result<i32> {
    let report = limits::run_all()?;
    if json {
        print_json(&report)?;
    } else {
        for c in &report.cases {
            println!(
                "nu={} D={}: small slope {:.6} (expected {:.6}, r2 {:.6}), large slope {:.6} (expected {:.6}, r2 {:.6}) -> {}",
                c.nu,
                c.dim,
                c.small_slope_fitted,
                c.small_slope_expected,
                c.small_r_squared,
                c.large_slope_fitted,
                c.large_slope_expected,
                c.large_r_squared,
                if c.passed() { "ok" } else { "FAILED" }
            );
        }
    }
    Ok(if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}
