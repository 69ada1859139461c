use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{error, info};
use rayon::prelude::*;

use super::io::{export_heatmap, save_model, write_metrics_csv, write_prune_log};
use super::trainer::{run_training, RunResult};
use super::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::model_counts;
use crate::pruning::Strategy;

pub const SUMMARY_HEADER: &str =
    "strategy,lambda,ratio,runs,failed,mean_return,std_return,neurons,weights,flops,mults";

/// Episodes averaged for a run's final return.
pub const FINAL_WINDOW: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub strategy: Strategy,
    /// 0 for strategies without a regulariser.
    pub lambda: f64,
    /// 0 for strategies without a target ratio.
    pub ratio: f64,
}

impl GridCell {
    /// The cell a single-run config belongs to.
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        let s = cfg.prune.strategy;
        Self {
            strategy: s,
            lambda: if s.uses_lambda() {
                cfg.prune.lambda
            } else {
                0.0
            },
            ratio: if s.uses_ratio() {
                cfg.prune.p_final
            } else {
                0.0
            },
        }
    }

    pub fn label(&self) -> String {
        format!("{}_lam{:e}_r{}", self.strategy, self.lambda, self.ratio)
    }

    /// The experiment config for this cell.
    pub fn apply(&self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut cfg = base.clone();
        cfg.prune.strategy = self.strategy;
        if self.strategy.uses_lambda() {
            cfg.prune.lambda = self.lambda;
        }
        if self.strategy.uses_ratio() {
            cfg.prune.p_final = self.ratio;
        }
        cfg
    }
}

/// Every strategy crossed with the λ and ratio values relevant to it.
pub fn grid_cells(cfg: &ExperimentConfig) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for &strategy in &cfg.strategies {
        let lambdas = if strategy.uses_lambda() {
            cfg.lambda_grid.clone()
        } else {
            vec![0.0]
        };
        let ratios = if strategy.uses_ratio() {
            cfg.ratio_grid.clone()
        } else {
            vec![0.0]
        };
        for &lambda in &lambdas {
            for &ratio in &ratios {
                cells.push(GridCell {
                    strategy,
                    lambda,
                    ratio,
                });
            }
        }
    }
    cells
}

/// Aggregate over the seeds of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: GridCell,
    pub runs: usize,
    pub failed: usize,
    /// Mean and population standard deviation, across seeds, of each run's final return.
    pub mean_return: f64,
    pub std_return: f64,
    /// Seed means of the compacted actor's size and cost.
    pub neurons: f64,
    pub weights: f64,
    pub flops: f64,
    pub mults: f64,
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub summaries: Vec<CellSummary>,
    /// `(cell label, seed, message)` for every failed run.
    pub failures: Vec<(String, u64, String)>,
}

impl GridReport {
    pub fn all_succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(
    cell: GridCell,
    results: &[std::result::Result<RunResult, String>],
) -> CellSummary {
    let ok: Vec<&RunResult> = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .filter(|r| r.error.is_none())
        .collect();
    let finals: Vec<f64> = ok.iter().map(|r| r.last_mean(FINAL_WINDOW)).collect();
    let (mean_return, std_return) = mean_std(&finals);
    let counts: Vec<_> = ok.iter().map(|r| model_counts(&r.compact.actor)).collect();
    let avg = |f: &dyn Fn(&crate::metrics::ModelCounts) -> f64| {
        mean_std(&counts.iter().map(f).collect::<Vec<_>>()).0
    };
    CellSummary {
        cell,
        runs: results.len(),
        failed: results.len() - ok.len(),
        mean_return,
        std_return,
        neurons: avg(&|c| c.neurons as f64),
        weights: avg(&|c| c.weights as f64),
        flops: avg(&|c| c.flops),
        mults: avg(&|c| c.mults as f64),
    }
}

pub fn summary_csv(summaries: &[CellSummary]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for c in summaries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.cell.strategy,
            c.cell.lambda,
            c.cell.ratio,
            c.runs,
            c.failed,
            c.mean_return,
            c.std_return,
            c.neurons,
            c.weights,
            c.flops,
            c.mults
        );
    }
    s
}

fn run_path(dir: &Path, label: &str, seed: u64, suffix: &str) -> PathBuf {
    dir.join(format!("{label}_seed{seed}{suffix}"))
}

/// Writes the per-episode log, prune log, compact checkpoint and one heatmap per layer.
pub fn write_run_outputs(dir: &Path, label: &str, run: &RunResult) -> Result<()> {
    write_metrics_csv(&run_path(dir, label, run.seed, ".csv"), &run.rows)?;
    write_prune_log(
        &run_path(dir, label, run.seed, "_prune.csv"),
        &run.prune_log,
    )?;
    save_model(
        &run.compact,
        &run_path(dir, label, run.seed, "_compact.model"),
    )?;
    for l in 0..run.compact.actor.num_layers() {
        export_heatmap(
            &run.compact.actor,
            l,
            &run_path(dir, label, run.seed, &format!("_layer{l}_heatmap.csv")),
        )?;
    }
    Ok(())
}

/// Runs every cell for every seed. A failing run is recorded and the sweep continues.
/// Writes per-run outputs, the resolved config and `summary.csv` under `cfg.out_dir`.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<GridReport> {
    cfg.validate_grid()?;
    let cells = grid_cells(cfg);
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    std::fs::write(cfg.out_dir.join("config.txt"), cfg.to_kv_string())
        .map_err(|e| Error::io(cfg.out_dir.join("config.txt"), e))?;
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();
    info!(
        "grid: {} cells x {} seeds = {} runs",
        cells.len(),
        cfg.seeds.len(),
        jobs.len()
    );

    let results: Vec<std::result::Result<RunResult, String>> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let cell = cells[c];
            let run = run_training(&cell.apply(cfg), seed).map_err(|e| e.to_string())?;
            write_run_outputs(&cfg.out_dir, &cell.label(), &run).map_err(|e| e.to_string())?;
            Ok(run)
        })
        .collect();

    let mut failures = Vec::new();
    let mut summaries = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let label = cell.label();
        let cell_results: Vec<_> = jobs
            .iter()
            .zip(&results)
            .filter(|((jc, _), _)| *jc == c)
            .map(|((_, seed), r)| {
                let msg = match r {
                    Err(e) => Some(e.clone()),
                    Ok(run) => run.error.clone(),
                };
                if let Some(msg) = msg {
                    error!("{label} seed {seed}: {msg}");
                    failures.push((label.clone(), *seed, msg));
                }
                r.clone()
            })
            .collect();
        summaries.push(summarize(*cell, &cell_results));
    }
    let path = cfg.out_dir.join("summary.csv");
    std::fs::write(&path, summary_csv(&summaries)).map_err(|e| Error::io(&path, e))?;
    Ok(GridReport {
        summaries,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dsp_grid_has_120_runs() {
        let cfg = ExperimentConfig::default();
        assert_eq!(grid_cells(&cfg).len() * cfg.seeds.len(), 120);
    }

    #[test]
    fn irrelevant_axes_collapse() {
        let mut cfg = ExperimentConfig::default();
        cfg.strategies = vec![Strategy::None, Strategy::Pops, Strategy::Ssl];
        let cells = grid_cells(&cfg);
        assert_eq!(cells.len(), 1 + 4 + 24);
        assert_eq!(cells[0].lambda, 0.0);
        assert_eq!(cells[0].ratio, 0.0);
        assert!(cells[1..5].iter().all(|c| c.lambda == 0.0));
    }

    #[test]
    fn mean_std_population() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn labels_are_distinct() {
        let cfg = ExperimentConfig::default();
        let mut labels: Vec<String> = grid_cells(&cfg).iter().map(GridCell::label).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 24);
    }
}
