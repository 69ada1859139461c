use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use rlprune::harness::{
    export_heatmap, load_model, run_grid, run_training, write_run_outputs, ExperimentConfig,
    GridCell, FINAL_WINDOW,
};
use rlprune::metrics::model_counts;
use rlprune::Result;

#[derive(Parser)]
#[command(
    name = "rlprune",
    version,
    about = "Structured pruning of PPO actor networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write its logs, checkpoint and heatmaps.
    Train(RunArgs),
    /// Sweep strategies x lambda x ratio x seeds and write summary.csv.
    Grid(RunArgs),
    /// Write |W| of one layer of a saved model as CSV.
    Heatmap {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        layer: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print size and cost counts of a saved model.
    Counts {
        #[arg(long)]
        model: PathBuf,
    },
    /// Print the resolved configuration.
    Config(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    ratio: Option<f64>,
    /// Seed for `train`; comma-separated seed list for `grid`.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let mut set = |k: &str, v: Option<String>| match v {
            Some(v) => cfg.set(k, &v),
            None => Ok(()),
        };
        set("env", self.env.clone())?;
        set("prune.strategy", self.strategy.clone())?;
        set("prune.lambda", self.lambda.map(|v| v.to_string()))?;
        set("prune.p_final", self.ratio.map(|v| v.to_string()))?;
        set("seeds", self.seed.clone())?;
        set("episodes", self.episodes.map(|v| v.to_string()))?;
        set(
            "out_dir",
            self.out_dir.as_ref().map(|p| p.display().to_string()),
        )?;
        for kv in &self.overrides {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                rlprune::Error::Config(format!("--set expects KEY=VALUE, got `{kv}`"))
            })?;
            cfg.set(k, v)?;
        }
        if self.strategy.is_some() {
            cfg.strategies = vec![cfg.prune.strategy];
        }
        if let Some(l) = self.lambda {
            cfg.lambda_grid = vec![l];
        }
        if let Some(r) = self.ratio {
            cfg.ratio_grid = vec![r];
        }
        Ok(cfg)
    }
}

fn train(cfg: &ExperimentConfig) -> Result<bool> {
    let seed = cfg.seeds[0];
    let run = run_training(cfg, seed)?;
    let cell = GridCell::from_config(cfg);
    write_run_outputs(&cfg.out_dir, &cell.label(), &run)?;
    let counts = model_counts(&run.compact.actor);
    println!(
        "{} seed {seed}: final return {:.2} (last {FINAL_WINDOW}), neurons {}, weights {}, flops {}",
        cell.label(),
        run.last_mean(FINAL_WINDOW),
        counts.neurons,
        counts.weights,
        counts.flops
    );
    if let Some(e) = &run.error {
        error!("{e}");
    }
    Ok(run.error.is_none())
}

fn grid(cfg: &ExperimentConfig) -> Result<bool> {
    let report = run_grid(cfg)?;
    for s in &report.summaries {
        println!(
            "{}: {:.2} +/- {:.2} ({} runs, {} failed), neurons {:.1}, flops {:.1}",
            s.cell.label(),
            s.mean_return,
            s.std_return,
            s.runs,
            s.failed,
            s.neurons,
            s.flops
        );
    }
    Ok(report.all_succeeded())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train(args) => train(&args.resolve()?),
        Command::Grid(args) => grid(&args.resolve()?),
        Command::Heatmap { model, layer, out } => {
            export_heatmap(&load_model(&model)?.actor, layer, &out)?;
            Ok(true)
        }
        Command::Counts { model } => {
            let p = load_model(&model)?;
            let c = model_counts(&p.actor);
            println!("dims {:?}", p.actor.layer_dims());
            println!("neurons {}", c.neurons);
            println!("weights {}", c.weights);
            println!("flops {}", c.flops);
            println!("mults {}", c.mults);
            Ok(true)
        }
        Command::Config(args) => {
            print!("{}", args.resolve()?.to_kv_string());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            ExitCode::from(2)
        }
    }
}
