//! Experiment driver: configuration, training loop, grid sweep and file outputs.

mod config;
mod grid;
mod io;
mod trainer;

pub use config::ExperimentConfig;
pub use grid::{
    grid_cells, run_grid, summarize, summary_csv, write_run_outputs, CellSummary, GridCell,
    GridReport, FINAL_WINDOW, SUMMARY_HEADER,
};
pub use io::{
    export_heatmap, heatmap_csv, load_model, metrics_csv, model_from_str, model_to_string,
    prune_log_csv, save_model, write_metrics_csv, write_prune_log, CHECKPOINT_VERSION,
    METRICS_HEADER, PRUNE_LOG_HEADER,
};
pub use trainer::{build_policy, last_mean, run_training, RunResult, SeedStreams};
