//! Experiment configs, deterministic execution, report files and the CLI.

mod cli;
mod config;
mod run;

pub use cli::{cli, cli_with, exit_code, summarize};
pub use config::{ExperimentConfig, ExperimentKind, DEFAULT_GRID_POINTS, DEFAULT_RHO_REPS};
pub use run::{run, sha256_hex, OutputFile, RunManifest, Stat, Summary, TaskSeed, MANIFEST_FILE, SUMMARY_FILE};

/// 17 significant digits, `.` separator.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
