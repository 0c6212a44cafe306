use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::{ExperimentConfig, ExperimentKind};
use super::run::{run, sha256_hex, RunManifest, Summary, SUMMARY_FILE};
use crate::error::{Error, Result};

const DEFAULT_OUT: &str = "equiproc-out";

#[derive(Debug, Parser)]
#[command(name = "equiproc", version, about = "Monte Carlo checks of stochastic equicontinuity for nonlinear time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate model paths.
    Simulate(RunArgs),
    /// Coupling decay of the raw series.
    GmcDecay(RunArgs),
    /// Coupling decay of a function family over a theta grid.
    FamilyDecay(RunArgs),
    /// Coupling decay of the bounding functions of a bracketing cover.
    BracketDecay(RunArgs),
    /// Coupling decay of an indicator-of-index family.
    IndicatorDecay(RunArgs),
    /// Equicontinuity modulus per delta.
    Modulus(RunArgs),
    /// Exceedance frequencies of the modulus per delta and n.
    Probe(RunArgs),
    /// Moment scaling ratios for fixed pairs.
    MomentScaling(RunArgs),
    /// Sample quantilogram and its decomposition.
    Quantilogram(RunArgs),
    /// Median or Huber location estimates.
    MEstimate(RunArgs),
    /// Stochastic dominance sup-statistic.
    Dominance(RunArgs),
    /// Bracketing integral and bracketing numbers.
    BracketingIntegral(RunArgs),
    /// Print the key statistics of a run directory and write plot data.
    Summarize { dir: PathBuf },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `reps`.
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "EQUIPROC_THREADS")]
    threads: Option<usize>,
}

impl Command {
    fn kind(&self) -> Option<(ExperimentKind, &RunArgs)> {
        use ExperimentKind as K;
        Some(match self {
            Command::Simulate(a) => (K::Simulate, a),
            Command::GmcDecay(a) => (K::GmcDecay, a),
            Command::FamilyDecay(a) => (K::FamilyDecay, a),
            Command::BracketDecay(a) => (K::BracketDecay, a),
            Command::IndicatorDecay(a) => (K::IndicatorDecay, a),
            Command::Modulus(a) => (K::Modulus, a),
            Command::Probe(a) => (K::Probe, a),
            Command::MomentScaling(a) => (K::MomentScaling, a),
            Command::Quantilogram(a) => (K::Quantilogram, a),
            Command::MEstimate(a) => (K::MEstimate, a),
            Command::Dominance(a) => (K::Dominance, a),
            Command::BracketingIntegral(a) => (K::BracketingIntegral, a),
            Command::Summarize { .. } => return None,
        })
    }
}

/// Exit status for an error: 2 for anything wrong with the request, 1 for
/// failures while running it.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation(_)
        | Error::Json(_)
        | Error::InvalidModel(_)
        | Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::LagTooLarge { .. }
        | Error::CoverTooLarge { .. }
        | Error::DivergentIntegral { .. }
        | Error::CouplingConfig(_) => 2,
        Error::LengthMismatch(..) | Error::EmptyData | Error::Manifest(_) | Error::Io(_) => 1,
    }
}

/// Runs the command line `argv` (program name first) against the process's
/// stdout and stderr.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    cli_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn cli_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                2
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let result = match parsed.command.kind() {
        Some((kind, args)) => run_command(kind, args, stdout),
        None => {
            let Command::Summarize { dir } = &parsed.command else { unreachable!() };
            summarize(dir).map(|text| {
                let _ = write!(stdout, "{text}");
            })
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn run_command(kind: ExperimentKind, args: &RunArgs, stdout: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut config = ExperimentConfig::from_json(&text)?;
    let mut problems = Vec::new();
    if config.kind != kind {
        problems.push(format!("config is a {} experiment, not {}", config.kind.name(), kind.name()));
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(reps) = args.reps {
        config.reps = Some(reps);
    }
    if args.threads == Some(0) {
        problems.push("--threads must be at least 1".into());
    }
    problems.extend(config.problems());
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let manifest = pool.install(|| run(&config, &out))?;
    let _ = writeln!(stdout, "wrote {} files to {}", manifest.outputs.len() + 1, out.display());
    Ok(())
}

fn format_number(x: Option<f64>) -> String {
    match x {
        None => "-".into(),
        Some(v) if v == 0.0 || (1e-3..1e5).contains(&v.abs()) => format!("{v:.4}"),
        Some(v) => format!("{v:.4e}"),
    }
}

/// Columns of a report CSV by header name.
fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let idx = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::Manifest(format!("{} has no column {n}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        for (c, &i) in idx.iter().enumerate() {
            cols[c].push(cells.get(i).unwrap_or(&"").to_string());
        }
    }
    Ok(cols)
}

fn write_plot(dir: &Path, name: &str, x: &[String], y: &[String], se: &[String]) -> Result<()> {
    let mut text = String::from("x,y,se\n");
    for i in 0..x.len() {
        let _ = writeln!(text, "{},{},{}", x[i], y[i], se[i]);
    }
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

/// Checks the manifest digests, writes `plot_*.csv` (`x,y,se`) for decay
/// and modulus reports, and returns a text table of the run's statistics.
pub fn summarize(dir: &Path) -> Result<String> {
    let manifest = RunManifest::load(dir)?;
    for o in &manifest.outputs {
        let bytes = std::fs::read(dir.join(&o.path)).map_err(|e| Error::Manifest(format!("cannot read {}: {e}", o.path)))?;
        if sha256_hex(&bytes) != o.sha256 {
            return Err(Error::Manifest(format!("{} does not match its recorded digest", o.path)));
        }
    }
    if manifest.output(SUMMARY_FILE).is_none() {
        return Err(Error::Manifest(format!("manifest lists no {SUMMARY_FILE}")));
    }
    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_FILE))?)
        .map_err(|e| Error::Manifest(format!("{SUMMARY_FILE} is corrupt: {e}")))?;

    let mut plots = Vec::new();
    if manifest.output("decay.csv").is_some() {
        let c = read_columns(&dir.join("decay.csv"), &["lag", "estimate", "se"])?;
        write_plot(dir, "plot_decay.csv", &c[0], &c[1], &c[2])?;
        plots.push("plot_decay.csv");
    }
    if manifest.output("modulus.csv").is_some() {
        let c = read_columns(&dir.join("modulus.csv"), &["delta", "estimate", "se"])?;
        write_plot(dir, "plot_modulus.csv", &c[0], &c[1], &c[2])?;
        plots.push("plot_modulus.csv");
    }

    let width = summary.stats.iter().map(|s| s.name.len()).max().unwrap_or(4).max(4);
    let mut text = String::new();
    let _ = writeln!(text, "kind         {}", summary.kind.name());
    let _ = writeln!(text, "master_seed  {}", summary.master_seed);
    let _ = writeln!(text, "reps         {}", summary.reps.map(|r| r.to_string()).unwrap_or_else(|| "-".into()));
    let _ = writeln!(text, "config       {}", &manifest.config_sha256[..16]);
    let _ = writeln!(text);
    let _ = writeln!(text, "{:<width$}  {:>12}  {:>12}", "stat", "value", "se");
    for s in &summary.stats {
        let _ = writeln!(text, "{:<width$}  {:>12}  {:>12}", s.name, format_number(s.value), format_number(s.se));
    }
    if !plots.is_empty() {
        let _ = writeln!(text);
        let _ = writeln!(text, "plot data: {}", plots.join(", "));
    }
    Ok(text)
}
