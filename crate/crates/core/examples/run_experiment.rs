//! Drive an experiment through the runner from code: build a config, run
//! it into a directory, then summarize. Same as
//! `equiproc gmc-decay --config cfg.json --out dir && equiproc summarize dir`.

use equiproc::models::ModelSpec;
use equiproc::runner::{run, summarize, ExperimentConfig, ExperimentKind};

fn main() -> equiproc::Result<()> {
    let mut config = ExperimentConfig::new(ExperimentKind::GmcDecay, ModelSpec::ar1(0.5, 1.0), 7);
    config.reps = Some(20_000);
    config.lags = Some((1..=20).collect());
    println!("{}", config.to_json());

    let dir = std::env::temp_dir().join("equiproc-run-experiment");
    let manifest = run(&config, &dir)?;
    for o in &manifest.outputs {
        println!("{:<14} {:>7} bytes  {}", o.path, o.bytes, &o.sha256[..16]);
    }
    print!("{}", summarize(&dir)?);

    // every violation is reported at once
    let mut bad = config.clone();
    bad.reps = Some(0);
    bad.lags = Some(vec![3, 2, 0]);
    if let Err(e) = bad.validate() {
        println!("{e}");
    }
    Ok(())
}
