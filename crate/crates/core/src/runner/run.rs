use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExperimentKind, DEFAULT_RHO_REPS};
use super::fmt_f64;
use crate::empproc::{equicontinuity_probe, find_pair, modulus_experiment, moment_scaling, DEFAULT_PILOT_REPS};
use crate::error::{Error, Result};
use crate::estimators::{dominance_stat, m_estimate, sample_quantilogram, MEstimate, QuantilogramResult};
use crate::families::{
    bracketing_number, build_cover, family_bracketing_integral, verify_cover, FamilyKind, FunctionFamily, Law, MarginalInfo,
    ParamBox, DEFAULT_COVER_CAP,
};
use crate::gmc::{bracket_coupling_norm, coupling_norm, family_coupling_norm, indicator_coupling, lipschitz_margin, DecayReport};
use crate::innovations::StreamKey;
use crate::models::{stationary_quantile, write_paths_csv, Embedding, EmbeddingSpec, MeanOracle, Series};
use crate::stats::{map_replications, sorted_quantile, Moments, REPS_PER_TASK};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";
const COVER_SAMPLE_STREAM: u64 = 0xC0FE;

/// One headline number of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub name: String,
    pub value: Option<f64>,
    pub se: Option<f64>,
}

impl Stat {
    fn new(name: impl Into<String>, value: f64, se: Option<f64>) -> Self {
        let finite = |x: f64| x.is_finite().then_some(x);
        Stat { name: name.into(), value: finite(value), se: se.and_then(finite) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    pub reps: Option<u64>,
    pub stats: Vec<Stat>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Replication block `[first_replication, first_replication + replications)`
/// run as one task, each replication on stream `(master_seed, index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSeed {
    pub task: u64,
    pub master_seed: u64,
    pub first_replication: u64,
    pub replications: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: ExperimentKind,
    pub version: String,
    pub config_sha256: String,
    pub wall_clock_seconds: f64,
    pub master_seed: u64,
    pub tasks: Vec<TaskSeed>,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Manifest(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{} is corrupt: {e}", path.display())))
    }

    pub fn output(&self, name: &str) -> Option<&OutputFile> {
        self.outputs.iter().find(|o| o.path == name)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    stats: Vec<Stat>,
}

impl Outputs {
    fn new() -> Self {
        Outputs { files: Vec::new(), stats: Vec::new() }
    }

    fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.file(name, bytes);
        Ok(())
    }

    fn stat(&mut self, name: impl Into<String>, value: f64, se: Option<f64>) {
        self.stats.push(Stat::new(name, value, se));
    }
}

fn csv<F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>>(f: F) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Validates `config`, runs it and writes every report plus `manifest.json`
/// into `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    config.validate()?;
    let mut out = Outputs::new();
    dispatch(config, &mut out)?;

    std::fs::create_dir_all(out_dir)?;
    let summary = Summary { kind: config.kind, master_seed: config.master_seed, reps: config.reps, stats: std::mem::take(&mut out.stats) };
    out.json(SUMMARY_FILE, &summary)?;
    let config_text = config.to_json() + "\n";
    out.file("config.json", config_text.clone().into_bytes());

    let mut outputs = Vec::new();
    for (name, bytes) in &out.files {
        std::fs::write(out_dir.join(name), bytes)?;
        outputs.push(OutputFile { path: name.clone(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
    }
    outputs.sort_by(|a, b| a.path.cmp(&b.path));
    let reps = config.reps.unwrap_or(0);
    let tasks = (0..reps.div_ceil(REPS_PER_TASK))
        .map(|t| TaskSeed {
            task: t,
            master_seed: config.master_seed,
            first_replication: t * REPS_PER_TASK,
            replications: REPS_PER_TASK.min(reps - t * REPS_PER_TASK),
        })
        .collect();
    let manifest = RunManifest {
        kind: config.kind,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        master_seed: config.master_seed,
        tasks,
        outputs,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    std::fs::write(out_dir.join(MANIFEST_FILE), bytes)?;
    Ok(manifest)
}

fn dispatch(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    use ExperimentKind as K;
    let emb = c.embedding_model()?;
    match c.kind {
        K::Simulate => simulate(c, &emb, out),
        K::GmcDecay => {
            let report = coupling_norm(&emb, &c.decay_settings())?;
            decay_outputs(&report, out)
        }
        K::FamilyDecay => {
            let family = family(c);
            let grid = family.theta.grid(c.grid_points());
            let settings = c.decay_settings();
            let report = family_coupling_norm(&emb, family, &grid, &settings)?;
            if let FamilyKind::Huber { .. } = family.kind {
                out.stat("lipschitz_margin", lipschitz_margin(&emb, family, &grid, &settings)?, None);
            }
            decay_outputs(&report, out)
        }
        K::BracketDecay => bracket_decay(c, &emb, out),
        K::IndicatorDecay => {
            let spec = c.coupling.as_ref().expect("validated");
            let grid = spec.lambda.grid(c.grid_points());
            let report = indicator_coupling(&emb, spec, &grid, &c.decay_settings())?;
            decay_outputs(&report, out)
        }
        K::Modulus => {
            let family = family(c);
            let info = MarginalInfo::from_embedding(&emb, c.master_seed)?;
            let oracle = MeanOracle::new(emb.clone(), family.clone(), c.master_seed, c.oracle_length())?;
            let grid = family.theta.grid(c.grid_points());
            let report = modulus_experiment(&emb, family, &grid, &info, &oracle, &c.modulus_settings())?;
            out.file("modulus.csv", csv(|w| report.write_csv(w))?);
            out.stat("bracketing_integral", report.bracketing_integral, None);
            for r in &report.rows {
                out.stat(format!("modulus[delta={}]", r.delta), r.estimate, Some(r.se));
                out.stat(format!("exceed[delta={}]", r.delta), r.exceed_freq, Some(r.exceed_se));
            }
            Ok(())
        }
        K::Probe => {
            let family = family(c);
            let info = MarginalInfo::from_embedding(&emb, c.master_seed)?;
            let oracle = MeanOracle::new(emb.clone(), family.clone(), c.master_seed, c.oracle_length())?;
            let grid = family.theta.grid(c.grid_points());
            let ns = c.ns.clone().expect("validated");
            let report = equicontinuity_probe(&emb, family, &grid, &info, &oracle, &c.modulus_settings(), &ns)?;
            out.file("probe.csv", csv(|w| report.write_csv(w))?);
            for r in &report.rows {
                out.stat(format!("exceed[delta={},n={}]", r.delta, r.n), r.exceed_freq, Some(r.se));
            }
            Ok(())
        }
        K::MomentScaling => {
            let family = family(c);
            let oracle = MeanOracle::new(emb.clone(), family.clone(), c.master_seed, c.oracle_length())?;
            let base = c.base_theta.clone().expect("validated");
            let law = Law::Stationary { embedding: &emb, master_seed: c.master_seed };
            let rho_reps = c.rho_reps.unwrap_or(DEFAULT_RHO_REPS);
            let pairs = c
                .rho_targets
                .as_ref()
                .expect("validated")
                .iter()
                .map(|&t| find_pair(family, &base, t, law, rho_reps))
                .collect::<Result<Vec<_>>>()?;
            let report = moment_scaling(&emb, family, &pairs, &oracle, &c.scaling_settings())?;
            out.file("scaling.csv", csv(|w| report.write_csv(w))?);
            for n in c.ns.as_ref().expect("validated") {
                out.stat(format!("max_ratio[n={n}]"), report.max_ratio_at(*n), None);
            }
            Ok(())
        }
        K::Quantilogram => quantilogram(c, &emb, out),
        K::MEstimate => {
            let variant = c.estimator.expect("validated");
            let n = c.n.expect("validated");
            let rows = replicate(c, &emb, n, |data, _| m_estimate(variant, &data.column(0)))?;
            let bytes = csv(|w| {
                writeln!(w, "rep,{}", MEstimate::CSV_HEADER)?;
                for (rep, r) in rows.iter().enumerate() {
                    writeln!(w, "{rep},{}", r.csv_row())?;
                }
                Ok(())
            })?;
            out.file("m_estimate.csv", bytes);
            let m = moments(rows.iter().map(|r| r.theta_hat));
            out.stat("mean_theta_hat", m.mean(), Some(m.std_error()));
            out.stat("abs_theta_hat_p95", p95(rows.iter().map(|r| r.theta_hat.abs())), None);
            out.stat("max_abs_score_sum", rows.iter().map(|r| r.abs_score_sum).fold(0.0, f64::max), None);
            Ok(())
        }
        K::Dominance => {
            let grid: Vec<f64> = family(c).theta.grid(c.grid_points()).into_iter().map(|t| t[0]).collect();
            let n = c.n.expect("validated");
            let rows = replicate(c, &emb, n, |data, _| dominance_stat(&data.column(0), &data.column(1), &grid))?;
            let bytes = csv(|w| {
                writeln!(w, "rep,statistic,argmax")?;
                for (rep, r) in rows.iter().enumerate() {
                    writeln!(w, "{rep},{},{}", fmt_f64(r.statistic), fmt_f64(r.argmax))?;
                }
                Ok(())
            })?;
            out.file("dominance.csv", bytes);
            out.file("dominance_rep0.csv", csv(|w| rows[0].write_csv(w))?);
            let m = moments(rows.iter().map(|r| r.statistic));
            out.stat("mean_statistic", m.mean(), Some(m.std_error()));
            Ok(())
        }
        K::BracketingIntegral => {
            let family = family(c);
            let info = MarginalInfo::from_embedding(&emb, c.master_seed)?;
            let quad = family_bracketing_integral(family, &info, c.gamma.expect("validated"), c.q.expect("validated"))?;
            out.json("integral.json", &quad_json(&quad, &info))?;
            out.stat("bracketing_integral", quad.value, Some(quad.abs_error));
            if let Some(deltas) = &c.deltas {
                let counts = deltas
                    .iter()
                    .map(|&d| bracketing_number(family, d, &info, DEFAULT_COVER_CAP))
                    .collect::<Result<Vec<_>>>()?;
                let bytes = csv(|w| {
                    writeln!(w, "delta,brackets")?;
                    for (d, n) in deltas.iter().zip(&counts) {
                        writeln!(w, "{},{n}", fmt_f64(*d))?;
                    }
                    Ok(())
                })?;
                out.file("bracketing_numbers.csv", bytes);
            }
            Ok(())
        }
    }
}

fn family(c: &ExperimentConfig) -> &FunctionFamily {
    c.family.as_ref().expect("validated")
}

fn quad_json(q: &crate::numerics::Quadrature, info: &MarginalInfo) -> serde_json::Value {
    serde_json::json!({
        "value": q.value,
        "abs_error": q.abs_error,
        "intervals": q.intervals,
        "converged": q.converged,
        "density_bound": info.density_bound,
        "covariate_abs_mean": info.covariate_abs_mean,
    })
}

fn moments(values: impl Iterator<Item = f64>) -> Moments {
    let mut m = Moments::default();
    values.for_each(|v| m.push(v));
    m
}

fn p95(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    sorted_quantile(&v, 0.95)
}

/// Simulates one path of length `n` per replication and maps it, in replication order.
fn replicate<T, F>(c: &ExperimentConfig, emb: &Embedding, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Series, u64) -> Result<T> + Sync + Send,
{
    let reps = c.reps.expect("validated");
    map_replications(reps, |rep| {
        let data = emb.simulate(StreamKey::replication(c.master_seed, rep), n, c.burn_in())?;
        f(&data, rep)
    })
    .into_iter()
    .collect()
}

fn decay_outputs(report: &DecayReport, out: &mut Outputs) -> Result<()> {
    out.file("decay.csv", csv(|w| report.write_csv(w))?);
    out.json("decay.json", &report.summary_json())?;
    match report.alpha_hat() {
        Some(a) => {
            out.stat("alpha_hat", a, None);
            out.stat("r_squared", report.r_squared().unwrap_or(f64::NAN), None);
        }
        None => out.stat("alpha_hat", f64::NAN, None),
    }
    Ok(())
}

fn simulate(c: &ExperimentConfig, emb: &Embedding, out: &mut Outputs) -> Result<()> {
    let paths = replicate(c, emb, c.n.expect("validated"), |s, _| Ok(s.clone()))?;
    let indexed: Vec<(u64, &Series)> = paths.iter().enumerate().map(|(i, s)| (i as u64, s)).collect();
    out.file("paths.csv", csv(|w| write_paths_csv(w, &indexed))?);
    let m = moments(paths.iter().map(|s| {
        let col = s.column(0);
        col.iter().sum::<f64>() / col.len() as f64
    }));
    out.stat("mean_col_0", m.mean(), Some(m.std_error()));
    Ok(())
}

fn bracket_decay(c: &ExperimentConfig, emb: &Embedding, out: &mut Outputs) -> Result<()> {
    let family = family(c);
    let info = MarginalInfo::from_embedding(emb, c.master_seed)?;
    let cover = build_cover(family, c.cover_delta.expect("validated"), &info, DEFAULT_COVER_CAP)?;
    let report = bracket_coupling_norm(emb, &cover, &c.decay_settings())?;
    let law = Law::Stationary { embedding: emb, master_seed: c.master_seed };
    let sample = law.sample(family.input_dim(), c.pilot_reps.unwrap_or(DEFAULT_PILOT_REPS), COVER_SAMPLE_STREAM)?;
    let check = verify_cover(&cover, family, &sample, &family.theta.grid(c.grid_points()))?;
    let bytes = csv(|w| {
        writeln!(w, "k,center,rho_hat,rho_se")?;
        for &(k, r, se) in &check.rho_hat {
            let center: Vec<String> = cover.center(k).iter().map(|x| fmt_f64(*x)).collect();
            writeln!(w, "{k},{},{},{}", center.join(";"), fmt_f64(r), fmt_f64(se))?;
        }
        Ok(())
    })?;
    out.file("cover.csv", bytes);
    out.stat("brackets", cover.len() as f64, None);
    out.stat("cover_max_rho_hat", check.max_rho_hat, None);
    out.stat("cover_domination_margin", check.worst_domination_margin, None);
    out.stat("cover_size_margin", check.worst_size_margin, None);
    decay_outputs(&report, out)
}

fn quantilogram(c: &ExperimentConfig, emb: &Embedding, out: &mut Outputs) -> Result<()> {
    let (alpha, h, n) = (c.alpha.expect("validated"), c.h.expect("validated"), c.n.expect("validated"));
    let theta_alpha = stationary_quantile(emb, alpha, c.master_seed, c.oracle_length())?;
    let pair = Embedding::new(*emb.base(), EmbeddingSpec::LagPair { h })?;
    let family = FunctionFamily::new(FamilyKind::Quantilogram { alpha }, ParamBox::singleton(vec![theta_alpha])?)?;
    let oracle = MeanOracle::new(pair, family, c.master_seed, c.oracle_length())?;
    let rows: Vec<QuantilogramResult> =
        replicate(c, emb, n, |data, _| sample_quantilogram(data.as_slice(), alpha, h, theta_alpha, |t| oracle.mean(&[t])))?;
    let bytes = csv(|w| {
        writeln!(w, "rep,{}", QuantilogramResult::CSV_HEADER)?;
        for (rep, r) in rows.iter().enumerate() {
            writeln!(w, "{rep},{}", r.csv_row())?;
        }
        Ok(())
    })?;
    out.file("quantilogram.csv", bytes);
    let m = moments(rows.iter().map(|r| r.scaled));
    out.stat("theta_alpha", theta_alpha, None);
    out.stat("mean_scaled", m.mean(), Some(m.std_error()));
    let d = moments(rows.iter().map(|r| r.drift));
    out.stat("mean_drift", d.mean(), Some(d.std_error()));
    out.stat("abs_remainder_p95", p95(rows.iter().map(|r| r.remainder.abs())), None);
    out.stat("max_identity_residual", rows.iter().map(|r| r.identity_residual().abs()).fold(0.0, f64::max), None);
    Ok(())
}
