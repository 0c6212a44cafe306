//! The empirical process `nu_n f`, Monte Carlo estimates of its modulus of
//! continuity over grid pairs, the exceedance probe, and the moment scaling
//! table `E|nu_n(f - g)|^Q` against `tau(f - g)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{family_bracketing_integral, pairwise_rho, rho, FunctionFamily, Law, MarginalInfo, RhoMethod, RhoMetricEstimate};
use crate::innovations::StreamKey;
use crate::models::{Embedding, MeanOracle, Series, DEFAULT_BURN_IN};
use crate::runner::fmt_f64;
use crate::stats::{fold_replications, Moments};

pub const DEFAULT_PILOT_REPS: usize = 100_000;
const PILOT_STREAM: u64 = 0x5EED_0001;

/// `n^{-1/2} sum_i (v_i - mean)`.
pub fn nu_n_values(values: &[f64], mean: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyData);
    }
    let s: f64 = values.iter().map(|v| v - mean).sum();
    Ok(s / (values.len() as f64).sqrt())
}

/// `nu_n f_theta` on `data`, centered by `mean = E f_theta(xi_0)`
/// (first output coordinate).
pub fn nu_n(family: &FunctionFamily, theta: &[f64], data: &Series, mean: f64) -> Result<f64> {
    if data.dim() != family.input_dim() {
        return Err(Error::DimensionMismatch { expected: family.input_dim(), got: data.dim() });
    }
    if theta.len() != family.param_dim() {
        return Err(Error::DimensionMismatch { expected: family.param_dim(), got: theta.len() });
    }
    let values: Vec<f64> = data.rows().map(|x| family.value(theta, x, 0)).collect();
    nu_n_values(&values, mean)
}

/// `nu_n f_theta` for every grid point and output coordinate, laid out
/// `[theta][coord]`.
fn nu_grid(family: &FunctionFamily, grid: &[Vec<f64>], means: &[Vec<f64>], data: &Series) -> Vec<f64> {
    let outputs = family.output_dim();
    let root_n = (data.len() as f64).sqrt();
    let mut out = Vec::with_capacity(grid.len() * outputs);
    for (theta, m) in grid.iter().zip(means) {
        for j in 0..outputs {
            let s: f64 = data.rows().map(|x| family.value(theta, x, j) - m[j]).sum();
            out.push(s / root_n);
        }
    }
    out
}

/// Grid pairs ordered by `rho_hat + 2 se`, so the pairs qualifying for a
/// given `delta` form a prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    pub pairs: Vec<(usize, usize)>,
    pub rho_hat: Vec<f64>,
    pub rho_se: Vec<f64>,
}

impl PairTable {
    /// Pilot `rho_hat` for every grid pair from one stationary sample of
    /// `pilot_reps` draws.
    pub fn pilot(embedding: &Embedding, family: &FunctionFamily, grid: &[Vec<f64>], pilot_reps: usize, master_seed: u64) -> Result<Self> {
        if pilot_reps < 100 {
            return Err(Error::param(format!("pilot needs at least 100 draws, got {pilot_reps}")));
        }
        let law = Law::Stationary { embedding, master_seed };
        let sample = law.sample(family.input_dim(), pilot_reps, PILOT_STREAM)?;
        let est = pairwise_rho(family, grid, &sample, false);
        let g = grid.len();
        let mut rows: Vec<((usize, usize), f64, f64)> = (0..g)
            .flat_map(|i| (i + 1..g).map(move |j| (i, j)))
            .zip(est)
            .map(|(p, (r, se))| (p, r, se))
            .collect();
        rows.sort_by(|a, b| (a.1 + 2.0 * a.2).total_cmp(&(b.1 + 2.0 * b.2)).then(a.0.cmp(&b.0)));
        Ok(PairTable {
            pairs: rows.iter().map(|r| r.0).collect(),
            rho_hat: rows.iter().map(|r| r.1).collect(),
            rho_se: rows.iter().map(|r| r.2).collect(),
        })
    }

    /// Number of pairs with `rho_hat + 2 se < delta`.
    pub fn qualifying(&self, delta: f64) -> usize {
        self.rho_hat
            .iter()
            .zip(&self.rho_se)
            .take_while(|(r, se)| *r + 2.0 * *se < delta)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusSettings {
    pub deltas: Vec<f64>,
    pub n: usize,
    pub q: u32,
    pub gamma: f64,
    pub eta: f64,
    pub reps: u64,
    pub master_seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_pilot_reps")]
    pub pilot_reps: usize,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_pilot_reps() -> usize {
    DEFAULT_PILOT_REPS
}

pub(crate) fn q_problems(q: u32) -> Option<String> {
    (q < 2 || q % 2 != 0).then(|| format!("Q must be an even integer >= 2, got {q}"))
}

impl ModulusSettings {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.deltas.is_empty() {
            out.push("delta grid is empty".into());
        }
        if self.deltas.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            out.push("every delta must be positive".into());
        }
        if self.deltas.windows(2).any(|w| w[0] >= w[1]) {
            out.push("deltas must be strictly increasing".into());
        }
        if self.n == 0 {
            out.push("n must be at least 1".into());
        }
        out.extend(q_problems(self.q));
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            out.push(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            out.push(format!("eta must be positive, got {}", self.eta));
        }
        if self.reps == 0 {
            out.push("reps must be at least 1".into());
        }
        if self.pilot_reps < 100 {
            out.push(format!("pilot_reps must be at least 100, got {}", self.pilot_reps));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(p))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    pub delta: f64,
    pub n: usize,
    /// Mean of `(sup |nu_n(f - g)|)^Q`.
    pub estimate: f64,
    pub se: f64,
    pub exceed_freq: f64,
    pub exceed_se: f64,
    pub pairs: usize,
    pub no_pairs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub rows: Vec<ModulusRow>,
    pub q: u32,
    pub gamma: f64,
    pub eta: f64,
    pub reps: u64,
    pub seed: u64,
    pub grid_points: usize,
    /// Value of the bracketing integral that passed the gate.
    pub bracketing_integral: f64,
}

impl ModulusReport {
    /// `delta,n,Q,estimate,se,exceed_freq,pairs`
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "delta,n,Q,estimate,se,exceed_freq,pairs")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_f64(r.delta),
                r.n,
                self.q,
                fmt_f64(r.estimate),
                fmt_f64(r.se),
                fmt_f64(r.exceed_freq),
                r.pairs
            )?;
        }
        Ok(())
    }
}

fn check_inputs(embedding: &Embedding, family: &FunctionFamily, grid: &[Vec<f64>]) -> Result<()> {
    family.validate()?;
    if embedding.dim() != family.input_dim() {
        return Err(Error::DimensionMismatch { expected: family.input_dim(), got: embedding.dim() });
    }
    if grid.is_empty() {
        return Err(Error::param("theta grid is empty"));
    }
    if let Some(t) = grid.iter().find(|t| !family.theta.contains(t)) {
        return Err(Error::param(format!("grid point {t:?} lies outside Theta")));
    }
    Ok(())
}

/// Per-replication grid supremum of `|nu_n(f - g)|` for each delta's prefix
/// of pairs, folded into `(sup^Q, 1{sup > eta})` moments.
fn modulus_rows(
    embedding: &Embedding,
    family: &FunctionFamily,
    grid: &[Vec<f64>],
    means: &[Vec<f64>],
    table: &PairTable,
    settings: &ModulusSettings,
) -> Result<Vec<ModulusRow>> {
    let outputs = family.output_dim();
    let counts: Vec<usize> = settings.deltas.iter().map(|&d| table.qualifying(d)).collect();
    let max_count = counts.iter().copied().max().unwrap_or(0);
    let nd = settings.deltas.len();
    let q = settings.q as i32;
    embedding.simulate(StreamKey::replication(settings.master_seed, 0), settings.n, settings.burn_in)?;
    let acc = fold_replications(
        settings.reps,
        || vec![(Moments::default(), Moments::default()); nd],
        |acc, rep| {
            let data = embedding
                .simulate(StreamKey::replication(settings.master_seed, rep), settings.n, settings.burn_in)
                .expect("checked on replication 0");
            let nu = nu_grid(family, grid, means, &data);
            // running sup over the sorted pairs, read off at each prefix length
            let mut prefix_sup = Vec::with_capacity(max_count + 1);
            prefix_sup.push(0.0f64);
            let mut sup = 0.0f64;
            for &(i, j) in &table.pairs[..max_count] {
                for c in 0..outputs {
                    sup = sup.max((nu[i * outputs + c] - nu[j * outputs + c]).abs());
                }
                prefix_sup.push(sup);
            }
            for (slot, &count) in acc.iter_mut().zip(&counts) {
                let s = prefix_sup[count];
                slot.0.push(s.powi(q));
                slot.1.push(if s > settings.eta { 1.0 } else { 0.0 });
            }
        },
        |t, p| t.iter_mut().zip(&p).for_each(|(a, b)| {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
        }),
    );
    Ok(settings
        .deltas
        .iter()
        .zip(&counts)
        .zip(&acc)
        .map(|((&delta, &pairs), (m, e))| ModulusRow {
            delta,
            n: settings.n,
            estimate: m.mean(),
            se: m.std_error(),
            exceed_freq: e.mean(),
            exceed_se: e.std_error(),
            pairs,
            no_pairs: pairs == 0,
        })
        .collect())
}

fn gate(family: &FunctionFamily, info: &MarginalInfo, gamma: f64, q: u32) -> Result<f64> {
    Ok(family_bracketing_integral(family, info, gamma, q)?.value)
}

/// Monte Carlo `E(sup_{rho(f - g) < delta} |nu_n(f - g)|)^Q` over grid pairs
/// for every delta, after checking the bracketing integral converges.
pub fn modulus_experiment(
    embedding: &Embedding,
    family: &FunctionFamily,
    grid: &[Vec<f64>],
    info: &MarginalInfo,
    oracle: &MeanOracle,
    settings: &ModulusSettings,
) -> Result<ModulusReport> {
    settings.validate()?;
    let integral = gate(family, info, settings.gamma, settings.q)?;
    check_inputs(embedding, family, grid)?;
    let table = PairTable::pilot(embedding, family, grid, settings.pilot_reps, settings.master_seed)?;
    let means: Vec<Vec<f64>> = grid.iter().map(|t| oracle.means(t)).collect();
    let rows = modulus_rows(embedding, family, grid, &means, &table, settings)?;
    Ok(ModulusReport {
        rows,
        q: settings.q,
        gamma: settings.gamma,
        eta: settings.eta,
        reps: settings.reps,
        seed: settings.master_seed,
        grid_points: grid.len(),
        bracketing_integral: integral,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub delta: f64,
    pub n: usize,
    pub exceed_freq: f64,
    pub se: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub eta: f64,
    pub reps: u64,
    pub seed: u64,
    pub rows: Vec<ProbeRow>,
}

impl ProbeReport {
    /// `delta,n,eta,exceed_freq,se,pairs`
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "delta,n,eta,exceed_freq,se,pairs")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(r.delta),
                r.n,
                fmt_f64(self.eta),
                fmt_f64(r.exceed_freq),
                fmt_f64(r.se),
                r.pairs
            )?;
        }
        Ok(())
    }

    pub fn freq(&self, delta: f64, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.delta == delta && r.n == n).map(|r| r.exceed_freq)
    }
}

/// `P(sup_{rho(f - g) < delta} |nu_n(f - g)| > eta)` for every `(delta, n)`;
/// `settings.n` is ignored in favor of `n_grid`. One pilot serves every `n`.
pub fn equicontinuity_probe(
    embedding: &Embedding,
    family: &FunctionFamily,
    grid: &[Vec<f64>],
    info: &MarginalInfo,
    oracle: &MeanOracle,
    settings: &ModulusSettings,
    n_grid: &[usize],
) -> Result<ProbeReport> {
    let mut problems = settings.problems().into_iter().filter(|p| !p.starts_with("n must")).collect::<Vec<_>>();
    if n_grid.is_empty() || n_grid.contains(&0) {
        problems.push("n grid must be nonempty with every n >= 1".into());
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    gate(family, info, settings.gamma, settings.q)?;
    check_inputs(embedding, family, grid)?;
    let table = PairTable::pilot(embedding, family, grid, settings.pilot_reps, settings.master_seed)?;
    let means: Vec<Vec<f64>> = grid.iter().map(|t| oracle.means(t)).collect();
    let mut rows = Vec::new();
    for &n in n_grid {
        let s = ModulusSettings { n, ..settings.clone() };
        for r in modulus_rows(embedding, family, grid, &means, &table, &s)? {
            rows.push(ProbeRow { delta: r.delta, n, exceed_freq: r.exceed_freq, se: r.exceed_se, pairs: r.pairs });
        }
    }
    Ok(ProbeReport { eta: settings.eta, reps: settings.reps, seed: settings.master_seed, rows })
}

/// `tau(f) = rho(f)^(2/(2+gamma))`
pub fn tau(rho: f64, gamma: f64) -> f64 {
    rho.powf(2.0 / (2.0 + gamma))
}

/// `n^(-Q/2) sum_{j=1}^{Q/2} (tau^2 n)^j`
pub fn moment_bound(tau: f64, n: usize, q: u32) -> f64 {
    let t2n = tau * tau * n as f64;
    let sum: f64 = (1..=q / 2).map(|j| t2n.powi(j as i32)).sum();
    sum * (n as f64).powf(-(q as f64) / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPair {
    pub theta: Vec<f64>,
    pub theta_prime: Vec<f64>,
    pub rho: RhoMetricEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub theta: Vec<f64>,
    pub theta_prime: Vec<f64>,
    pub rho_hat: f64,
    pub tau: f64,
    pub n: usize,
    pub moment: f64,
    pub moment_se: f64,
    pub ratio: f64,
    pub ratio_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentScalingReport {
    pub q: u32,
    pub gamma: f64,
    pub reps: u64,
    pub seed: u64,
    pub rows: Vec<ScalingRow>,
}

impl MomentScalingReport {
    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn max_ratio_at(&self, n: usize) -> f64 {
        self.rows.iter().filter(|r| r.n == n).map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn min_nonzero_ratio(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.ratio).filter(|&r| r > 0.0).min_by(f64::total_cmp)
    }

    /// `theta,theta_prime,rho_hat,tau,n,Q,moment,ratio`; vector parameters
    /// are written with `;` between coordinates.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let join = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";");
        writeln!(out, "theta,theta_prime,rho_hat,tau,n,Q,moment,ratio")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                join(&r.theta),
                join(&r.theta_prime),
                fmt_f64(r.rho_hat),
                fmt_f64(r.tau),
                r.n,
                self.q,
                fmt_f64(r.moment),
                fmt_f64(r.ratio)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSettings {
    pub ns: Vec<usize>,
    pub q: u32,
    pub gamma: f64,
    pub reps: u64,
    pub master_seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

impl ScalingSettings {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.ns.is_empty() || self.ns.contains(&0) {
            out.push("n grid must be nonempty with every n >= 1".into());
        }
        out.extend(q_problems(self.q));
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            out.push(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.reps < 2 {
            out.push("reps must be at least 2".into());
        }
        out
    }
}

/// Ratio table `E|nu_n(f - g)|^Q / (n^(-Q/2) sum_j (tau^2 n)^j)` for each
/// pair and `n`. Pairs with `rho_hat = 0` give ratio 0.
pub fn moment_scaling(
    embedding: &Embedding,
    family: &FunctionFamily,
    pairs: &[ScalingPair],
    oracle: &MeanOracle,
    settings: &ScalingSettings,
) -> Result<MomentScalingReport> {
    let problems = settings.problems();
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let grid: Vec<Vec<f64>> = pairs.iter().flat_map(|p| [p.theta.clone(), p.theta_prime.clone()]).collect();
    if pairs.is_empty() {
        return Err(Error::param("no pairs given"));
    }
    check_inputs(embedding, family, &grid)?;
    let means: Vec<Vec<f64>> = grid.iter().map(|t| oracle.means(t)).collect();
    let outputs = family.output_dim();
    let q = settings.q as i32;
    let mut rows = Vec::new();
    for &n in &settings.ns {
        embedding.simulate(StreamKey::replication(settings.master_seed, 0), n, settings.burn_in)?;
        let acc = fold_replications(
            settings.reps,
            || vec![Moments::default(); pairs.len()],
            |acc, rep| {
                let data = embedding
                    .simulate(StreamKey::replication(settings.master_seed, rep), n, settings.burn_in)
                    .expect("checked on replication 0");
                let nu = nu_grid(family, &grid, &means, &data);
                for (k, slot) in acc.iter_mut().enumerate() {
                    let (a, b) = (2 * k * outputs, (2 * k + 1) * outputs);
                    let d = (0..outputs).map(|c| (nu[a + c] - nu[b + c]).abs()).fold(0.0, f64::max);
                    slot.push(d.powi(q));
                }
            },
            |t, p| t.iter_mut().zip(&p).for_each(|(a, b)| a.merge(b)),
        );
        for (pair, m) in pairs.iter().zip(&acc) {
            let t = tau(pair.rho.value, settings.gamma);
            let bound = moment_bound(t, n, settings.q);
            let (ratio, ratio_se) = if pair.rho.value > 0.0 { (m.mean() / bound, m.std_error() / bound) } else { (0.0, 0.0) };
            rows.push(ScalingRow {
                theta: pair.theta.clone(),
                theta_prime: pair.theta_prime.clone(),
                rho_hat: pair.rho.value,
                tau: t,
                n,
                moment: m.mean(),
                moment_se: m.std_error(),
                ratio,
                ratio_se,
            });
        }
    }
    Ok(MomentScalingReport { q: settings.q, gamma: settings.gamma, reps: settings.reps, seed: settings.master_seed, rows })
}

/// Finds `theta' = theta + s e_1` with `rho(f_theta - f_theta') ~ target` by
/// bisection on `s` over the part of Theta to the right of `theta`, using a
/// fixed `rho` sample (closed form when available).
pub fn find_pair(family: &FunctionFamily, theta: &[f64], target: f64, law: Law<'_>, reps: usize) -> Result<ScalingPair> {
    if !(target > 0.0) {
        return Err(Error::param(format!("target rho must be positive, got {target}")));
    }
    let at = |s: f64| {
        let mut t = theta.to_vec();
        t[0] += s;
        let r = rho(family, theta, &t, law, reps, RhoMethod::Auto)?;
        Ok::<_, Error>((t, r))
    };
    let (mut lo, mut hi) = (0.0, family.theta.upper[0] - theta[0]);
    let (far, far_rho) = at(hi)?;
    if far_rho.value < target {
        return Err(Error::param(format!(
            "rho target {target} is out of reach: the far end {far:?} only gives {}",
            far_rho.value
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if at(mid)?.1.value < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (theta_prime, r) = at(hi)?;
    Ok(ScalingPair { theta: theta.to_vec(), theta_prime, rho: r })
}
