//! Stationary nonlinear time-series models in causal form, simulated by
//! burn-in, and coupled pairs `(xi_i, xi_i')` that share every innovation
//! from period 1 on.

mod embedding;
mod oracle;

pub use embedding::{embed, Embedding, EmbeddingSpec};
pub use oracle::{stationary_quantile, MeanOracle, StationaryLaw, MIN_ORACLE_LENGTH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::innovations::{derive_stream, InnovationSpec, InnovationStream, StreamKey};

pub const DEFAULT_BURN_IN: usize = 2000;
const CONTRACTION_MC_DRAWS: usize = 100_000;
const CONTRACTION_MC_SEED: u64 = 0x00C0_FFEE;

fn default_gmc_order() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Process {
    /// `X_i = sigma * eps_i`
    Iid { sigma: f64 },
    /// `X_i = phi X_{i-1} + sigma eps_i`
    Ar1 { phi: f64, sigma: f64 },
    /// `X_i = sqrt(omega + a1 X_{i-1}^2) eps_i`
    Arch1 { omega: f64, a1: f64 },
    /// `s2_i = omega + a X_{i-1}^2 + b s2_{i-1}`, `X_i = sqrt(s2_i) eps_i`
    Garch11 { omega: f64, a: f64, b: f64 },
    /// `X_i = (a0 + a1 U_i) + (b0 + b1 U_i) X_{i-1}` with `U_i ~ U(0,1)`
    Qar1 { a0: f64, a1: f64, b0: f64, b1: f64 },
    /// `X_i = (phi + tau eta_i) X_{i-1} + eps_i`, `eta_i` and `eps_i` iid innovations
    Rcar1 { phi: f64, tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub process: Process,
    #[serde(default)]
    pub innovation: InnovationSpec,
    /// Moment order `q` at which the contraction condition is checked.
    #[serde(default = "default_gmc_order")]
    pub gmc_order: f64,
}

impl ModelSpec {
    pub fn new(process: Process) -> Self {
        ModelSpec { process, innovation: InnovationSpec::StandardNormal, gmc_order: 2.0 }
    }

    pub fn with_innovation(mut self, innovation: InnovationSpec) -> Self {
        self.innovation = innovation;
        self
    }

    pub fn with_gmc_order(mut self, q: f64) -> Self {
        self.gmc_order = q;
        self
    }

    pub fn iid_normal() -> Self {
        ModelSpec::new(Process::Iid { sigma: 1.0 })
    }

    pub fn ar1(phi: f64, sigma: f64) -> Self {
        ModelSpec::new(Process::Ar1 { phi, sigma })
    }

    pub fn arch1(omega: f64, a1: f64) -> Self {
        ModelSpec::new(Process::Arch1 { omega, a1 })
    }

    pub fn garch11(omega: f64, a: f64, b: f64) -> Self {
        ModelSpec::new(Process::Garch11 { omega, a, b })
    }

    pub fn qar1(a0: f64, a1: f64, b0: f64, b1: f64) -> Self {
        ModelSpec::new(Process::Qar1 { a0, a1, b0, b1 }).with_innovation(InnovationSpec::Uniform01)
    }

    pub fn rcar1(phi: f64, tau: f64) -> Self {
        ModelSpec::new(Process::Rcar1 { phi, tau })
    }

    /// Validates parameters and the contraction condition, returning a
    /// model ready for simulation.
    pub fn build(self) -> Result<Model> {
        self.innovation.validate()?;
        let q = self.gmc_order;
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidModel(format!("gmc_order must be positive, got {q}")));
        }
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        let contraction = match self.process {
            Process::Iid { sigma } => {
                if !(sigma > 0.0) {
                    return bad(format!("iid: sigma must be positive, got {sigma}"));
                }
                0.0
            }
            Process::Ar1 { phi, sigma } => {
                if !(sigma > 0.0) {
                    return bad(format!("ar1: sigma must be positive, got {sigma}"));
                }
                phi.abs().powf(q)
            }
            Process::Arch1 { omega, a1 } => {
                if !(omega > 0.0) || !(a1 >= 0.0) {
                    return bad(format!("arch1: need omega > 0 and a1 >= 0, got omega={omega}, a1={a1}"));
                }
                match self.innovation.abs_moment(q) {
                    Some(m) => a1.powf(q / 2.0) * m,
                    None => f64::INFINITY,
                }
            }
            Process::Garch11 { omega, a, b } => {
                if !(omega > 0.0) || !(a >= 0.0) || !(b >= 0.0) {
                    return bad(format!("garch11: need omega > 0, a >= 0, b >= 0, got {omega}, {a}, {b}"));
                }
                if q == 2.0 {
                    a * self.innovation.second_moment() + b
                } else {
                    contraction_mc(self.innovation, q, |e| a * e * e + b, 0.5)
                }
            }
            Process::Qar1 { b0, b1, .. } => {
                if self.innovation != InnovationSpec::Uniform01 {
                    return bad("qar1 is driven by uniform-0-1 innovations".into());
                }
                // b is affine in u, so its sup over [0, 1] sits at an endpoint
                b0.abs().max((b0 + b1).abs()).powf(q)
            }
            Process::Rcar1 { phi, tau } => {
                if !(tau >= 0.0) {
                    return bad(format!("rcar1: tau must be non-negative, got {tau}"));
                }
                if q == 2.0 {
                    let m1 = self.innovation.mean();
                    let m2 = self.innovation.second_moment();
                    phi * phi + 2.0 * phi * tau * m1 + tau * tau * m2
                } else {
                    contraction_mc(self.innovation, q, |e| phi + tau * e, 1.0)
                }
            }
        };
        if !(contraction < 1.0) {
            return bad(format!(
                "{:?}: contraction factor {contraction:.6} at q = {q} is not below 1",
                self.process
            ));
        }
        Ok(Model { spec: self, contraction })
    }
}

/// Monte Carlo estimate of `E|m(eps)|^(q * power)` on a fixed auxiliary stream.
fn contraction_mc(innovation: InnovationSpec, q: f64, m: impl Fn(f64) -> f64, power: f64) -> f64 {
    let mut stream = derive_stream(innovation, StreamKey::auxiliary(CONTRACTION_MC_SEED, 0));
    let total: f64 = (0..CONTRACTION_MC_DRAWS)
        .map(|_| m(stream.next_value()).abs().powf(q * power))
        .sum();
    total / CONTRACTION_MC_DRAWS as f64
}

/// A validated model. Immutable, freely shareable across threads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    contraction: f64,
}

/// Internal recursion state: the last output and, for GARCH, the last
/// conditional variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct State {
    pub x: f64,
    pub s2: f64,
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// The checked contraction factor (`E|.|^q` of the random Lipschitz map).
    pub fn contraction_factor(&self) -> f64 {
        self.contraction
    }

    pub(crate) fn innovations_per_step(&self) -> usize {
        match self.spec.process {
            Process::Rcar1 { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn initial_state(&self) -> State {
        match self.spec.process {
            Process::Garch11 { omega, a, b } => {
                let s2 = if a + b < 1.0 { omega / (1.0 - a - b) } else { omega };
                State { x: 0.0, s2 }
            }
            _ => State { x: 0.0, s2: 0.0 },
        }
    }

    #[inline]
    pub(crate) fn step(&self, state: &mut State, innov: &[f64; 2]) -> f64 {
        let e = innov[0];
        let x = match self.spec.process {
            Process::Iid { sigma } => sigma * e,
            Process::Ar1 { phi, sigma } => phi * state.x + sigma * e,
            Process::Arch1 { omega, a1 } => (omega + a1 * state.x * state.x).sqrt() * e,
            Process::Garch11 { omega, a, b } => {
                state.s2 = omega + a * state.x * state.x + b * state.s2;
                state.s2.sqrt() * e
            }
            Process::Qar1 { a0, a1, b0, b1 } => (a0 + a1 * e) + (b0 + b1 * e) * state.x,
            Process::Rcar1 { phi, tau } => (phi + tau * e) * state.x + innov[1],
        };
        state.x = x;
        x
    }

    #[inline]
    pub(crate) fn next_innovations(&self, stream: &mut InnovationStream) -> [f64; 2] {
        let first = stream.next_value();
        let second = if self.innovations_per_step() == 2 { stream.next_value() } else { 0.0 };
        [first, second]
    }

    /// Runs `steps` periods from `state`, keeping the last `keep` outputs
    /// (padded at the front with the starting output when fewer exist).
    pub(crate) fn burn(&self, state: &mut State, stream: &mut InnovationStream, steps: usize, keep: usize) -> Vec<f64> {
        let mut tail = std::collections::VecDeque::with_capacity(keep + 1);
        for _ in 0..keep {
            tail.push_back(state.x);
        }
        for _ in 0..steps {
            let innov = self.next_innovations(stream);
            let x = self.step(state, &innov);
            if keep > 0 {
                tail.pop_front();
                tail.push_back(x);
            }
        }
        tail.into_iter().collect()
    }

    /// Stationary standard deviation when the stationary law is a centered
    /// Gaussian (iid or AR(1) with normal innovations).
    pub fn gaussian_sd(&self) -> Option<f64> {
        if !self.spec.innovation.is_gaussian() {
            return None;
        }
        match self.spec.process {
            Process::Iid { sigma } => Some(sigma),
            Process::Ar1 { phi, sigma } => Some(sigma / (1.0 - phi * phi).sqrt()),
            _ => None,
        }
    }

    /// Lag-`h` autocorrelation of a Gaussian model.
    pub fn gaussian_lag_correlation(&self, h: usize) -> Option<f64> {
        self.gaussian_sd()?;
        match self.spec.process {
            Process::Iid { .. } => Some(if h == 0 { 1.0 } else { 0.0 }),
            Process::Ar1 { phi, .. } => Some(phi.powi(h as i32)),
            _ => None,
        }
    }
}

/// Row-major `n x d` matrix of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Series {
    pub fn from_rows(n: usize, d: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * d, "series buffer has wrong size");
        Series { n, d, data }
    }

    pub fn from_column(values: Vec<f64>) -> Self {
        Series { n: values.len(), d: 1, data: values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.d.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Original and perturbed trajectories. Both are driven by the same
/// innovations in periods `1..=n`; they differ only through the pre-sample
/// history (`presample_*` holds the period-0 row).
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPaths {
    pub original: Series,
    pub perturbed: Series,
    pub presample_original: Vec<f64>,
    pub presample_perturbed: Vec<f64>,
    pub replication_id: u64,
}

impl CoupledPaths {
    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.original.dim()
    }
}

/// Stationary trajectory `X_1..X_n` after `burn_in` discarded periods.
pub fn simulate_path(model: &Model, key: StreamKey, n: usize, burn_in: usize) -> Result<Series> {
    if n == 0 {
        return Err(Error::param("path length n must be at least 1"));
    }
    Ok(Series::from_column(simulate_scalar(model, key, n, burn_in, 0)))
}

/// `history` pre-sample outputs (ending with period 0) followed by `n` outputs.
pub(crate) fn simulate_scalar(model: &Model, key: StreamKey, n: usize, burn_in: usize, history: usize) -> Vec<f64> {
    let mut stream = derive_stream(model.spec.innovation, key);
    let mut state = model.initial_state();
    let mut out = model.burn(&mut state, &mut stream, burn_in, history);
    out.reserve(n);
    for _ in 0..n {
        let innov = model.next_innovations(&mut stream);
        out.push(model.step(&mut state, &innov));
    }
    out
}

/// Coupled scalar trajectories, each `history + n` long. The original's
/// pre-sample comes from the first `burn_in` periods of `key`'s stream, the
/// perturbed copy's from an independent burn-in on `key.presample()`.
pub(crate) fn simulate_scalar_coupled(
    model: &Model,
    key: StreamKey,
    n: usize,
    burn_in: usize,
    history: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut stream = derive_stream(model.spec.innovation, key);
    let mut pre_stream = derive_stream(model.spec.innovation, key.presample());
    let mut orig_state = model.initial_state();
    let mut pert_state = model.initial_state();
    let mut orig = model.burn(&mut orig_state, &mut stream, burn_in, history);
    let mut pert = model.burn(&mut pert_state, &mut pre_stream, burn_in, history);
    orig.reserve(n);
    pert.reserve(n);
    for _ in 0..n {
        let innov = model.next_innovations(&mut stream);
        orig.push(model.step(&mut orig_state, &innov));
        pert.push(model.step(&mut pert_state, &innov));
    }
    (orig, pert)
}

pub fn simulate_coupled(model: &Model, master_seed: u64, replication_id: u64, n: usize, burn_in: usize) -> Result<CoupledPaths> {
    if n == 0 {
        return Err(Error::param("path length n must be at least 1"));
    }
    let key = StreamKey::replication(master_seed, replication_id);
    let (orig, pert) = simulate_scalar_coupled(model, key, n, burn_in, 1);
    Ok(CoupledPaths {
        presample_original: vec![orig[0]],
        presample_perturbed: vec![pert[0]],
        original: Series::from_column(orig[1..].to_vec()),
        perturbed: Series::from_column(pert[1..].to_vec()),
        replication_id,
    })
}

/// Writes one or more replications as CSV: `rep,i,col_0..col_{d-1}`.
pub fn write_paths_csv<W: std::io::Write>(out: &mut W, paths: &[(u64, &Series)]) -> std::io::Result<()> {
    let d = paths.first().map(|(_, s)| s.dim()).unwrap_or(1);
    let cols: Vec<String> = (0..d).map(|j| format!("col_{j}")).collect();
    writeln!(out, "rep,i,{}", cols.join(","))?;
    let mut sorted: Vec<_> = paths.to_vec();
    sorted.sort_by_key(|(rep, _)| *rep);
    for (rep, series) in sorted {
        for (i, row) in series.rows().enumerate() {
            write!(out, "{rep},{}", i + 1)?;
            for v in row {
                write!(out, ",{}", crate::runner::fmt_f64(*v))?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
