use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FamilyKind, FunctionFamily};
use crate::error::{Error, Result};
use crate::innovations::{derive_stream, InnovationSpec, StreamKey};
use crate::models::{Embedding, EmbeddingSpec, Series, DEFAULT_BURN_IN};
use crate::numerics::std_normal_cdf;

const MIN_REPS: usize = 100;
/// Batches used for the batch-means standard error on dependent samples.
pub(crate) const RHO_BATCHES: usize = 50;

/// Law of `xi_0` against which `rho(f) = ||f(xi_0)||_2` is taken.
#[derive(Debug, Clone, Copy)]
pub enum Law<'a> {
    /// Every input coordinate iid uniform on `[0, 1]`.
    Uniform01 { master_seed: u64 },
    /// Stationary law of an embedded model, sampled from one long path.
    Stationary { embedding: &'a Embedding, master_seed: u64 },
}

impl Law<'_> {
    /// `reps` draws of `xi_0` (dependent draws along one path for a
    /// stationary law).
    pub fn sample(&self, dim: usize, reps: usize, stream_id: u64) -> Result<Series> {
        match *self {
            Law::Uniform01 { master_seed } => {
                let mut s = derive_stream(InnovationSpec::Uniform01, StreamKey::auxiliary(master_seed, stream_id));
                Ok(Series::from_rows(reps, dim, s.draw(reps * dim)))
            }
            Law::Stationary { embedding, master_seed } => {
                if embedding.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: embedding.dim() });
                }
                embedding.simulate(StreamKey::auxiliary(master_seed, stream_id), reps, DEFAULT_BURN_IN)
            }
        }
    }

    fn is_iid(&self) -> bool {
        matches!(self, Law::Uniform01 { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RhoMethod {
    /// Closed form when one is known for the family and law, Monte Carlo otherwise.
    #[default]
    Auto,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum RhoSource {
    ClosedForm,
    MonteCarlo { reps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoMetricEstimate {
    pub value: f64,
    pub std_error: f64,
    pub source: RhoSource,
}

/// Marginal CDFs of the input coordinates, when known in closed form.
fn marginal_cdfs<'a>(law: &Law<'a>) -> Option<(Box<dyn Fn(f64) -> f64 + 'a>, Box<dyn Fn(f64) -> f64 + 'a>, EmbeddingSpec)> {
    match law {
        Law::Uniform01 { .. } => {
            let f = |t: f64| t.clamp(0.0, 1.0);
            Some((Box::new(f), Box::new(f), EmbeddingSpec::Identity))
        }
        Law::Stationary { embedding, .. } => {
            let sd = embedding.base().gaussian_sd()?;
            let spec = *embedding.spec();
            let shift = match spec {
                EmbeddingSpec::BivariateCopy { shift } => shift,
                _ => 0.0,
            };
            Some((
                Box::new(move |t: f64| std_normal_cdf(t / sd)),
                Box::new(move |t: f64| std_normal_cdf((t - shift) / sd)),
                spec,
            ))
        }
    }
}

fn closed_form(family: &FunctionFamily, a: &[f64], b: &[f64], law: &Law<'_>) -> Option<f64> {
    let (f1, f2, spec) = marginal_cdfs(law)?;
    let iid_input = law.is_iid();
    let (t, s) = (a[0], b[0]);
    let sq = match family.kind {
        FamilyKind::Indicator if iid_input || spec == EmbeddingSpec::Identity => (f1(t) - f1(s)).abs(),
        FamilyKind::Sign if iid_input || spec == EmbeddingSpec::Identity => 4.0 * (f1(t) - f1(s)).abs(),
        FamilyKind::DominancePair if iid_input || matches!(spec, EmbeddingSpec::BivariateCopy { .. }) => {
            let d1 = f1(t) - f1(s);
            let d2 = f2(t) - f2(s);
            d1.abs() + d2.abs() - 2.0 * d1 * d2
        }
        FamilyKind::Quantilogram { alpha } => {
            let iid_pairs = iid_input
                || match (law, spec) {
                    (Law::Stationary { embedding, .. }, EmbeddingSpec::LagPair { h }) => {
                        h >= 1 && embedding.base().gaussian_lag_correlation(h) == Some(0.0)
                    }
                    _ => false,
                };
            if !iid_pairs {
                return None;
            }
            // independent coordinates: E(a1 a2 - a1' a2')^2 = (E a^2)^2 - 2 (E a a')^2 + (E a'^2)^2
            let (ft, fs) = (f1(t), f1(s));
            let sq_t = alpha * alpha - 2.0 * alpha * ft + ft;
            let sq_s = alpha * alpha - 2.0 * alpha * fs + fs;
            let cross = alpha * alpha - alpha * (ft + fs) + ft.min(fs);
            sq_t * sq_t - 2.0 * cross * cross + sq_s * sq_s
        }
        _ => return None,
    };
    Some(sq.max(0.0).sqrt())
}

/// Mean and standard error of `values`, by batch means unless `iid`.
pub(crate) fn mean_and_se(values: &[f64], iid: bool) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    if iid || n < 2 * RHO_BATCHES {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        return (mean, (var / n as f64).sqrt());
    }
    let per = n / RHO_BATCHES;
    let batch_means: Vec<f64> = values[..per * RHO_BATCHES]
        .chunks_exact(per)
        .map(|c| c.iter().sum::<f64>() / per as f64)
        .collect();
    let bm = batch_means.iter().sum::<f64>() / RHO_BATCHES as f64;
    let var = batch_means.iter().map(|v| (v - bm).powi(2)).sum::<f64>() / (RHO_BATCHES - 1) as f64;
    (mean, (var / RHO_BATCHES as f64).sqrt())
}

/// Turns a mean of squares with its standard error into `(rho, se)`.
pub(crate) fn sqrt_with_se(mean_sq: f64, se_sq: f64) -> (f64, f64) {
    if mean_sq <= 0.0 {
        return (0.0, 0.0);
    }
    let r = mean_sq.sqrt();
    (r, se_sq / (2.0 * r))
}

/// Estimate of `rho(f_theta - f_theta')`; the maximum over output
/// coordinates for vector-valued families.
pub fn rho(
    family: &FunctionFamily,
    theta: &[f64],
    theta_prime: &[f64],
    law: Law<'_>,
    reps: usize,
    method: RhoMethod,
) -> Result<RhoMetricEstimate> {
    if reps < MIN_REPS {
        return Err(Error::param(format!("rho needs at least {MIN_REPS} reps, got {reps}")));
    }
    for t in [theta, theta_prime] {
        if !family.theta.contains(t) {
            return Err(Error::param(format!("theta {t:?} outside the parameter box")));
        }
    }
    if theta == theta_prime {
        return Ok(RhoMetricEstimate { value: 0.0, std_error: 0.0, source: RhoSource::ClosedForm });
    }
    if method == RhoMethod::Auto {
        if let Some(value) = closed_form(family, theta, theta_prime, &law) {
            return Ok(RhoMetricEstimate { value, std_error: 0.0, source: RhoSource::ClosedForm });
        }
    }
    let sample = law.sample(family.input_dim(), reps, 0)?;
    let mut best = (0.0, 0.0);
    for coord in 0..family.output_dim() {
        let sq: Vec<f64> = sample
            .rows()
            .map(|x| (family.value(theta, x, coord) - family.value(theta_prime, x, coord)).powi(2))
            .collect();
        let (m, se) = mean_and_se(&sq, law.is_iid());
        let est = sqrt_with_se(m, se);
        if est.0 > best.0 {
            best = est;
        }
    }
    Ok(RhoMetricEstimate { value: best.0, std_error: best.1, source: RhoSource::MonteCarlo { reps } })
}

/// Monte Carlo `rho` for every pair `(i, j)`, `i < j`, of `grid` on a shared
/// sample, returned as a packed upper triangle in row-major order. Vector
/// families report the worst coordinate.
pub(crate) fn pairwise_rho(family: &FunctionFamily, grid: &[Vec<f64>], sample: &Series, iid: bool) -> Vec<(f64, f64)> {
    let g = grid.len();
    let n = sample.len();
    let batches = if iid || n < 2 * RHO_BATCHES { 1 } else { RHO_BATCHES };
    let per = n / batches;
    let used = per * batches;
    let pairs: Vec<(usize, usize)> = (0..g).flat_map(|i| (i + 1..g).map(move |j| (i, j))).collect();
    let mut best = vec![(0.0f64, 0.0f64); pairs.len()];
    for coord in 0..family.output_dim() {
        // values[theta][obs]
        let values: Vec<Vec<f32>> = grid
            .par_iter()
            .map(|t| (0..used).map(|i| family.value(t, sample.row(i), coord) as f32).collect())
            .collect();
        let est: Vec<(f64, f64)> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let (a, b) = (&values[i], &values[j]);
                if batches == 1 {
                    let mut s = 0.0f64;
                    let mut s2 = 0.0f64;
                    for k in 0..used {
                        let d = (a[k] - b[k]) as f64;
                        let d2 = d * d;
                        s += d2;
                        s2 += d2 * d2;
                    }
                    let m = s / used as f64;
                    let var = ((s2 - used as f64 * m * m) / (used as f64 - 1.0)).max(0.0);
                    sqrt_with_se(m, (var / used as f64).sqrt())
                } else {
                    let mut bm = [0.0f64; RHO_BATCHES];
                    for (bi, slot) in bm.iter_mut().enumerate() {
                        let mut s = 0.0f64;
                        for k in bi * per..(bi + 1) * per {
                            let d = (a[k] - b[k]) as f64;
                            s += d * d;
                        }
                        *slot = s / per as f64;
                    }
                    let m = bm.iter().sum::<f64>() / batches as f64;
                    let var = bm.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
                    sqrt_with_se(m, (var / batches as f64).sqrt())
                }
            })
            .collect();
        for (slot, e) in best.iter_mut().zip(est) {
            if e.0 > slot.0 {
                *slot = e;
            }
        }
    }
    best
}
