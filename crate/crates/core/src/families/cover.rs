use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FamilyKind, FunctionFamily};
use crate::error::{Error, Result};
use crate::innovations::StreamKey;
use crate::models::{Embedding, Series, DEFAULT_BURN_IN};

pub const DEFAULT_COVER_CAP: usize = 10_000_000;

/// Smoothness facts about the input law that size the brackets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalInfo {
    /// Lipschitz constant of the marginal CDFs (a bound on the densities).
    pub density_bound: f64,
    /// `E|Z|` of the scalar covariate (residual dominance family).
    #[serde(default)]
    pub covariate_abs_mean: f64,
}

impl MarginalInfo {
    pub fn uniform() -> Self {
        MarginalInfo { density_bound: 1.0, covariate_abs_mean: 0.5 }
    }

    /// Closed-form constants for Gaussian models, otherwise a histogram
    /// estimate from one long path inflated by 50%.
    pub fn from_embedding(embedding: &Embedding, master_seed: u64) -> Result<Self> {
        let density_bound = match embedding.base().gaussian_sd() {
            Some(sd) => 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt()),
            None => {
                let path = Embedding::identity(*embedding.base()).simulate(
                    StreamKey::auxiliary(master_seed, 0xD3),
                    200_000,
                    DEFAULT_BURN_IN,
                )?;
                1.5 * histogram_peak(path.as_slice())
            }
        };
        let covariate_abs_mean = match embedding.covariate() {
            Some(cov) => match cov.gaussian_sd() {
                Some(sd) => sd * (2.0 / std::f64::consts::PI).sqrt(),
                None => {
                    let path = Embedding::identity(*cov).simulate(
                        StreamKey::auxiliary(master_seed, 0xD4),
                        200_000,
                        DEFAULT_BURN_IN,
                    )?;
                    path.as_slice().iter().map(|z| z.abs()).sum::<f64>() / path.len() as f64
                }
            },
            None => 0.0,
        };
        Ok(MarginalInfo { density_bound, covariate_abs_mean })
    }
}

fn histogram_peak(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let lo = sorted[n / 1000];
    let hi = sorted[n - 1 - n / 1000];
    let bins = 200;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        if x >= lo && x < hi {
            counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    *counts.iter().max().unwrap() as f64 / (n as f64 * width)
}

/// Cell layout of a ball cover: a tensor grid of cells, each inscribed in a
/// ball of radius `radius` around its center.
#[derive(Debug, Clone, PartialEq)]
struct Cells {
    lower: Vec<f64>,
    counts: Vec<usize>,
    sides: Vec<f64>,
}

impl Cells {
    fn total(&self) -> usize {
        self.counts.iter().product()
    }

    fn center(&self, mut k: usize) -> Vec<f64> {
        let mut idx = vec![0usize; self.counts.len()];
        for j in (0..self.counts.len()).rev() {
            idx[j] = k % self.counts[j];
            k /= self.counts[j];
        }
        idx.iter()
            .enumerate()
            .map(|(j, &i)| self.lower[j] + (i as f64 + 0.5) * self.sides[j])
            .collect()
    }

    fn half_diagonal(&self) -> f64 {
        0.5 * self.sides.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    fn containing(&self, theta: &[f64]) -> Vec<usize> {
        theta
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                if self.sides[j] == 0.0 {
                    0
                } else {
                    (((t - self.lower[j]) / self.sides[j]).floor().max(0.0) as usize).min(self.counts[j] - 1)
                }
            })
            .collect()
    }

    fn linear(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (&i, &c)| acc * c + i)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Geometry {
    /// Knots `t_0 < ... < t_N`; bracket `k` spans `[t_k, t_{k+1}]` with center `t_{k+1}`.
    Grid { knots: Vec<f64> },
    Balls { cells: Cells, radius: f64 },
}

/// Centers `f_{t_k}` with bounding functions `b_k` such that
/// `|f_theta - f_{t_k(theta)}| <= b_k` pointwise and `rho(b_k) <= delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketingCover {
    pub delta: f64,
    family: FunctionFamily,
    geometry: Geometry,
    zeroed: bool,
}

impl BracketingCover {
    pub fn len(&self) -> usize {
        match &self.geometry {
            Geometry::Grid { knots } => knots.len() - 1,
            Geometry::Balls { cells, .. } => cells.total(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn family(&self) -> &FunctionFamily {
        &self.family
    }

    pub fn center(&self, k: usize) -> Vec<f64> {
        match &self.geometry {
            Geometry::Grid { knots } => vec![knots[k + 1]],
            Geometry::Balls { cells, .. } => cells.center(k),
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match &self.geometry {
            Geometry::Balls { radius, .. } => Some(*radius),
            Geometry::Grid { .. } => None,
        }
    }

    /// Lowest bracket index whose bracket contains `theta`. Falls back to the
    /// nearest center when no bracket does (possible only for covers whose
    /// radius was altered after construction).
    pub fn assign(&self, theta: &[f64]) -> usize {
        match &self.geometry {
            Geometry::Grid { knots } => {
                let t = theta[0];
                // first k with t <= t_{k+1}
                let pos = knots[1..].partition_point(|&knot| knot < t);
                pos.min(knots.len() - 2)
            }
            Geometry::Balls { cells, radius } => {
                let home = cells.containing(theta);
                let dims = home.len();
                let mut best: Option<usize> = None;
                let mut idx = vec![0usize; dims];
                let neighbours = 3usize.pow(dims as u32);
                for code in 0..neighbours {
                    let mut c = code;
                    let mut valid = true;
                    for j in 0..dims {
                        let off = (c % 3) as isize - 1;
                        c /= 3;
                        let v = home[j] as isize + off;
                        if v < 0 || v >= cells.counts[j] as isize {
                            valid = false;
                            break;
                        }
                        idx[j] = v as usize;
                    }
                    if !valid {
                        continue;
                    }
                    let k = cells.linear(&idx);
                    let center = cells.center(k);
                    let dist = center.iter().zip(theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    if dist <= radius * (1.0 + 1e-12) && best.is_none_or(|b| k < b) {
                        best = Some(k);
                    }
                }
                best.unwrap_or_else(|| cells.linear(&home))
            }
        }
    }

    /// `b_k(x)` for output coordinate `coord`.
    pub fn bound_value(&self, k: usize, x: &[f64], coord: usize) -> f64 {
        if self.zeroed {
            return 0.0;
        }
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        match &self.geometry {
            Geometry::Grid { knots } => {
                let (lo, hi) = (knots[k], knots[k + 1]);
                let band = |v: f64| ind(lo <= v && v <= hi);
                match self.family.kind {
                    FamilyKind::Indicator => ind(v_lt(x[0], hi)) - ind(v_lt(x[0], lo)),
                    FamilyKind::Quantilogram { .. } => {
                        ind(x[0] < hi) - ind(x[0] < lo) + ind(x[1] < hi) - ind(x[1] < lo)
                    }
                    FamilyKind::Sign => 2.0 * band(x[0]),
                    FamilyKind::DominancePair => band(x[0]) + band(x[1]),
                    FamilyKind::Huber { delta } => (hi - lo).min(2.0 * delta),
                    _ => unreachable!("grid covers serve one-parameter families"),
                }
            }
            Geometry::Balls { cells, radius } => {
                let c = cells.center(k);
                let r = *radius;
                match self.family.kind {
                    FamilyKind::DominanceResidual => {
                        let term = |y: f64, z: f64, e: f64| {
                            let mid = z * e + c[0];
                            let w = (z.abs() + 1.0) * r;
                            ind(y < mid + w) - ind(y <= mid - w)
                        };
                        term(x[0], x[1], c[1]) + term(x[2], x[3], c[2])
                    }
                    FamilyKind::CensoredQr { .. } => {
                        let (t, cens) = (x[0], x[1]);
                        let znorm = (x[2] * x[2] + x[3] * x[3]).sqrt();
                        let index = x[2] * c[0] + x[3] * c[1];
                        let w = znorm * r;
                        x[2 + coord].abs() * ind(t <= cens) * (ind(t <= index + w) - ind(t < index - w))
                    }
                    _ => unreachable!("ball covers serve multi-parameter families"),
                }
            }
        }
    }

    /// Copy of this cover with every bounding function replaced by zero.
    pub fn with_zero_bounds(&self) -> Self {
        BracketingCover { zeroed: true, ..self.clone() }
    }

    /// Copy of a ball cover with the same centers and a different radius.
    pub fn with_radius(&self, new_radius: f64) -> Self {
        let mut out = self.clone();
        if let Geometry::Balls { radius, .. } = &mut out.geometry {
            *radius = new_radius;
        }
        out
    }
}

#[inline]
fn v_lt(a: f64, b: f64) -> bool {
    a < b
}

enum Plan {
    Grid { count: usize },
    Balls { counts: Vec<usize>, radius: f64 },
}

fn ceil_count(x: f64) -> f64 {
    (x - 1e-9).ceil().max(1.0)
}

fn plan(family: &FunctionFamily, delta: f64, info: &MarginalInfo, cap: usize) -> Result<Plan> {
    if !(delta > 0.0) {
        return Err(Error::param(format!("delta must be positive, got {delta}")));
    }
    if !(info.density_bound > 0.0) {
        return Err(Error::param("marginal density bound must be positive"));
    }
    let lip = info.density_bound;
    match family.kind {
        FamilyKind::DominanceResidual | FamilyKind::CensoredQr { .. } => {
            let radius = ball_radius(family, delta, info);
            // cells inscribed in balls of that radius: side 2r / sqrt(dim)
            let dims = family.theta.dim() as f64;
            let side = 2.0 * radius / dims.sqrt();
            let mut counts = Vec::new();
            let mut total = 1.0f64;
            for j in 0..family.theta.dim() {
                let w = family.theta.width(j);
                let c = if w == 0.0 { 1.0 } else { ceil_count(w / side) };
                total *= c;
                counts.push(c as usize);
            }
            if total > cap as f64 {
                return Err(Error::CoverTooLarge { needed: total, cap });
            }
            Ok(Plan::Balls { counts, radius })
        }
        _ => {
            let width = family.theta.width(0);
            let (spacing, diameter) = grid_spacing(family, delta, lip);
            let count = if width == 0.0 || delta >= diameter { 1.0 } else { ceil_count(width / spacing) };
            if count > cap as f64 {
                return Err(Error::CoverTooLarge { needed: count, cap });
            }
            Ok(Plan::Grid { count: count as usize })
        }
    }
}

/// Knot spacing giving `rho(b_k) <= delta`, and the largest `rho` a single
/// bracket over the whole box can have.
fn grid_spacing(family: &FunctionFamily, delta: f64, lip: f64) -> (f64, f64) {
    let width = family.theta.width(0);
    match family.kind {
        // rho(b_k)^2 = F(t_k) - F(t_{k-1}) <= L dt
        FamilyKind::Indicator => (delta * delta / lip, 1.0),
        // rho(b_k) <= 2 sqrt(F(t_k) - F(t_{k-1})) <= 2 sqrt(L dt)
        FamilyKind::Quantilogram { .. } | FamilyKind::Sign | FamilyKind::DominancePair => {
            (delta * delta / (4.0 * lip), 2.0)
        }
        // b_k = min(dt, 2 Delta) is constant
        FamilyKind::Huber { delta: clip } => (delta, width.min(2.0 * clip)),
        _ => unreachable!(),
    }
}

fn ball_radius(family: &FunctionFamily, delta: f64, info: &MarginalInfo) -> f64 {
    let lip = info.density_bound;
    match family.kind {
        // rho(b_k)^2 <= 2 sum_j P(band_j) <= 2 sum_j 2 L r (E|Z_j| + 1)
        FamilyKind::DominanceResidual => delta * delta / (8.0 * lip * (info.covariate_abs_mean + 1.0)),
        // rho(b_kj)^2 <= B_z^2 P(|T - Z't_k| <= |Z| r) <= B_z^2 2 L |Z|_max r
        FamilyKind::CensoredQr { z_bound } => {
            let zmax = (1.0 + z_bound * z_bound).sqrt();
            let bz = z_bound.max(1.0);
            delta * delta / (2.0 * lip * bz * bz * zmax)
        }
        _ => unreachable!(),
    }
}

pub fn build_cover(family: &FunctionFamily, delta: f64, info: &MarginalInfo, cap: usize) -> Result<BracketingCover> {
    family.validate()?;
    let geometry = match plan(family, delta, info, cap)? {
        Plan::Grid { count } => {
            let (lo, hi) = (family.theta.lower[0], family.theta.upper[0]);
            let knots = (0..=count)
                .map(|k| if k == count { hi } else { lo + (hi - lo) * k as f64 / count as f64 })
                .collect();
            Geometry::Grid { knots }
        }
        Plan::Balls { counts, radius } => {
            let sides = counts
                .iter()
                .enumerate()
                .map(|(j, &c)| family.theta.width(j) / c as f64)
                .collect();
            let cells = Cells { lower: family.theta.lower.clone(), counts, sides };
            let inscribed = cells.half_diagonal();
            debug_assert!(inscribed <= radius * (1.0 + 1e-9));
            Geometry::Balls { radius: inscribed, cells }
        }
    };
    let zeroed = family.theta.is_singleton();
    Ok(BracketingCover { delta, family: family.clone(), geometry, zeroed })
}

/// `N(delta, F)` for the construction used by [`build_cover`].
pub fn bracketing_number(family: &FunctionFamily, delta: f64, info: &MarginalInfo, cap: usize) -> Result<usize> {
    Ok(match plan(family, delta, info, cap)? {
        Plan::Grid { count } => count,
        Plan::Balls { counts, .. } => counts.iter().product(),
    })
}

/// Smooth upper envelope of `N(x, F)` (counts before rounding up, plus one
/// per coordinate) and its power-law order in `1/x` near zero.
pub(crate) fn bracketing_envelope<'a>(family: &'a FunctionFamily, info: &MarginalInfo) -> (impl Fn(f64) -> f64 + 'a, f64) {
    let info = *info;
    let order = if family.theta.is_singleton() {
        0.0
    } else {
        match family.kind {
            FamilyKind::Huber { .. } => 1.0,
            FamilyKind::DominanceResidual | FamilyKind::CensoredQr { .. } => {
                2.0 * (0..family.theta.dim()).filter(|&j| family.theta.width(j) > 0.0).count() as f64
            }
            _ => 2.0,
        }
    };
    let f = move |x: f64| match family.kind {
        FamilyKind::DominanceResidual | FamilyKind::CensoredQr { .. } => {
            let side = 2.0 * ball_radius(family, x, &info) / (family.theta.dim() as f64).sqrt();
            (0..family.theta.dim())
                .map(|j| family.theta.width(j) / side + 1.0)
                .product()
        }
        _ => family.theta.width(0) / grid_spacing(family, x, info.density_bound).0 + 1.0,
    };
    (f, order)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverCheck {
    pub brackets: usize,
    /// Largest `|f_theta - f_{t_k}| - b_k` seen; positive means a violation.
    pub worst_domination_margin: f64,
    /// Largest `rho_hat(b_k) - delta - 3 se` seen; positive means a violation.
    pub worst_size_margin: f64,
    pub max_rho_hat: f64,
    /// `(k, rho_hat, se)` per bracket.
    pub rho_hat: Vec<(usize, f64, f64)>,
    pub domination_ok: bool,
    pub size_ok: bool,
}

impl CoverCheck {
    pub fn passed(&self) -> bool {
        self.domination_ok && self.size_ok
    }
}

/// Checks pointwise domination on `sample x theta_grid` and the Monte Carlo
/// size of every `b_k` on `sample` (iid standard errors).
pub fn verify_cover(cover: &BracketingCover, family: &FunctionFamily, sample: &Series, theta_grid: &[Vec<f64>]) -> Result<CoverCheck> {
    if sample.is_empty() {
        return Err(Error::EmptyData);
    }
    if sample.dim() != family.input_dim() {
        return Err(Error::DimensionMismatch { expected: family.input_dim(), got: sample.dim() });
    }
    let outputs = family.output_dim();
    let worst_dom = theta_grid
        .par_iter()
        .map(|theta| {
            let k = cover.assign(theta);
            let center = cover.center(k);
            let mut worst = f64::NEG_INFINITY;
            for x in sample.rows() {
                for j in 0..outputs {
                    let diff = (family.value(theta, x, j) - family.value(&center, x, j)).abs();
                    worst = worst.max(diff - cover.bound_value(k, x, j));
                }
            }
            worst
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let n = sample.len() as f64;
    let rho_hat: Vec<(usize, f64, f64)> = (0..cover.len())
        .into_par_iter()
        .map(|k| {
            let mut best = (0.0, 0.0);
            for j in 0..outputs {
                let (mut s, mut s2) = (0.0, 0.0);
                for x in sample.rows() {
                    let b = cover.bound_value(k, x, j);
                    s += b * b;
                    s2 += b.powi(4);
                }
                let m = s / n;
                let var = if n > 1.0 { ((s2 - n * m * m) / (n - 1.0)).max(0.0) } else { 0.0 };
                let est = super::rho::sqrt_with_se(m, (var / n).sqrt());
                if est.0 >= best.0 {
                    best = est;
                }
            }
            (k, best.0, best.1)
        })
        .collect();
    let worst_size = rho_hat
        .iter()
        .map(|&(_, r, se)| r - cover.delta - 3.0 * se)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_rho_hat = rho_hat.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(CoverCheck {
        brackets: cover.len(),
        worst_domination_margin: worst_dom,
        worst_size_margin: worst_size,
        max_rho_hat,
        rho_hat,
        domination_ok: worst_dom <= 1e-12,
        size_ok: worst_size <= 0.0,
    })
}
