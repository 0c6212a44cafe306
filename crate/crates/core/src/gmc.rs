//! Monte Carlo decay of coupled differences: `||xi_n - xi_n'||_q`, the family
//! and bracket norms of the coupling assumption, and sup-over-`lambda`
//! indicator couplings, each with a log-linear geometric-rate fit.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{BracketingCover, FunctionFamily, ParamBox};
use crate::models::{CoupledPaths, Embedding, DEFAULT_BURN_IN};
use crate::numerics::fit_line;
use crate::runner::fmt_f64;
use crate::stats::{fold_replications, lp_norm, Moments};

pub const MIN_DECAY_REPS: u64 = 1000;
/// Lags whose estimate is not above this many standard errors are left out of the fit.
pub const NOISE_FLOOR_SE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySettings {
    pub lags: Vec<usize>,
    /// Norm order `p` (or `q` for the raw coupling norm).
    pub p: f64,
    pub reps: u64,
    pub master_seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl DecaySettings {
    pub fn new(lags: Vec<usize>, p: f64, reps: u64, master_seed: u64) -> Self {
        DecaySettings { lags, p, reps, master_seed, burn_in: DEFAULT_BURN_IN }
    }

    /// Every violated precondition, as messages.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.p > 0.0 && self.p.is_finite()) {
            out.push(format!("norm order must be positive and finite, got {}", self.p));
        }
        if self.reps < MIN_DECAY_REPS {
            out.push(format!("decay experiments need at least {MIN_DECAY_REPS} replications, got {}", self.reps));
        }
        if self.lags.is_empty() {
            out.push("lag list is empty".into());
        }
        if self.lags.contains(&0) {
            out.push("lags start at 1".into());
        }
        if self.lags.windows(2).any(|w| w[0] >= w[1]) {
            out.push("lags must be strictly increasing".into());
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

    fn max_lag(&self) -> usize {
        *self.lags.last().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum DecayOutcome {
    Fitted { slope: f64, intercept: f64, alpha_hat: f64, r_squared: f64 },
    /// Fewer than two lags clear the noise floor.
    TooFastToResolve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub quantity: String,
    pub lags: Vec<usize>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub used_in_fit: Vec<bool>,
    pub outcome: DecayOutcome,
    pub p: f64,
    pub reps: u64,
    pub seed: u64,
}

impl DecayReport {
    fn from_estimates(quantity: &str, settings: &DecaySettings, estimates: Vec<(f64, f64)>) -> Self {
        let used: Vec<bool> = estimates
            .iter()
            .map(|&(e, se)| e > 0.0 && e > NOISE_FLOOR_SE * se)
            .collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = settings
            .lags
            .iter()
            .zip(&estimates)
            .zip(&used)
            .filter(|(_, &u)| u)
            .map(|((&l, &(e, _)), _)| (l as f64, e.ln()))
            .unzip();
        let outcome = match fit_line(&xs, &ys) {
            Some(fit) => DecayOutcome::Fitted {
                slope: fit.slope,
                intercept: fit.intercept,
                alpha_hat: fit.slope.exp(),
                r_squared: fit.r_squared,
            },
            None => DecayOutcome::TooFastToResolve,
        };
        DecayReport {
            quantity: quantity.to_string(),
            lags: settings.lags.clone(),
            estimates: estimates.iter().map(|e| e.0).collect(),
            std_errors: estimates.iter().map(|e| e.1).collect(),
            used_in_fit: used,
            outcome,
            p: settings.p,
            reps: settings.reps,
            seed: settings.master_seed,
        }
    }

    pub fn alpha_hat(&self) -> Option<f64> {
        match self.outcome {
            DecayOutcome::Fitted { alpha_hat, .. } => Some(alpha_hat),
            DecayOutcome::TooFastToResolve => None,
        }
    }

    pub fn slope(&self) -> Option<f64> {
        match self.outcome {
            DecayOutcome::Fitted { slope, .. } => Some(slope),
            DecayOutcome::TooFastToResolve => None,
        }
    }

    pub fn r_squared(&self) -> Option<f64> {
        match self.outcome {
            DecayOutcome::Fitted { r_squared, .. } => Some(r_squared),
            DecayOutcome::TooFastToResolve => None,
        }
    }

    /// `lag,estimate,se,used_in_fit`
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "lag,estimate,se,used_in_fit")?;
        for i in 0..self.lags.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.lags[i],
                fmt_f64(self.estimates[i]),
                fmt_f64(self.std_errors[i]),
                self.used_in_fit[i]
            )?;
        }
        Ok(())
    }

    /// `{quantity, status, alpha_hat, slope, intercept, r_squared, p, reps, seed}`
    pub fn summary_json(&self) -> serde_json::Value {
        let num = |x: Option<f64>| x.map(serde_json::Value::from).unwrap_or(serde_json::Value::Null);
        let intercept = match self.outcome {
            DecayOutcome::Fitted { intercept, .. } => Some(intercept),
            DecayOutcome::TooFastToResolve => None,
        };
        serde_json::json!({
            "quantity": self.quantity,
            "status": match self.outcome {
                DecayOutcome::Fitted { .. } => "fitted",
                DecayOutcome::TooFastToResolve => "too-fast-to-resolve",
            },
            "alpha_hat": num(self.alpha_hat()),
            "slope": num(self.slope()),
            "intercept": num(intercept),
            "r_squared": num(self.r_squared()),
            "p": self.p,
            "reps": self.reps,
            "seed": self.seed,
        })
    }
}

/// Runs every replication's coupled pair and folds `width` accumulators per
/// lag, `record(paths, row_index, slot_moments)` filling one lag's slots.
fn decay_fold<R>(embedding: &Embedding, settings: &DecaySettings, width: usize, record: R) -> Result<Vec<Vec<Moments>>>
where
    R: Fn(&CoupledPaths, usize, &mut [Moments]) + Sync,
{
    settings.validate()?;
    let n = settings.max_lag();
    let lags = &settings.lags;
    // simulate once up front so model errors surface as errors, not panics
    embedding.simulate_coupled(settings.master_seed, 0, n, settings.burn_in)?;
    let acc = fold_replications(
        settings.reps,
        || vec![Moments::default(); lags.len() * width],
        |acc, rep| {
            let paths = embedding
                .simulate_coupled(settings.master_seed, rep, n, settings.burn_in)
                .expect("checked on replication 0");
            for (li, &lag) in lags.iter().enumerate() {
                record(&paths, lag - 1, &mut acc[li * width..(li + 1) * width]);
            }
        },
        |total, part| total.iter_mut().zip(&part).for_each(|(t, p)| t.merge(p)),
    );
    Ok(acc.chunks(width).map(|c| c.to_vec()).collect())
}

/// `L_p` norms of every slot; the lag's estimate is the largest, with its SE.
fn sup_of_norms(per_lag: &[Vec<Moments>], p: f64) -> Vec<(f64, f64)> {
    per_lag
        .iter()
        .map(|slots| {
            slots
                .iter()
                .map(|m| lp_norm(m, p))
                .fold((0.0, 0.0), |best, cur| if cur.0 > best.0 { cur } else { best })
        })
        .collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `||xi_n - xi_n'||_q` per lag (Euclidean norm for vector `xi`).
pub fn coupling_norm(embedding: &Embedding, settings: &DecaySettings) -> Result<DecayReport> {
    let q = settings.p;
    let per_lag = decay_fold(embedding, settings, 1, |paths, i, slot| {
        let d = euclid(paths.original.row(i), paths.perturbed.row(i));
        slot[0].push(d.powf(q));
    })?;
    Ok(DecayReport::from_estimates("coupling", settings, sup_of_norms(&per_lag, q)))
}

fn check_grid(family: &FunctionFamily, embedding: &Embedding, grid: &[Vec<f64>]) -> Result<()> {
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

/// `sup_theta ||f_theta(xi_n) - f_theta(xi_n')||_p` over a finite grid,
/// coordinatewise for vector-valued families.
pub fn family_coupling_norm(
    embedding: &Embedding,
    family: &FunctionFamily,
    theta_grid: &[Vec<f64>],
    settings: &DecaySettings,
) -> Result<DecayReport> {
    check_grid(family, embedding, theta_grid)?;
    let outputs = family.output_dim();
    let p = settings.p;
    let per_lag = decay_fold(embedding, settings, theta_grid.len() * outputs, |paths, i, slots| {
        let (x, y) = (paths.original.row(i), paths.perturbed.row(i));
        for (g, theta) in theta_grid.iter().enumerate() {
            for j in 0..outputs {
                let d = (family.value(theta, x, j) - family.value(theta, y, j)).abs();
                slots[g * outputs + j].push(d.powf(p));
            }
        }
    })?;
    Ok(DecayReport::from_estimates("family", settings, sup_of_norms(&per_lag, p)))
}

/// `max_k ||b_k(xi_n) - b_k(xi_n')||_p` over every bracket of `cover`.
pub fn bracket_coupling_norm(embedding: &Embedding, cover: &BracketingCover, settings: &DecaySettings) -> Result<DecayReport> {
    let family = cover.family();
    if embedding.dim() != family.input_dim() {
        return Err(Error::DimensionMismatch { expected: family.input_dim(), got: embedding.dim() });
    }
    let outputs = family.output_dim();
    let p = settings.p;
    let brackets = cover.len();
    let per_lag = decay_fold(embedding, settings, brackets * outputs, |paths, i, slots| {
        let (x, y) = (paths.original.row(i), paths.perturbed.row(i));
        for k in 0..brackets {
            for j in 0..outputs {
                let d = (cover.bound_value(k, x, j) - cover.bound_value(k, y, j)).abs();
                slots[k * outputs + j].push(d.powf(p));
            }
        }
    })?;
    Ok(DecayReport::from_estimates("bracket", settings, sup_of_norms(&per_lag, p)))
}

/// Largest `sup_theta |f_theta(xi_n) - f_theta(xi_n')| - |xi_n - xi_n'|` seen
/// over every replication and lag. For Huber families this is `<= 0` up to
/// rounding.
pub fn lipschitz_margin(
    embedding: &Embedding,
    family: &FunctionFamily,
    theta_grid: &[Vec<f64>],
    settings: &DecaySettings,
) -> Result<f64> {
    check_grid(family, embedding, theta_grid)?;
    settings.validate()?;
    let n = settings.max_lag();
    let lags = &settings.lags;
    embedding.simulate_coupled(settings.master_seed, 0, n, settings.burn_in)?;
    Ok(fold_replications(
        settings.reps,
        || f64::NEG_INFINITY,
        |worst, rep| {
            let paths = embedding
                .simulate_coupled(settings.master_seed, rep, n, settings.burn_in)
                .expect("checked on replication 0");
            for &lag in lags {
                let (x, y) = (paths.original.row(lag - 1), paths.perturbed.row(lag - 1));
                let sup = theta_grid
                    .iter()
                    .map(|t| (family.value(t, x, 0) - family.value(t, y, 0)).abs())
                    .fold(0.0, f64::max);
                *worst = worst.max(sup - euclid(x, y));
            }
        },
        |a, b| *a = a.max(b),
    ))
}

/// Where `V` comes from in `1{U < V'lambda}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VSource {
    /// Singleton `V` (case i).
    Constant { value: Vec<f64> },
    /// `V` read from columns of `xi`.
    Columns { columns: Vec<usize> },
}

/// The map `g` with `V = g(W)` in case ii.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GMap {
    Identity,
    /// `g(w) = (1, w)`
    PrependOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CouplingCase {
    /// `V` is a singleton.
    Singleton,
    /// `V = g(W)` exactly.
    Function { g: GMap },
    /// `U` and `V` independent given `W`.
    ConditionalIndependence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Inequality {
    #[default]
    Strict,
    Weak,
}

/// Decomposition `xi = (U, V, W)` for the indicator coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorCouplingSpec {
    pub u: usize,
    pub v: VSource,
    #[serde(default)]
    pub w: Vec<usize>,
    pub case: CouplingCase,
    #[serde(default)]
    pub inequality: Inequality,
    pub lambda: ParamBox,
}

impl IndicatorCouplingSpec {
    fn v_dim(&self) -> usize {
        match &self.v {
            VSource::Constant { value } => value.len(),
            VSource::Columns { columns } => columns.len(),
        }
    }

    fn check(&self, embedding: &Embedding) -> Result<()> {
        let d = embedding.dim();
        let err = |m: String| Err(Error::CouplingConfig(m));
        let mut cols = vec![self.u];
        cols.extend(&self.w);
        if let VSource::Columns { columns } = &self.v {
            cols.extend(columns);
        }
        if let Some(c) = cols.iter().find(|&&c| c >= d) {
            return err(format!("column {c} out of range for a {d}-dimensional xi"));
        }
        if self.v_dim() == 0 {
            return err("V must have at least one coordinate".into());
        }
        if self.lambda.dim() != self.v_dim() {
            return err(format!("lambda has {} coordinates, V has {}", self.lambda.dim(), self.v_dim()));
        }
        match (&self.case, &self.v) {
            (CouplingCase::Singleton, VSource::Constant { .. }) => Ok(()),
            (CouplingCase::Singleton, _) => err("the singleton case needs a constant V".into()),
            (CouplingCase::Function { g }, VSource::Columns { columns }) => {
                let expected = match g {
                    GMap::Identity => self.w.len(),
                    GMap::PrependOne => self.w.len() + 1,
                };
                if columns.len() != expected {
                    return err(format!("g(W) has {expected} coordinates, V has {}", columns.len()));
                }
                Ok(())
            }
            (CouplingCase::Function { .. }, _) => err("the function case reads V from columns".into()),
            (CouplingCase::ConditionalIndependence, VSource::Columns { columns }) => {
                let groups = embedding.column_groups();
                if columns.iter().any(|&c| groups[c] == groups[self.u]) {
                    return err(format!(
                        "the model does not declare U (column {}) independent of V (columns {columns:?}) given W",
                        self.u
                    ));
                }
                Ok(())
            }
            (CouplingCase::ConditionalIndependence, _) => {
                err("the conditional-independence case reads V from columns".into())
            }
        }
    }

    fn v_of<'a>(&'a self, row: &'a [f64], buf: &'a mut Vec<f64>) -> &'a [f64] {
        match &self.v {
            VSource::Constant { value } => value,
            VSource::Columns { columns } => {
                buf.clear();
                buf.extend(columns.iter().map(|&c| row[c]));
                buf
            }
        }
    }

    /// `g(W) == V` on this row (case ii only).
    fn g_holds(&self, row: &[f64]) -> bool {
        let (CouplingCase::Function { g }, VSource::Columns { columns }) = (&self.case, &self.v) else {
            return true;
        };
        let w = self.w.iter().map(|&c| row[c]);
        let gw: Vec<f64> = match g {
            GMap::Identity => w.collect(),
            GMap::PrependOne => std::iter::once(1.0).chain(w).collect(),
        };
        columns.iter().zip(&gw).all(|(&c, &g)| row[c] == g)
    }

    fn indicator(&self, u: f64, v: &[f64], lambda: &[f64]) -> f64 {
        let index: f64 = v.iter().zip(lambda).map(|(a, b)| a * b).sum();
        let hit = match self.inequality {
            Inequality::Strict => u < index,
            Inequality::Weak => u <= index,
        };
        if hit {
            1.0
        } else {
            0.0
        }
    }
}

/// `sup_lambda ||1{U_n < V_n'lambda} - 1{U_n' < V_n''lambda}||_p` over a
/// finite `lambda` grid. Case ii fails with [`Error::CouplingConfig`] when
/// `g(W) != V` on any simulated row.
pub fn indicator_coupling(
    embedding: &Embedding,
    spec: &IndicatorCouplingSpec,
    lambda_grid: &[Vec<f64>],
    settings: &DecaySettings,
) -> Result<DecayReport> {
    spec.check(embedding)?;
    if lambda_grid.is_empty() {
        return Err(Error::param("lambda grid is empty"));
    }
    if let Some(l) = lambda_grid.iter().find(|l| !spec.lambda.contains(l)) {
        return Err(Error::param(format!("lambda {l:?} lies outside Lambda")));
    }
    settings.validate()?;
    let n = settings.max_lag();
    let lags = &settings.lags;
    let width = lambda_grid.len();
    embedding.simulate_coupled(settings.master_seed, 0, n, settings.burn_in)?;
    let (acc, g_ok) = fold_replications(
        settings.reps,
        || (vec![Moments::default(); lags.len() * width], true),
        |(acc, ok), rep| {
            let paths = embedding
                .simulate_coupled(settings.master_seed, rep, n, settings.burn_in)
                .expect("checked on replication 0");
            *ok &= paths.original.rows().chain(paths.perturbed.rows()).all(|r| spec.g_holds(r));
            let (mut bx, mut by) = (Vec::new(), Vec::new());
            for (li, &lag) in lags.iter().enumerate() {
                let (x, y) = (paths.original.row(lag - 1), paths.perturbed.row(lag - 1));
                let (vx, vy) = (spec.v_of(x, &mut bx).to_vec(), spec.v_of(y, &mut by).to_vec());
                for (g, lambda) in lambda_grid.iter().enumerate() {
                    let d = (spec.indicator(x[spec.u], &vx, lambda) - spec.indicator(y[spec.u], &vy, lambda)).abs();
                    acc[li * width + g].push(d);
                }
            }
        },
        |(t, tok), (p, pok)| {
            t.iter_mut().zip(&p).for_each(|(a, b)| a.merge(b));
            *tok &= pok;
        },
    );
    if !g_ok {
        return Err(Error::CouplingConfig("V = g(W) fails on simulated draws".into()));
    }
    // |difference| is 0/1, so E|d|^p = E d for every p
    let per_lag: Vec<Vec<Moments>> = acc.chunks(width).map(|c| c.to_vec()).collect();
    Ok(DecayReport::from_estimates("indicator", settings, sup_of_norms(&per_lag, settings.p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{FamilyKind, ParamBox};
    use crate::models::{EmbeddingSpec, ModelSpec};

    fn ar1() -> Embedding {
        Embedding::identity(ModelSpec::ar1(0.5, 1.0).build().unwrap())
    }

    fn lags(n: usize) -> Vec<usize> {
        (1..=n).collect()
    }

    #[test]
    fn ar1_rate_is_phi() {
        let r = coupling_norm(&ar1(), &DecaySettings::new(lags(20), 2.0, 4000, 1)).unwrap();
        let a = r.alpha_hat().unwrap();
        assert!((a - 0.5).abs() < 1e-6, "{a}");
        // closed form 0.5^n sqrt(8/3) within a few SE
        let exact = 0.5 * (8.0f64 / 3.0).sqrt();
        assert!((r.estimates[0] - exact).abs() < 4.0 * r.std_errors[0]);
    }

    #[test]
    fn memoryless_is_exactly_zero() {
        let iid = Embedding::identity(ModelSpec::ar1(0.0, 1.0).build().unwrap());
        let r = coupling_norm(&iid, &DecaySettings::new(lags(5), 2.0, 1000, 1)).unwrap();
        assert!(r.estimates.iter().all(|&e| e == 0.0));
        assert_eq!(r.outcome, DecayOutcome::TooFastToResolve);
    }

    #[test]
    fn settings_are_validated() {
        let bad = DecaySettings::new(vec![2, 2, 0], -1.0, 10, 0);
        let Err(Error::Validation(msgs)) = bad.validate() else { panic!() };
        assert_eq!(msgs.len(), 4, "{msgs:?}");
    }

    #[test]
    fn quantilogram_on_iid_vanishes_after_lag_window() {
        let emb = Embedding::new(ModelSpec::iid_normal().build().unwrap(), EmbeddingSpec::LagPair { h: 1 }).unwrap();
        let fam = FunctionFamily::new(FamilyKind::Quantilogram { alpha: 0.1 }, ParamBox::interval(-2.0, 0.0).unwrap()).unwrap();
        let r = family_coupling_norm(&emb, &fam, &fam.theta.grid(32), &DecaySettings::new(lags(4), 2.0, 1000, 3)).unwrap();
        // xi_1 = (X_0, X_1) still carries the pre-sample X_0
        assert!(r.estimates[0] > 0.0);
        assert!(r.estimates[1..].iter().all(|&e| e == 0.0));
    }

    #[test]
    fn huber_dominated_and_brackets_zero() {
        let fam = FunctionFamily::new(FamilyKind::Huber { delta: 1.0 }, ParamBox::interval(-1.0, 1.0).unwrap()).unwrap();
        let emb = Embedding::identity(ModelSpec::arch1(0.5, 0.4).build().unwrap());
        let s = DecaySettings::new(lags(10), 2.0, 1000, 5);
        let grid = fam.theta.grid(64);
        assert!(lipschitz_margin(&emb, &fam, &grid, &s).unwrap() <= 1e-12);
        let fr = family_coupling_norm(&emb, &fam, &grid, &s).unwrap();
        let cr = coupling_norm(&emb, &s).unwrap();
        for (f, c) in fr.estimates.iter().zip(&cr.estimates) {
            assert!(f <= &(c * (1.0 + 1e-12)), "{f} > {c}");
        }
        let cover = crate::families::build_cover(&fam, 0.1, &crate::families::MarginalInfo::uniform(), 1000).unwrap();
        let br = bracket_coupling_norm(&emb, &cover, &s).unwrap();
        assert!(br.estimates.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn indicator_singleton_case_decays() {
        let spec = IndicatorCouplingSpec {
            u: 0,
            v: VSource::Constant { value: vec![1.0] },
            w: vec![],
            case: CouplingCase::Singleton,
            inequality: Inequality::Strict,
            lambda: ParamBox::interval(-1.0, 1.0).unwrap(),
        };
        let s = DecaySettings::new(lags(12), 1.0, 4000, 2);
        let grid = spec.lambda.grid(64);
        let strict = indicator_coupling(&ar1(), &spec, &grid, &s).unwrap();
        assert!(strict.slope().unwrap() < 0.0);
        assert!(strict.r_squared().unwrap() >= 0.9);
        let weak = indicator_coupling(&ar1(), &IndicatorCouplingSpec { inequality: Inequality::Weak, ..spec.clone() }, &grid, &s).unwrap();
        for i in 0..strict.lags.len() {
            let se = (strict.std_errors[i].powi(2) + weak.std_errors[i].powi(2)).sqrt();
            assert!((strict.estimates[i] - weak.estimates[i]).abs() <= 3.0 * se + 1e-15);
        }
    }

    #[test]
    fn indicator_case_checks() {
        let base = ModelSpec::ar1(0.5, 1.0).build().unwrap();
        let cens = Embedding::new(
            base,
            EmbeddingSpec::CensoredTriple {
                beta: [0.0, 1.0],
                covariate: ModelSpec::ar1(0.3, 1.0),
                z_bound: 1.0,
                censor_mean: 0.5,
                censor_scale: 1.0,
            },
        )
        .unwrap();
        let s = DecaySettings::new(lags(3), 2.0, 1000, 2);
        // T independent of C given z: accepted
        let ci = IndicatorCouplingSpec {
            u: 0,
            v: VSource::Columns { columns: vec![1] },
            w: vec![3],
            case: CouplingCase::ConditionalIndependence,
            inequality: Inequality::Weak,
            lambda: ParamBox::singleton(vec![1.0]).unwrap(),
        };
        assert!(indicator_coupling(&cens, &ci, &ci.lambda.grid(1), &s).is_ok());
        // T and z share a source: refused
        let bad = IndicatorCouplingSpec { v: VSource::Columns { columns: vec![3] }, w: vec![], ..ci.clone() };
        assert!(matches!(indicator_coupling(&cens, &bad, &bad.lambda.grid(1), &s), Err(Error::CouplingConfig(_))));
        // V = (1, z) = g(z): accepted; V = z claimed as g(z) = (1, z): refused
        let g_ok = IndicatorCouplingSpec {
            v: VSource::Columns { columns: vec![2, 3] },
            w: vec![3],
            case: CouplingCase::Function { g: GMap::PrependOne },
            lambda: ParamBox::new(vec![-0.5, 0.5], vec![0.5, 1.5]).unwrap(),
            ..ci.clone()
        };
        assert!(indicator_coupling(&cens, &g_ok, &g_ok.lambda.grid(4), &s).is_ok());
        let g_bad = IndicatorCouplingSpec { v: VSource::Columns { columns: vec![1, 3] }, ..g_ok.clone() };
        assert!(matches!(indicator_coupling(&cens, &g_bad, &g_bad.lambda.grid(4), &s), Err(Error::CouplingConfig(_))));
    }

    #[test]
    fn report_exports() {
        let r = coupling_norm(&ar1(), &DecaySettings::new(lags(3), 2.0, 1000, 1)).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lag,estimate,se,used_in_fit\n1,"));
        assert_eq!(text.lines().count(), 4);
        let j = r.summary_json();
        assert_eq!(j["reps"], 1000);
        assert!(j["alpha_hat"].as_f64().is_some());
    }
}
