use serde::{Deserialize, Serialize};

use super::{simulate_scalar, simulate_scalar_coupled, CoupledPaths, Model, ModelSpec, Process, Series};
use crate::error::{Error, Result};
use crate::innovations::StreamKey;

/// How the scalar model output is lifted to the vector `xi_i` a function
/// family consumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EmbeddingSpec {
    /// `xi_i = X_i`
    #[default]
    Identity,
    /// `xi_i = (X_{i-h}, X_i)`
    LagPair { h: usize },
    /// `xi_i = (X_{i,1}, X_{i,2} + shift)` from two independent copies of the model.
    BivariateCopy {
        #[serde(default)]
        shift: f64,
    },
    /// `xi_i = (T_i, C_i, 1, z_i)` with `z_i = z_bound * tanh(U_i)` for a
    /// covariate process `U`, latent outcome `T_i = beta_0 + beta_1 z_i + X_i`
    /// and censoring time `C_i = censor_mean + censor_scale * e_i`, `e_i` iid
    /// normal and independent of everything else.
    CensoredTriple {
        beta: [f64; 2],
        covariate: ModelSpec,
        z_bound: f64,
        censor_mean: f64,
        censor_scale: f64,
    },
    /// `xi_i = (Y_{i,1}, Z_{i,1}, Y_{i,2}, Z_{i,2})` with `Y_{i,j} = X_{i,j} + Z_{i,j} eta0_j`,
    /// `X_{.,j}` independent copies of the model and `Z_{.,j}` independent
    /// copies of the covariate process.
    RegressionAugment { eta0: [f64; 2], covariate: ModelSpec },
}

impl EmbeddingSpec {
    pub fn dim(&self) -> usize {
        match self {
            EmbeddingSpec::Identity => 1,
            EmbeddingSpec::LagPair { .. } | EmbeddingSpec::BivariateCopy { .. } => 2,
            EmbeddingSpec::CensoredTriple { .. } | EmbeddingSpec::RegressionAugment { .. } => 4,
        }
    }

    /// Number of component series `embed` expects.
    pub fn component_count(&self) -> usize {
        match self {
            EmbeddingSpec::Identity | EmbeddingSpec::LagPair { .. } => 1,
            EmbeddingSpec::BivariateCopy { .. } => 2,
            EmbeddingSpec::CensoredTriple { .. } => 3,
            EmbeddingSpec::RegressionAugment { .. } => 4,
        }
    }

    fn lag(&self) -> usize {
        match self {
            EmbeddingSpec::LagPair { h } => *h,
            _ => 0,
        }
    }

    fn push_row(&self, comps: &[Vec<f64>], t: usize, out: &mut Vec<f64>) {
        match self {
            EmbeddingSpec::Identity => out.push(comps[0][t]),
            EmbeddingSpec::LagPair { h } => {
                out.push(comps[0][t - h]);
                out.push(comps[0][t]);
            }
            EmbeddingSpec::CensoredTriple { .. } => {
                out.extend_from_slice(&[comps[0][t], comps[1][t], 1.0, comps[2][t]]);
            }
            EmbeddingSpec::BivariateCopy { .. } | EmbeddingSpec::RegressionAugment { .. } => {
                out.extend(comps.iter().map(|c| c[t]));
            }
        }
    }

    fn rows_from(&self, comps: &[Vec<f64>], start: usize) -> Series {
        let len = comps[0].len();
        let d = self.dim();
        let mut data = Vec::with_capacity((len - start) * d);
        for t in start..len {
            self.push_row(comps, t, &mut data);
        }
        Series::from_rows(len - start, d, data)
    }
}

/// Lifts already-simulated component series into rows of `xi`.
///
/// Components are the final series: `[X]` for identity and lag-pair,
/// `[X_1, X_2]` for the bivariate copy, `[T, C, z]` for the censored triple
/// and `[Y_1, Z_1, Y_2, Z_2]` for the regression augment. A lag pair drops the
/// first `h` periods.
pub fn embed(components: &[Vec<f64>], spec: &EmbeddingSpec) -> Result<Series> {
    if components.len() != spec.component_count() {
        return Err(Error::DimensionMismatch { expected: spec.component_count(), got: components.len() });
    }
    let n = components[0].len();
    if let Some(c) = components.iter().find(|c| c.len() != n) {
        return Err(Error::LengthMismatch(n, c.len()));
    }
    let h = spec.lag();
    if h >= n {
        return Err(Error::LagTooLarge { h, n });
    }
    Ok(spec.rows_from(components, h))
}

/// A base model together with its embedding; simulates `xi` directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    spec: EmbeddingSpec,
    base: Model,
    covariate: Option<Model>,
    censor: Option<Model>,
}

impl Embedding {
    pub fn new(base: Model, spec: EmbeddingSpec) -> Result<Self> {
        let mut covariate = None;
        let mut censor = None;
        match spec {
            EmbeddingSpec::CensoredTriple { covariate: cov, z_bound, censor_scale, beta, censor_mean } => {
                if !(z_bound > 0.0) || !(censor_scale > 0.0) {
                    return Err(Error::param("censored-triple needs z_bound > 0 and censor_scale > 0"));
                }
                if !beta.iter().all(|b| b.is_finite()) || !censor_mean.is_finite() {
                    return Err(Error::param("censored-triple coefficients must be finite"));
                }
                covariate = Some(cov.build()?);
                censor = Some(ModelSpec::new(Process::Iid { sigma: censor_scale }).build()?);
            }
            EmbeddingSpec::RegressionAugment { covariate: cov, eta0 } => {
                if !eta0.iter().all(|e| e.is_finite()) {
                    return Err(Error::param("regression-augment eta0 must be finite"));
                }
                covariate = Some(cov.build()?);
            }
            EmbeddingSpec::BivariateCopy { shift } if !shift.is_finite() => {
                return Err(Error::param("bivariate-copy shift must be finite"));
            }
            _ => {}
        }
        Ok(Embedding { spec, base, covariate, censor })
    }

    pub fn identity(base: Model) -> Self {
        Embedding { spec: EmbeddingSpec::Identity, base, covariate: None, censor: None }
    }

    pub fn spec(&self) -> &EmbeddingSpec {
        &self.spec
    }

    pub fn base(&self) -> &Model {
        &self.base
    }

    pub fn covariate(&self) -> Option<&Model> {
        self.covariate.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn raw_models(&self) -> Vec<&Model> {
        match self.spec {
            EmbeddingSpec::Identity | EmbeddingSpec::LagPair { .. } => vec![&self.base],
            EmbeddingSpec::BivariateCopy { .. } => vec![&self.base, &self.base],
            EmbeddingSpec::CensoredTriple { .. } => {
                vec![&self.base, self.covariate.as_ref().unwrap(), self.censor.as_ref().unwrap()]
            }
            EmbeddingSpec::RegressionAugment { .. } => {
                let cov = self.covariate.as_ref().unwrap();
                vec![&self.base, cov, &self.base, cov]
            }
        }
    }

    /// Maps raw model outputs to the component series `embed` expects.
    fn finalize(&self, mut raw: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        match self.spec {
            EmbeddingSpec::BivariateCopy { shift } => {
                if shift != 0.0 {
                    raw[1].iter_mut().for_each(|x| *x += shift);
                }
                raw
            }
            EmbeddingSpec::CensoredTriple { beta, z_bound, censor_mean, .. } => {
                let z: Vec<f64> = raw[1].iter().map(|u| z_bound * u.tanh()).collect();
                let t: Vec<f64> = raw[0].iter().zip(&z).map(|(x, z)| beta[0] + beta[1] * z + x).collect();
                let c: Vec<f64> = raw[2].iter().map(|e| censor_mean + e).collect();
                vec![t, c, z]
            }
            EmbeddingSpec::RegressionAugment { eta0, .. } => {
                let (x1, z1, x2, z2) = (&raw[0], &raw[1], &raw[2], &raw[3]);
                let y1 = x1.iter().zip(z1).map(|(x, z)| x + z * eta0[0]).collect();
                let y2 = x2.iter().zip(z2).map(|(x, z)| x + z * eta0[1]).collect();
                vec![y1, raw[1].clone(), y2, raw[3].clone()]
            }
            _ => raw,
        }
    }

    /// Independence group of every output column: columns in different
    /// groups are built from independent innovation streams (a constant
    /// column gets a group of its own).
    pub fn column_groups(&self) -> Vec<usize> {
        match self.spec {
            EmbeddingSpec::Identity => vec![0],
            EmbeddingSpec::LagPair { .. } => vec![0, 0],
            EmbeddingSpec::BivariateCopy { .. } => vec![0, 1],
            EmbeddingSpec::CensoredTriple { .. } => vec![0, 1, 2, 0],
            EmbeddingSpec::RegressionAugment { .. } => vec![0, 0, 1, 1],
        }
    }

    /// Stationary `xi_1..xi_n`. Lag pairs reach into the burn-in for
    /// `X_{1-h}..X_0`.
    pub fn simulate(&self, key: StreamKey, n: usize, burn_in: usize) -> Result<Series> {
        if n == 0 {
            return Err(Error::param("path length n must be at least 1"));
        }
        let hist = self.spec.lag();
        let raw = self
            .raw_models()
            .into_iter()
            .enumerate()
            .map(|(c, m)| simulate_scalar(m, key.component(c as u64), n, burn_in, hist))
            .collect();
        Ok(self.spec.rows_from(&self.finalize(raw), hist))
    }

    /// Coupled `xi_1..xi_n` and `xi_1'..xi_n'`; each component is coupled on
    /// its own stream and both halves pass through the same lift.
    pub fn simulate_coupled(&self, master_seed: u64, replication_id: u64, n: usize, burn_in: usize) -> Result<CoupledPaths> {
        if n == 0 {
            return Err(Error::param("path length n must be at least 1"));
        }
        let key = StreamKey::replication(master_seed, replication_id);
        let hist = self.spec.lag() + 1;
        let (orig, pert): (Vec<_>, Vec<_>) = self
            .raw_models()
            .into_iter()
            .enumerate()
            .map(|(c, m)| simulate_scalar_coupled(m, key.component(c as u64), n, burn_in, hist))
            .unzip();
        let orig = self.spec.rows_from(&self.finalize(orig), hist - 1);
        let pert = self.spec.rows_from(&self.finalize(pert), hist - 1);
        let d = self.dim();
        let split = |s: Series| {
            let pre = s.row(0).to_vec();
            (pre, Series::from_rows(n, d, s.as_slice()[d..].to_vec()))
        };
        let (presample_original, original) = split(orig);
        let (presample_perturbed, perturbed) = split(pert);
        Ok(CoupledPaths { original, perturbed, presample_original, presample_perturbed, replication_id })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{simulate_coupled, simulate_path};

    #[test]
    fn lag_pair_rows() {
        let s = embed(&[vec![1.0, 2.0, 3.0]], &EmbeddingSpec::LagPair { h: 1 }).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.row(0), &[1.0, 2.0]);
        assert_eq!(s.row(1), &[2.0, 3.0]);
        let s = embed(&[vec![4.0, 5.0]], &EmbeddingSpec::LagPair { h: 0 }).unwrap();
        assert_eq!(s.row(1), &[5.0, 5.0]);
        assert!(matches!(
            embed(&[vec![1.0, 2.0]], &EmbeddingSpec::LagPair { h: 2 }),
            Err(Error::LagTooLarge { h: 2, n: 2 })
        ));
    }

    #[test]
    fn censored_triple_concatenates() {
        let cov = ModelSpec::iid_normal();
        let spec = EmbeddingSpec::CensoredTriple {
            beta: [0.0, 1.0],
            covariate: cov,
            z_bound: 1.0,
            censor_mean: 0.0,
            censor_scale: 1.0,
        };
        let s = embed(&[vec![0.5, 0.6], vec![1.5, 1.6], vec![-0.2, 0.3]], &spec).unwrap();
        assert_eq!(s.row(0), &[0.5, 1.5, 1.0, -0.2]);
        assert_eq!(s.row(1), &[0.6, 1.6, 1.0, 0.3]);
        assert!(embed(&[vec![0.5]], &spec).is_err());
    }

    #[test]
    fn identity_embedding_matches_path() {
        let model = ModelSpec::ar1(0.3, 1.0).build().unwrap();
        let emb = Embedding::identity(model);
        let key = StreamKey::new(3, 1);
        assert_eq!(emb.simulate(key, 100, 50).unwrap(), simulate_path(&model, key, 100, 50).unwrap());
        let cp = emb.simulate_coupled(3, 1, 20, 50).unwrap();
        assert_eq!(cp, simulate_coupled(&model, 3, 1, 20, 50).unwrap());
    }

    #[test]
    fn lag_pair_simulation_uses_burn_in_history() {
        let model = ModelSpec::ar1(0.5, 1.0).build().unwrap();
        let emb = Embedding::new(model, EmbeddingSpec::LagPair { h: 2 }).unwrap();
        let key = StreamKey::new(5, 0);
        let xi = emb.simulate(key, 30, 100).unwrap();
        let path = simulate_path(&model, key, 30, 100).unwrap();
        for i in 2..30 {
            assert_eq!(xi.row(i), &[path.row(i - 2)[0], path.row(i)[0]]);
        }
        let cp = emb.simulate_coupled(5, 0, 30, 100).unwrap();
        assert_eq!(cp.original, xi);
        // coupled lag pairs coincide from period h + 1 on under iid inputs
        let iid = Embedding::new(ModelSpec::iid_normal().build().unwrap(), EmbeddingSpec::LagPair { h: 2 }).unwrap();
        let cp = iid.simulate_coupled(5, 0, 10, 100).unwrap();
        assert_ne!(cp.original.row(1), cp.perturbed.row(1));
        for i in 2..10 {
            assert_eq!(cp.original.row(i), cp.perturbed.row(i));
        }
    }

    #[test]
    fn censored_triple_simulation_shape() {
        let base = ModelSpec::ar1(0.5, 1.0).build().unwrap();
        let spec = EmbeddingSpec::CensoredTriple {
            beta: [0.5, 1.0],
            covariate: ModelSpec::ar1(0.3, 1.0),
            z_bound: 1.5,
            censor_mean: 1.0,
            censor_scale: 1.0,
        };
        let emb = Embedding::new(base, spec).unwrap();
        let xi = emb.simulate(StreamKey::new(1, 1), 500, 100).unwrap();
        assert_eq!(xi.dim(), 4);
        assert!(xi.rows().all(|r| r[2] == 1.0 && r[3].abs() <= 1.5));
    }

    #[test]
    fn regression_augment_recovers_latent_errors() {
        let base = ModelSpec::ar1(0.5, 1.0).build().unwrap();
        let spec = EmbeddingSpec::RegressionAugment { eta0: [1.0, -0.5], covariate: ModelSpec::iid_normal() };
        let emb = Embedding::new(base, spec).unwrap();
        let key = StreamKey::new(2, 7);
        let xi = emb.simulate(key, 50, 100).unwrap();
        let x1 = simulate_path(&base, key, 50, 100).unwrap();
        for (i, row) in xi.rows().enumerate() {
            assert!((row[0] - row[1] * 1.0 - x1.row(i)[0]).abs() < 1e-12);
        }
    }
}
