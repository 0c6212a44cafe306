use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::{Embedding, EmbeddingSpec, Series, DEFAULT_BURN_IN};
use crate::error::{Error, Result};
use crate::families::{FamilyKind, FunctionFamily};
use crate::innovations::StreamKey;
use crate::numerics::{bivariate_normal_cdf, std_normal_cdf, std_normal_pdf, std_normal_quantile};

pub const MIN_ORACLE_LENGTH: usize = 100_000;
const ORACLE_STREAM: u64 = 0x0AC1E;

/// How `E f_theta(xi_0)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum StationaryLaw {
    /// Centered Gaussian marginals with known sd and lag correlation.
    Gaussian { sd: f64, lag_correlation: f64 },
    /// Average over one long stationary path.
    LongPath { length: usize },
}

/// `theta -> E f_theta(xi_0)` for one embedded model and family, cached per
/// `theta`. Thread-safe; the long path is simulated at most once.
#[derive(Debug)]
pub struct MeanOracle {
    embedding: Embedding,
    family: FunctionFamily,
    master_seed: u64,
    length: usize,
    law: StationaryLaw,
    path: OnceLock<Series>,
    cache: Mutex<HashMap<Vec<u64>, Vec<f64>>>,
}

impl MeanOracle {
    pub fn new(embedding: Embedding, family: FunctionFamily, master_seed: u64, length: usize) -> Result<Self> {
        if length < MIN_ORACLE_LENGTH {
            return Err(Error::param(format!("oracle length must be at least {MIN_ORACLE_LENGTH}, got {length}")));
        }
        if embedding.dim() != family.input_dim() {
            return Err(Error::DimensionMismatch { expected: family.input_dim(), got: embedding.dim() });
        }
        let law = match closed_form_law(&embedding, &family) {
            Some(law) => law,
            None => StationaryLaw::LongPath { length },
        };
        Ok(MeanOracle {
            embedding,
            family,
            master_seed,
            length,
            law,
            path: OnceLock::new(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn law(&self) -> StationaryLaw {
        self.law
    }

    pub fn family(&self) -> &FunctionFamily {
        &self.family
    }

    fn path(&self) -> &Series {
        self.path.get_or_init(|| {
            self.embedding
                .simulate(StreamKey::auxiliary(self.master_seed, ORACLE_STREAM), self.length, DEFAULT_BURN_IN)
                .expect("oracle length is positive")
        })
    }

    /// `E f_theta(xi_0)` for every output coordinate.
    pub fn means(&self, theta: &[f64]) -> Vec<f64> {
        let key: Vec<u64> = theta.iter().map(|t| t.to_bits()).collect();
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let value = match self.law {
            StationaryLaw::Gaussian { sd, lag_correlation } => {
                vec![gaussian_mean(&self.family, &self.embedding, theta, sd, lag_correlation)]
            }
            StationaryLaw::LongPath { .. } => {
                let path = self.path();
                let n = path.len() as f64;
                (0..self.family.output_dim())
                    .map(|j| path.rows().map(|x| self.family.value(theta, x, j)).sum::<f64>() / n)
                    .collect()
            }
        };
        self.cache.lock().unwrap().insert(key, value.clone());
        value
    }

    /// First coordinate of [`MeanOracle::means`].
    pub fn mean(&self, theta: &[f64]) -> f64 {
        self.means(theta)[0]
    }
}

fn closed_form_law(embedding: &Embedding, family: &FunctionFamily) -> Option<StationaryLaw> {
    let base = embedding.base();
    let sd = base.gaussian_sd()?;
    let ok = match (family.kind, embedding.spec()) {
        (FamilyKind::Indicator | FamilyKind::Sign | FamilyKind::Huber { .. }, EmbeddingSpec::Identity) => true,
        (FamilyKind::Quantilogram { .. }, EmbeddingSpec::LagPair { .. }) => true,
        (FamilyKind::DominancePair, EmbeddingSpec::BivariateCopy { .. }) => true,
        (FamilyKind::DominanceResidual, EmbeddingSpec::RegressionAugment { .. }) => {
            embedding.covariate().and_then(|c| c.gaussian_sd()).is_some()
        }
        _ => false,
    };
    if !ok {
        return None;
    }
    let lag_correlation = match embedding.spec() {
        EmbeddingSpec::LagPair { h } => base.gaussian_lag_correlation(*h)?,
        _ => 0.0,
    };
    Some(StationaryLaw::Gaussian { sd, lag_correlation })
}

fn gaussian_mean(family: &FunctionFamily, embedding: &Embedding, theta: &[f64], sd: f64, corr: f64) -> f64 {
    let t = theta[0];
    let cdf = |x: f64, s: f64| std_normal_cdf(x / s);
    match (family.kind, embedding.spec()) {
        (FamilyKind::Indicator, _) => cdf(t, sd),
        (FamilyKind::Sign, _) => 1.0 - 2.0 * cdf(t, sd),
        (FamilyKind::Huber { delta }, _) => {
            // Y = X - t, X ~ N(0, sd^2): E clamp(Y, -delta, delta)
            let a = (t - delta) / sd;
            let b = (t + delta) / sd;
            let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
            delta * (1.0 - pb) - delta * pa + sd * (std_normal_pdf(a) - std_normal_pdf(b)) - t * (pb - pa)
        }
        (FamilyKind::Quantilogram { alpha }, _) => {
            let f = cdf(t, sd);
            alpha * alpha - 2.0 * alpha * f + bivariate_normal_cdf(t / sd, t / sd, corr)
        }
        (FamilyKind::DominancePair, EmbeddingSpec::BivariateCopy { shift }) => cdf(t, sd) - cdf(t - shift, sd),
        (FamilyKind::DominanceResidual, EmbeddingSpec::RegressionAugment { eta0, .. }) => {
            let sz = embedding.covariate().and_then(|c| c.gaussian_sd()).unwrap_or(0.0);
            let s = |j: usize| (sd * sd + (eta0[j] - theta[1 + j]).powi(2) * sz * sz).sqrt();
            cdf(t, s(0)) - cdf(t, s(1))
        }
        _ => unreachable!("closed_form_law admits only the cases above"),
    }
}

/// Stationary `alpha`-quantile of the base model: exact for Gaussian laws,
/// otherwise the type-1 empirical quantile of one long path.
pub fn stationary_quantile(embedding: &Embedding, alpha: f64, master_seed: u64, length: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if let Some(sd) = embedding.base().gaussian_sd() {
        return Ok(sd * std_normal_quantile(alpha));
    }
    let path = Embedding::identity(*embedding.base()).simulate(
        StreamKey::auxiliary(master_seed, ORACLE_STREAM + 1),
        length.max(1),
        DEFAULT_BURN_IN,
    )?;
    let mut v = path.as_slice().to_vec();
    v.sort_by(f64::total_cmp);
    Ok(crate::stats::sorted_quantile(&v, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::ParamBox;
    use crate::models::ModelSpec;

    fn family(kind: FamilyKind) -> FunctionFamily {
        FunctionFamily::new(kind, ParamBox::interval(-3.0, 3.0).unwrap()).unwrap()
    }

    #[test]
    fn ar1_indicator_means() {
        let emb = Embedding::identity(ModelSpec::ar1(0.5, 1.0).build().unwrap());
        let o = MeanOracle::new(emb, family(FamilyKind::Indicator), 1, MIN_ORACLE_LENGTH).unwrap();
        assert!(matches!(o.law(), StationaryLaw::Gaussian { .. }));
        assert!((o.mean(&[0.0]) - 0.5).abs() < 1e-15);
        let expected = std_normal_cdf(1.0 / (4.0f64 / 3.0).sqrt());
        assert!((o.mean(&[1.0]) - expected).abs() < 1e-12);
        assert!((o.mean(&[1.0]) - 0.806762).abs() < 1e-6);
    }

    #[test]
    fn quantilogram_null_is_zero() {
        let emb = Embedding::new(ModelSpec::iid_normal().build().unwrap(), EmbeddingSpec::LagPair { h: 1 }).unwrap();
        let o = MeanOracle::new(emb, family(FamilyKind::Quantilogram { alpha: 0.1 }), 1, MIN_ORACLE_LENGTH).unwrap();
        assert!(o.mean(&[std_normal_quantile(0.1)]).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_match_long_path() {
        let ar = ModelSpec::ar1(0.5, 1.0).build().unwrap();
        let cases = [
            (Embedding::identity(ar), FamilyKind::Huber { delta: 0.7 }, vec![0.4]),
            (Embedding::identity(ar), FamilyKind::Sign, vec![-0.3]),
            (Embedding::new(ar, EmbeddingSpec::LagPair { h: 1 }).unwrap(), FamilyKind::Quantilogram { alpha: 0.3 }, vec![-0.2]),
            (
                Embedding::new(ar, EmbeddingSpec::BivariateCopy { shift: 0.5 }).unwrap(),
                FamilyKind::DominancePair,
                vec![0.1],
            ),
        ];
        for (emb, kind, theta) in cases {
            let fam = FunctionFamily::new(kind, ParamBox::singleton(theta.clone()).unwrap()).unwrap();
            let exact = MeanOracle::new(emb.clone(), fam.clone(), 3, MIN_ORACLE_LENGTH).unwrap().mean(&theta);
            let path = emb.simulate(StreamKey::new(9, 0), 400_000, DEFAULT_BURN_IN).unwrap();
            let vals: Vec<f64> = path.rows().map(|x| fam.value(&theta, x, 0)).collect();
            let (m, se) = crate::families::mean_and_se(&vals, false);
            assert!((m - exact).abs() < 4.0 * se + 1e-9, "{kind:?}: {m} vs {exact} (se {se})");
        }
    }

    #[test]
    fn residual_closed_form() {
        let base = ModelSpec::iid_normal().build().unwrap();
        let emb = Embedding::new(
            base,
            EmbeddingSpec::RegressionAugment { eta0: [0.5, 0.0], covariate: ModelSpec::iid_normal() },
        )
        .unwrap();
        let fam = FunctionFamily::new(FamilyKind::DominanceResidual, ParamBox::singleton(vec![0.3, 0.0, 0.0]).unwrap()).unwrap();
        let o = MeanOracle::new(emb.clone(), fam.clone(), 3, MIN_ORACLE_LENGTH).unwrap();
        let theta = [0.3, 0.0, 0.0];
        let exact = o.mean(&theta);
        let path = emb.simulate(StreamKey::new(2, 0), 400_000, 100).unwrap();
        let m = path.rows().map(|x| fam.value(&theta, x, 0)).sum::<f64>() / 400_000.0;
        assert!((m - exact).abs() < 0.005, "{m} vs {exact}");
    }

    #[test]
    fn non_gaussian_uses_cached_long_path() {
        let emb = Embedding::identity(ModelSpec::arch1(0.5, 0.4).build().unwrap());
        let o = MeanOracle::new(emb.clone(), family(FamilyKind::Indicator), 1, MIN_ORACLE_LENGTH).unwrap();
        assert_eq!(o.law(), StationaryLaw::LongPath { length: MIN_ORACLE_LENGTH });
        let a = o.mean(&[0.0]);
        assert_eq!(a, o.mean(&[0.0]));
        assert!((a - 0.5).abs() < 0.01);
        assert!(MeanOracle::new(emb, family(FamilyKind::Indicator), 1, 10).is_err());
    }

    #[test]
    fn quantiles() {
        let emb = Embedding::identity(ModelSpec::ar1(0.5, 1.0).build().unwrap());
        let q = stationary_quantile(&emb, 0.1, 0, 0).unwrap();
        assert!((q - (4.0f64 / 3.0).sqrt() * std_normal_quantile(0.1)).abs() < 1e-12);
        let arch = Embedding::identity(ModelSpec::arch1(0.5, 0.4).build().unwrap());
        assert!(stationary_quantile(&arch, 0.5, 0, 200_000).unwrap().abs() < 0.02);
    }
}
