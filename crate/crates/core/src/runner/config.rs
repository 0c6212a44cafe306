use serde::{Deserialize, Serialize};

use crate::empproc::{ModulusSettings, ScalingSettings, DEFAULT_PILOT_REPS};
use crate::error::{Error, Result};
use crate::estimators::MVariant;
use crate::families::{family_bracketing_integral, FamilyKind, FunctionFamily, MarginalInfo};
use crate::gmc::{DecaySettings, IndicatorCouplingSpec};
use crate::models::{Embedding, EmbeddingSpec, ModelSpec, DEFAULT_BURN_IN, MIN_ORACLE_LENGTH};

pub const DEFAULT_GRID_POINTS: usize = 64;
pub const DEFAULT_RHO_REPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    GmcDecay,
    FamilyDecay,
    BracketDecay,
    IndicatorDecay,
    Modulus,
    Probe,
    MomentScaling,
    Quantilogram,
    MEstimate,
    Dominance,
    BracketingIntegral,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 12] = [
        ExperimentKind::Simulate,
        ExperimentKind::GmcDecay,
        ExperimentKind::FamilyDecay,
        ExperimentKind::BracketDecay,
        ExperimentKind::IndicatorDecay,
        ExperimentKind::Modulus,
        ExperimentKind::Probe,
        ExperimentKind::MomentScaling,
        ExperimentKind::Quantilogram,
        ExperimentKind::MEstimate,
        ExperimentKind::Dominance,
        ExperimentKind::BracketingIntegral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::GmcDecay => "gmc-decay",
            ExperimentKind::FamilyDecay => "family-decay",
            ExperimentKind::BracketDecay => "bracket-decay",
            ExperimentKind::IndicatorDecay => "indicator-decay",
            ExperimentKind::Modulus => "modulus",
            ExperimentKind::Probe => "probe",
            ExperimentKind::MomentScaling => "moment-scaling",
            ExperimentKind::Quantilogram => "quantilogram",
            ExperimentKind::MEstimate => "m-estimate",
            ExperimentKind::Dominance => "dominance",
            ExperimentKind::BracketingIntegral => "bracketing-integral",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// One experiment. Which optional fields are required depends on `kind`;
/// see `docs/formats.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    pub model: ModelSpec,
    #[serde(default)]
    pub embedding: EmbeddingSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FunctionFamily>,
    /// Points per coordinate of the theta (or lambda) grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<Vec<usize>>,
    /// Norm order for decay experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<IndicatorCouplingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<usize>>,
    #[serde(default, rename = "Q", skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_targets: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<MVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    /// A config of `kind` with every optional field unset.
    pub fn new(kind: ExperimentKind, model: ModelSpec, master_seed: u64) -> Self {
        ExperimentConfig {
            kind,
            master_seed,
            reps: None,
            model,
            embedding: EmbeddingSpec::Identity,
            family: None,
            grid_points: None,
            lags: None,
            p: None,
            cover_delta: None,
            coupling: None,
            deltas: None,
            n: None,
            ns: None,
            q: None,
            gamma: None,
            eta: None,
            rho_targets: None,
            base_theta: None,
            rho_reps: None,
            alpha: None,
            h: None,
            estimator: None,
            burn_in: None,
            pilot_reps: None,
            oracle_length: None,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(DEFAULT_BURN_IN)
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points.unwrap_or(DEFAULT_GRID_POINTS)
    }

    pub fn oracle_length(&self) -> usize {
        self.oracle_length.unwrap_or(MIN_ORACLE_LENGTH)
    }

    pub(crate) fn embedding_model(&self) -> Result<Embedding> {
        Embedding::new(self.model.build()?, self.embedding)
    }

    pub(crate) fn decay_settings(&self) -> DecaySettings {
        DecaySettings {
            lags: self.lags.clone().unwrap_or_default(),
            p: self.p.unwrap_or(2.0),
            reps: self.reps.unwrap_or(0),
            master_seed: self.master_seed,
            burn_in: self.burn_in(),
        }
    }

    pub(crate) fn modulus_settings(&self) -> ModulusSettings {
        ModulusSettings {
            deltas: self.deltas.clone().unwrap_or_default(),
            n: self.n.unwrap_or(0),
            q: self.q.unwrap_or(0),
            gamma: self.gamma.unwrap_or(0.0),
            eta: self.eta.unwrap_or(0.0),
            reps: self.reps.unwrap_or(0),
            master_seed: self.master_seed,
            burn_in: self.burn_in(),
            pilot_reps: self.pilot_reps.unwrap_or(DEFAULT_PILOT_REPS),
        }
    }

    pub(crate) fn scaling_settings(&self) -> ScalingSettings {
        ScalingSettings {
            ns: self.ns.clone().unwrap_or_default(),
            q: self.q.unwrap_or(0),
            gamma: self.gamma.unwrap_or(0.0),
            reps: self.reps.unwrap_or(0),
            master_seed: self.master_seed,
            burn_in: self.burn_in(),
        }
    }

    /// Every violated precondition, checked before any simulation starts.
    pub fn problems(&self) -> Vec<String> {
        use ExperimentKind as K;
        let mut out = Vec::new();
        let mut need = |present: bool, field: &str| {
            if !present {
                out.push(format!("{} needs `{field}`", self.kind.name()));
            }
        };
        let k = self.kind;
        let decay = matches!(k, K::GmcDecay | K::FamilyDecay | K::BracketDecay | K::IndicatorDecay);
        let uses_family = matches!(
            k,
            K::FamilyDecay | K::BracketDecay | K::Modulus | K::Probe | K::MomentScaling | K::BracketingIntegral | K::Dominance
        );
        need(k == K::BracketingIntegral || self.reps.is_some(), "reps");
        need(!uses_family || self.family.is_some(), "family");
        need(!decay || self.lags.is_some(), "lags");
        need(k != K::BracketDecay || self.cover_delta.is_some(), "cover_delta");
        need(k != K::IndicatorDecay || self.coupling.is_some(), "coupling");
        need(!matches!(k, K::Modulus | K::Probe) || self.deltas.is_some(), "deltas");
        need(!matches!(k, K::Modulus | K::Probe | K::MomentScaling | K::BracketingIntegral) || self.gamma.is_some(), "gamma");
        need(!matches!(k, K::Modulus | K::Probe | K::MomentScaling | K::BracketingIntegral) || self.q.is_some(), "Q");
        need(!matches!(k, K::Modulus | K::Probe) || self.eta.is_some(), "eta");
        need(
            !matches!(k, K::Simulate | K::Modulus | K::Quantilogram | K::MEstimate | K::Dominance) || self.n.is_some(),
            "n",
        );
        need(!matches!(k, K::Probe | K::MomentScaling) || self.ns.is_some(), "ns");
        need(k != K::MomentScaling || self.rho_targets.is_some(), "rho_targets");
        need(k != K::MomentScaling || self.base_theta.is_some(), "base_theta");
        need(k != K::Quantilogram || self.alpha.is_some(), "alpha");
        need(k != K::Quantilogram || self.h.is_some(), "h");
        need(k != K::MEstimate || self.estimator.is_some(), "estimator");

        if self.reps == Some(0) {
            out.push("reps must be at least 1".into());
        }
        if self.grid_points == Some(0) {
            out.push("grid_points must be at least 1".into());
        }
        if let Some(n) = self.n {
            if n == 0 {
                out.push("n must be at least 1".into());
            }
        }
        if self.oracle_length() < MIN_ORACLE_LENGTH {
            out.push(format!("oracle_length must be at least {MIN_ORACLE_LENGTH}, got {}", self.oracle_length()));
        }
        if let Some(r) = self.rho_reps {
            if r < 100 {
                out.push(format!("rho_reps must be at least 100, got {r}"));
            }
        }

        let embedding = match self.embedding_model() {
            Ok(e) => Some(e),
            Err(e) => {
                out.push(e.to_string());
                None
            }
        };
        if let Some(family) = &self.family {
            if let Err(e) = family.validate() {
                out.push(e.to_string());
            }
            if family.input_dim() != self.embedding.dim() {
                out.push(format!(
                    "family takes {}-dimensional input, embedding produces {}",
                    family.input_dim(),
                    self.embedding.dim()
                ));
            }
        }

        match k {
            K::GmcDecay | K::FamilyDecay | K::BracketDecay | K::IndicatorDecay => {
                out.extend(self.decay_settings().problems());
            }
            K::Modulus | K::Probe => {
                let mut problems = self.modulus_settings().problems();
                if k == K::Probe {
                    problems.retain(|p| !p.starts_with("n must"));
                }
                out.extend(problems);
            }
            K::MomentScaling => out.extend(self.scaling_settings().problems()),
            _ => {}
        }
        if let (Some(ns), K::Probe) = (&self.ns, k) {
            if ns.is_empty() || ns.contains(&0) {
                out.push("n grid must be nonempty with every n >= 1".into());
            }
        }
        if let Some(d) = self.cover_delta {
            if !(d > 0.0) || !d.is_finite() {
                out.push(format!("cover_delta must be positive, got {d}"));
            }
        }
        if let Some(targets) = &self.rho_targets {
            if targets.is_empty() || targets.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
                out.push("rho_targets must be nonempty and positive".into());
            }
        }
        if let (Some(base), Some(family)) = (&self.base_theta, &self.family) {
            if !family.theta.contains(base) {
                out.push(format!("base_theta {base:?} lies outside Theta"));
            }
        }
        if k == K::Quantilogram {
            if let Some(a) = self.alpha {
                if !(a > 0.0 && a < 1.0) {
                    out.push(format!("alpha must lie in (0, 1), got {a}"));
                }
            }
            if self.h == Some(0) {
                out.push("lag h must be at least 1".into());
            }
            if let (Some(h), Some(n)) = (self.h, self.n) {
                if n <= h {
                    out.push(format!("lag {h} must be smaller than the series length {n}"));
                }
            }
            if self.embedding != EmbeddingSpec::Identity {
                out.push("quantilogram runs on the scalar series; use the identity embedding".into());
            }
        }
        if k == K::MEstimate {
            if let Some(MVariant::Huber { delta }) = self.estimator {
                if !(delta > 0.0) || !delta.is_finite() {
                    out.push(format!("huber delta must be positive, got {delta}"));
                }
            }
            if self.embedding != EmbeddingSpec::Identity {
                out.push("m-estimate runs on the scalar series; use the identity embedding".into());
            }
        }
        if k == K::Dominance {
            if let Some(f) = &self.family {
                if f.kind != FamilyKind::DominancePair {
                    out.push("dominance needs the dominance-pair family".into());
                }
            }
            if !matches!(self.embedding, EmbeddingSpec::BivariateCopy { .. }) {
                out.push("dominance needs the bivariate-copy embedding".into());
            }
        }

        // integral gate last: it needs a valid family and model
        if out.is_empty() && matches!(k, K::Modulus | K::Probe | K::BracketingIntegral) {
            if let (Some(family), Some(emb)) = (&self.family, &embedding) {
                let gate = MarginalInfo::from_embedding(emb, self.master_seed)
                    .and_then(|info| family_bracketing_integral(family, &info, self.gamma.unwrap(), self.q.unwrap()));
                if let Err(e) = gate {
                    out.push(e.to_string());
                }
            }
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::ParamBox;

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::new(ExperimentKind::Modulus, ModelSpec::ar1(0.5, 1.0), 7);
        c.family = Some(FunctionFamily::new(FamilyKind::Quantilogram { alpha: 0.1 }, ParamBox::interval(-2.0, -1.0).unwrap()).unwrap());
        c.embedding = EmbeddingSpec::LagPair { h: 1 };
        c.deltas = Some(vec![0.05, 0.4]);
        c.q = Some(4);
        c.gamma = Some(1.0);
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"kind":"simulate","master_seed":1,"model":{"process":{"type":"iid","sigma":1.0}},"bogus":3}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }

    #[test]
    fn problems_are_aggregated() {
        let mut c = ExperimentConfig::new(ExperimentKind::Modulus, ModelSpec::ar1(1.5, 1.0), 7);
        c.reps = Some(0);
        let p = c.problems();
        assert!(p.len() >= 5, "{p:?}");
        assert!(p.iter().any(|m| m.contains("family")));
        assert!(p.iter().any(|m| m.contains("reps must")));
    }

    #[test]
    fn names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(ExperimentKind::from_name(k.name()), Some(k));
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
    }
}
