use std::path::Path;

use equiproc::families::{FamilyKind, FunctionFamily, ParamBox};
use equiproc::gmc::{coupling_norm, family_coupling_norm, CouplingCase, DecaySettings, IndicatorCouplingSpec, Inequality, VSource};
use equiproc::estimators::MVariant;
use equiproc::models::{Embedding, EmbeddingSpec, ModelSpec};
use equiproc::runner::{run, summarize, ExperimentConfig, ExperimentKind as K, RunManifest, Summary, SUMMARY_FILE};
use proptest::prelude::*;

fn quant_family(lo: f64, hi: f64) -> FunctionFamily {
    FunctionFamily::new(FamilyKind::Quantilogram { alpha: 0.1 }, ParamBox::interval(lo, hi).unwrap()).unwrap()
}

fn dominance_family() -> FunctionFamily {
    FunctionFamily::new(FamilyKind::DominancePair, ParamBox::interval(-2.0, 2.0).unwrap()).unwrap()
}

/// A small valid config for every kind.
fn config(kind: K) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind, ModelSpec::ar1(0.5, 1.0), 5);
    let pair = EmbeddingSpec::LagPair { h: 1 };
    match kind {
        K::Simulate => {
            c.reps = Some(3);
            c.n = Some(20);
        }
        K::GmcDecay => {
            c.reps = Some(2000);
            c.lags = Some((1..=8).collect());
        }
        K::FamilyDecay | K::BracketDecay => {
            c.reps = Some(2000);
            c.lags = Some((1..=6).collect());
            c.embedding = pair;
            c.family = Some(quant_family(-2.0, -1.0));
            c.grid_points = Some(16);
            if kind == K::BracketDecay {
                c.cover_delta = Some(0.5);
            }
        }
        K::IndicatorDecay => {
            c.reps = Some(2000);
            c.lags = Some((1..=6).collect());
            c.coupling = Some(IndicatorCouplingSpec {
                u: 0,
                v: VSource::Constant { value: vec![1.0] },
                w: vec![],
                case: CouplingCase::Singleton,
                inequality: Inequality::Strict,
                lambda: ParamBox::interval(-1.0, 1.0).unwrap(),
            });
            c.grid_points = Some(16);
        }
        K::Modulus | K::Probe => {
            c.reps = Some(40);
            c.embedding = pair;
            c.family = Some(quant_family(-2.0, -1.0));
            c.grid_points = Some(16);
            c.deltas = Some(vec![0.1, 0.3]);
            c.q = Some(4);
            c.gamma = Some(1.0);
            c.eta = Some(0.5);
            c.pilot_reps = Some(5000);
            if kind == K::Modulus {
                c.n = Some(100);
            } else {
                c.ns = Some(vec![50, 100]);
            }
        }
        K::MomentScaling => {
            c.reps = Some(200);
            c.embedding = pair;
            c.family = Some(quant_family(-3.0, 3.0));
            c.ns = Some(vec![50, 100]);
            c.q = Some(2);
            c.gamma = Some(1.0);
            c.rho_targets = Some(vec![0.1, 0.3]);
            c.base_theta = Some(vec![-1.478]);
            c.rho_reps = Some(20_000);
        }
        K::Quantilogram => {
            c.reps = Some(50);
            c.alpha = Some(0.1);
            c.h = Some(1);
            c.n = Some(200);
        }
        K::MEstimate => {
            c.reps = Some(50);
            c.n = Some(200);
            c.estimator = Some(MVariant::Huber { delta: 1.345 });
        }
        K::Dominance => {
            c.reps = Some(30);
            c.n = Some(200);
            c.embedding = EmbeddingSpec::BivariateCopy { shift: 0.0 };
            c.family = Some(dominance_family());
            c.grid_points = Some(21);
        }
        K::BracketingIntegral => {
            c.embedding = pair;
            c.family = Some(quant_family(-2.0, -1.0));
            c.q = Some(4);
            c.gamma = Some(1.0);
            c.deltas = Some(vec![0.2, 0.5]);
        }
    }
    c
}

fn expected_files(kind: K) -> &'static [&'static str] {
    match kind {
        K::Simulate => &["paths.csv"],
        K::GmcDecay | K::FamilyDecay | K::IndicatorDecay => &["decay.csv", "decay.json"],
        K::BracketDecay => &["decay.csv", "decay.json", "cover.csv"],
        K::Modulus => &["modulus.csv"],
        K::Probe => &["probe.csv"],
        K::MomentScaling => &["scaling.csv"],
        K::Quantilogram => &["quantilogram.csv"],
        K::MEstimate => &["m_estimate.csv"],
        K::Dominance => &["dominance.csv", "dominance_rep0.csv"],
        K::BracketingIntegral => &["integral.json", "bracketing_numbers.csv"],
    }
}

fn load_summary(dir: &Path) -> Summary {
    serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_FILE)).unwrap()).unwrap()
}

#[test]
fn every_kind_runs_and_summarizes() {
    let root = tempfile::tempdir().unwrap();
    for kind in K::ALL {
        let c = config(kind);
        assert!(c.problems().is_empty(), "{}: {:?}", kind.name(), c.problems());
        let dir = root.path().join(kind.name());
        let manifest = run(&c, &dir).unwrap_or_else(|e| panic!("{}: {e}", kind.name()));
        for f in expected_files(kind).iter().chain(&["summary.json", "config.json"]) {
            assert!(manifest.output(f).is_some(), "{} lacks {f}", kind.name());
        }
        assert_eq!(RunManifest::load(&dir).unwrap().outputs, manifest.outputs);
        let s = load_summary(&dir);
        assert_eq!(s.kind, kind);
        summarize(&dir).unwrap_or_else(|e| panic!("{}: {e}", kind.name()));

        let written = std::fs::read_to_string(dir.join("config.json")).unwrap();
        assert_eq!(ExperimentConfig::from_json(&written).unwrap(), c);
    }
}

#[test]
fn same_seed_same_bytes_different_seed_different_bytes() {
    let root = tempfile::tempdir().unwrap();
    let c = config(K::Quantilogram);
    let (a, b, d) = (root.path().join("a"), root.path().join("b"), root.path().join("d"));
    let ma = run(&c, &a).unwrap();
    assert_eq!(ma.outputs, run(&c, &b).unwrap().outputs);
    let mut other = c.clone();
    other.master_seed += 1;
    let md = run(&other, &d).unwrap();
    assert_ne!(ma.output("quantilogram.csv").unwrap().sha256, md.output("quantilogram.csv").unwrap().sha256);
}

#[test]
fn divergent_integral_is_refused_before_running() {
    let root = tempfile::tempdir().unwrap();
    let mut c = config(K::Modulus);
    c.q = Some(2);
    let err = run(&c, root.path()).unwrap_err();
    assert!(err.to_string().contains("diverges"), "{err}");
    assert!(std::fs::read_dir(root.path()).unwrap().next().is_none());
}

#[test]
fn decay_rate_across_moment_orders() {
    // AR(1): the coupling distance is phi^n times the initial gap, in every norm
    let emb = Embedding::identity(ModelSpec::ar1(0.6, 1.0).build().unwrap());
    let lags: Vec<usize> = (1..=10).collect();
    let a1 = coupling_norm(&emb, &DecaySettings::new(lags.clone(), 1.0, 5000, 2)).unwrap().alpha_hat().unwrap();
    let a4 = coupling_norm(&emb, &DecaySettings::new(lags.clone(), 4.0, 5000, 2)).unwrap().alpha_hat().unwrap();
    assert!((a1 - 0.6).abs() < 1e-9 && (a4 - 0.6).abs() < 1e-9, "{a1} {a4}");

    // indicator differences take values in {-1, 0, 1}, so alpha(p)^p = alpha(1)
    let pair = Embedding::new(*emb.base(), EmbeddingSpec::LagPair { h: 1 }).unwrap();
    let fam = quant_family(-2.0, -1.0);
    let grid = fam.theta.grid(16);
    let rate = |p: f64| {
        family_coupling_norm(&pair, &fam, &grid, &DecaySettings::new(lags.clone(), p, 20_000, 2))
            .unwrap()
            .alpha_hat()
            .unwrap()
    };
    let (b1, b4) = (rate(1.0), rate(4.0));
    assert!((b4.powi(4) - b1).abs() < 0.1, "{b1} {b4}");
}

fn arb_kind() -> impl Strategy<Value = K> {
    (0..K::ALL.len()).prop_map(|i| K::ALL[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_json_round_trips(kind in arb_kind(), seed in any::<u64>(), reps in proptest::option::of(1u64..1_000_000), burn in proptest::option::of(0usize..10_000)) {
        let mut c = config(kind);
        c.master_seed = seed;
        if kind != K::BracketingIntegral {
            c.reps = reps.or(c.reps);
        }
        c.burn_in = burn;
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_json(), c.to_json());
    }
}
