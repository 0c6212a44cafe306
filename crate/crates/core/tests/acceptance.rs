//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the lines always reach the
//! test log. Exits nonzero when a criterion fails, except those listed in
//! `KNOWN_UNATTAINABLE`, whose failure is reported but expected.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use equiproc::empproc::{equicontinuity_probe, find_pair, modulus_experiment, moment_scaling, ModulusSettings, ScalingSettings};
use equiproc::estimators::{m_estimate, sample_quantilogram, MVariant};
use equiproc::families::{
    bracketing_integral, build_cover, rho, FamilyKind, FunctionFamily, Law, MarginalInfo, ParamBox, RhoMethod, DEFAULT_COVER_CAP,
};
use equiproc::gmc::{bracket_coupling_norm, coupling_norm, family_coupling_norm, lipschitz_margin, DecayReport, DecaySettings};
use equiproc::innovations::StreamKey;
use equiproc::models::{stationary_quantile, Embedding, EmbeddingSpec, MeanOracle, ModelSpec, MIN_ORACLE_LENGTH};
use equiproc::numerics::std_normal_quantile;
use equiproc::runner::{cli_with, MANIFEST_FILE};
use equiproc::stats::{map_replications, sorted_quantile, Moments};
use equiproc::Error;

/// Norm-order irrelevance of the decay rate: for indicator-type families
/// `||d||_p^p = P(d != 0)`, so the fitted rate at order `p` is the first-order
/// rate to the power `1/p` and the two cannot agree within 0.1.
const KNOWN_UNATTAINABLE: &[u32] = &[5];
const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ar1() -> Embedding {
    Embedding::identity(ModelSpec::ar1(0.5, 1.0).build().unwrap())
}

fn lag_pair() -> Embedding {
    Embedding::new(ModelSpec::ar1(0.5, 1.0).build().unwrap(), EmbeddingSpec::LagPair { h: 1 }).unwrap()
}

/// Stationary 0.1-quantile of AR1(0.5) with unit innovations, variance 4/3.
fn theta_alpha() -> f64 {
    (4.0f64 / 3.0).sqrt() * std_normal_quantile(0.1)
}

fn quantilogram_family(half_width: f64) -> FunctionFamily {
    let t = theta_alpha();
    FunctionFamily::new(FamilyKind::Quantilogram { alpha: 0.1 }, ParamBox::interval(t - half_width, t + half_width).unwrap()).unwrap()
}

fn lags(max: usize) -> Vec<usize> {
    (1..=max).collect()
}

fn fit(r: &DecayReport) -> String {
    match (r.alpha_hat(), r.slope(), r.r_squared()) {
        (Some(a), Some(s), Some(r2)) => format!("alpha_hat={a:.4} slope={s:.4} r2={r2:.4}"),
        _ => "too fast to resolve".into(),
    }
}

fn criterion_1() -> Outcome {
    let settings = DecaySettings::new(lags(20), 2.0, 20_000, SEED);
    let report = coupling_norm(&ar1(), &settings).unwrap();
    let a = report.alpha_hat().unwrap_or(f64::NAN);
    let oracle_lag1 = 0.5 * (8.0f64 / 3.0).sqrt();
    let model = ModelSpec::ar1(0.5, 1.0).build().unwrap();
    let worst = map_replications(20_000, |rep| {
        let p = equiproc::models::simulate_coupled(&model, SEED, rep, 20, settings.burn_in).unwrap();
        let d0 = p.presample_original[0] - p.presample_perturbed[0];
        let scale = p
            .original
            .as_slice()
            .iter()
            .chain(p.perturbed.as_slice())
            .chain([&p.presample_original[0], &p.presample_perturbed[0]])
            .fold(1.0f64, |m, x| m.max(x.abs()));
        (1..=20)
            .map(|n| {
                let dn = p.original.row(n - 1)[0] - p.perturbed.row(n - 1)[0];
                (dn - 0.5f64.powi(n as i32) * d0).abs() / (f64::EPSILON * n as f64 * scale)
            })
            .fold(0.0, f64::max)
    })
    .into_iter()
    .fold(0.0, f64::max);
    outcome(
        (0.45..=0.55).contains(&a) && worst <= 10.0,
        format!(
            "{}; lag-1 norm {:.4} vs closed form {oracle_lag1:.4}; worst identity error {worst:.2} eps*n*scale",
            fit(&report),
            report.estimates[0]
        ),
    )
}

fn criterion_2() -> Outcome {
    let f = FunctionFamily::new(FamilyKind::Indicator, ParamBox::interval(0.0, 1.0).unwrap()).unwrap();
    let r = rho(&f, &[0.3], &[0.5], Law::Uniform01 { master_seed: SEED }, 100_000, RhoMethod::MonteCarlo).unwrap();
    let target = 0.2f64.sqrt();
    outcome((r.value - target).abs() <= 0.01, format!("rho_hat={:.6} (se {:.1e}) vs {target:.6}", r.value, r.std_error))
}

fn criterion_3() -> Outcome {
    let r = bracketing_integral(|x| x.powi(-2), 2.0, 1.0, 4).unwrap();
    let gate = bracketing_integral(|x| x.powi(-2), 2.0, 1.0, 2);
    let flagged = matches!(gate, Err(Error::DivergentIntegral { .. }));
    outcome(
        (r.value - 6.0).abs() <= 1e-6 && flagged,
        format!("integral={:.10} (Q=4); Q=2 flagged divergent: {flagged}", r.value),
    )
}

fn quantilogram_decay(p: f64) -> DecayReport {
    let family = quantilogram_family(0.5);
    let grid = family.theta.grid(32);
    family_coupling_norm(&lag_pair(), &family, &grid, &DecaySettings::new(lags(10), p, 20_000, SEED)).unwrap()
}

fn criterion_4() -> Outcome {
    let emb = lag_pair();
    let family = quantilogram_family(0.5);
    let fam = quantilogram_decay(2.0);
    let info = MarginalInfo::from_embedding(&emb, SEED).unwrap();
    // Narrow brackets stay saturated until |xi_n - xi_n'| drops below the
    // bracket width, which bends the log-linear fit; 0.5 puts that knee early.
    let cover = build_cover(&family, 0.5, &info, DEFAULT_COVER_CAP).unwrap();
    let settings = DecaySettings::new(lags(12), 2.0, 20_000, SEED);
    let brk = bracket_coupling_norm(&emb, &cover, &settings).unwrap();
    let geometric = |r: &DecayReport| r.slope().is_some_and(|s| s < 0.0) && r.r_squared().is_some_and(|r2| r2 >= 0.9);

    let huber = FunctionFamily::new(FamilyKind::Huber { delta: 1.0 }, ParamBox::interval(-1.0, 1.0).unwrap()).unwrap();
    let hgrid = huber.theta.grid(41);
    let margin = lipschitz_margin(&ar1(), &huber, &hgrid, &settings).unwrap();
    let hinfo = MarginalInfo::from_embedding(&ar1(), SEED).unwrap();
    let hcover = build_cover(&huber, 0.2, &hinfo, DEFAULT_COVER_CAP).unwrap();
    let hbrk = bracket_coupling_norm(&ar1(), &hcover, &settings).unwrap();
    let zero = hbrk.estimates.iter().all(|&e| e == 0.0);
    outcome(
        // a few ulps of slack: clamp(x - t) - clamp(y - t) rounds differently from x - y
        geometric(&fam) && geometric(&brk) && margin <= 1e-14 && zero,
        format!(
            "family: {}; brackets ({}): {}; huber domination margin {margin:.3e}; huber bracket norms all zero: {zero}",
            fit(&fam),
            cover.len(),
            fit(&brk)
        ),
    )
}

fn criterion_5() -> Outcome {
    let (r1, r4) = (quantilogram_decay(1.0), quantilogram_decay(4.0));
    let (a1, a4) = (r1.alpha_hat().unwrap_or(f64::NAN), r4.alpha_hat().unwrap_or(f64::NAN));
    outcome(
        (a1 - a4).abs() <= 0.1,
        format!("alpha_hat p=1 {a1:.4}, p=4 {a4:.4}, |diff|={:.4}; alpha_hat(p=4)^4={:.4}", (a1 - a4).abs(), a4.powi(4)),
    )
}

fn criterion_6() -> Outcome {
    let emb = lag_pair();
    let family = quantilogram_family(0.5);
    let grid = family.theta.grid(128);
    let info = MarginalInfo::from_embedding(&emb, SEED).unwrap();
    let oracle = MeanOracle::new(emb.clone(), family.clone(), SEED, MIN_ORACLE_LENGTH).unwrap();
    let settings = ModulusSettings {
        deltas: vec![0.05, 0.1, 0.2, 0.4],
        n: 400,
        q: 4,
        gamma: 1.0,
        eta: 0.5,
        reps: 500,
        master_seed: SEED,
        burn_in: 2000,
        pilot_reps: 100_000,
    };
    let report = modulus_experiment(&emb, &family, &grid, &info, &oracle, &settings).unwrap();
    let rows = &report.rows;
    let comb = |i: usize, j: usize| (rows[i].se.powi(2) + rows[j].se.powi(2)).sqrt();
    let monotone = (1..rows.len()).all(|i| rows[i].estimate >= rows[i - 1].estimate - 2.0 * comb(i, i - 1));
    let last = rows.len() - 1;
    let separated = rows[0].estimate < rows[last].estimate - 2.0 * comb(0, last);
    let probe = equicontinuity_probe(&emb, &family, &grid, &info, &oracle, &settings, &[200, 400, 800]).unwrap();
    let freqs: Vec<f64> = [200, 400, 800].iter().map(|&n| probe.freq(0.05, n).unwrap()).collect();
    let small = freqs.iter().all(|&f| f <= 0.1);
    let table: Vec<String> = rows.iter().map(|r| format!("{}:{:.3e}({:.1e},{}p)", r.delta, r.estimate, r.se, r.pairs)).collect();
    outcome(
        monotone && separated && small,
        format!("modulus {}; probe freq at delta=0.05 {freqs:?}", table.join(" ")),
    )
}

fn scaling_pairs(family: &FunctionFamily, emb: &Embedding, base: f64) -> Vec<equiproc::empproc::ScalingPair> {
    let law = Law::Stationary { embedding: emb, master_seed: SEED };
    [0.05, 0.1, 0.2, 0.4].iter().map(|&t| find_pair(family, &[base], t, law, 100_000).unwrap()).collect()
}

fn criterion_7() -> Outcome {
    let settings = ScalingSettings { ns: vec![100, 400], q: 2, gamma: 1.0, reps: 2000, master_seed: SEED, burn_in: 2000 };
    let emb = lag_pair();
    let t = theta_alpha();
    let family = FunctionFamily::new(FamilyKind::Quantilogram { alpha: 0.1 }, ParamBox::interval(-3.0, 3.0).unwrap()).unwrap();
    let oracle = MeanOracle::new(emb.clone(), family.clone(), SEED, MIN_ORACLE_LENGTH).unwrap();
    let report = moment_scaling(&emb, &family, &scaling_pairs(&family, &emb, t), &oracle, &settings).unwrap();
    let (m100, m400) = (report.max_ratio_at(100), report.max_ratio_at(400));
    let change = (m400 / m100).max(m100 / m400);

    let iid = Embedding::new(ModelSpec::iid_normal().build().unwrap(), EmbeddingSpec::BivariateCopy { shift: 0.0 }).unwrap();
    let dom = FunctionFamily::new(FamilyKind::DominancePair, ParamBox::interval(-3.0, 3.0).unwrap()).unwrap();
    let doracle = MeanOracle::new(iid.clone(), dom.clone(), SEED, MIN_ORACLE_LENGTH).unwrap();
    let control = moment_scaling(&iid, &dom, &scaling_pairs(&dom, &iid, 0.0), &doracle, &settings).unwrap();
    let worst_z = control
        .rows
        .iter()
        .map(|r| (r.ratio - r.rho_hat.powf(2.0 / 3.0)).abs() / r.ratio_se)
        .fold(0.0, f64::max);
    outcome(
        change < 2.0 && worst_z <= 3.0,
        format!("max ratio n=100 {m100:.4}, n=400 {m400:.4} (factor {change:.3}); iid control worst |z| {worst_z:.2}"),
    )
}

fn quantilogram_runs(n: usize, reps: u64) -> Vec<equiproc::estimators::QuantilogramResult> {
    let emb = Embedding::identity(ModelSpec::iid_normal().build().unwrap());
    let ta = stationary_quantile(&emb, 0.1, SEED, MIN_ORACLE_LENGTH).unwrap();
    let pair = Embedding::new(*emb.base(), EmbeddingSpec::LagPair { h: 1 }).unwrap();
    let fam = FunctionFamily::new(FamilyKind::Quantilogram { alpha: 0.1 }, ParamBox::singleton(vec![ta]).unwrap()).unwrap();
    let oracle = MeanOracle::new(pair, fam, SEED, MIN_ORACLE_LENGTH).unwrap();
    map_replications(reps, |rep| {
        let x = emb.simulate(StreamKey::replication(SEED, rep), n, 2000).unwrap();
        sample_quantilogram(x.as_slice(), 0.1, 1, ta, |t| oracle.mean(&[t])).unwrap()
    })
}

fn abs_remainder_p95(rows: &[equiproc::estimators::QuantilogramResult]) -> f64 {
    let mut v: Vec<f64> = rows.iter().map(|r| r.remainder.abs()).collect();
    v.sort_by(f64::total_cmp);
    sorted_quantile(&v, 0.95)
}

fn criterion_8() -> Outcome {
    let big = quantilogram_runs(2000, 1000);
    let small = quantilogram_runs(200, 1000);
    let mut m = Moments::default();
    big.iter().for_each(|r| m.push(r.scaled));
    let z = m.mean() / m.std_error();
    let worst_identity = big.iter().chain(&small).map(|r| r.identity_residual().abs()).fold(0.0, f64::max);
    let (p_small, p_big) = (abs_remainder_p95(&small), abs_remainder_p95(&big));
    outcome(
        z.abs() <= 3.0 && worst_identity <= 1e-12 && p_big < p_small,
        format!(
            "mean scaled {:.4e} (se {:.1e}, z {z:.2}); worst identity residual {worst_identity:.1e}; |remainder| p95 n=200 {p_small:.4}, n=2000 {p_big:.4}",
            m.mean(),
            m.std_error()
        ),
    )
}

fn criterion_9() -> Outcome {
    let med = m_estimate(MVariant::Median, &[1.0, 2.0, 3.0]).unwrap();
    let sym = [5.0, 3.2, 6.8, 4.1, 5.9, 1.0, 9.0, 4.9, 5.1];
    let hub = m_estimate(MVariant::Huber { delta: 1.0 }, &sym).unwrap();
    let exp = Exp::new(1.0).unwrap();
    let hits = map_replications(500, |rep| {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ rep);
        let data: Vec<f64> = (0..5000)
            .map(|_| {
                let e = exp.sample(&mut rng);
                if rand::Rng::random::<bool>(&mut rng) {
                    e
                } else {
                    -e
                }
            })
            .collect();
        m_estimate(MVariant::Huber { delta: 1.345 }, &data).unwrap().theta_hat.abs() <= 0.05
    })
    .into_iter()
    .filter(|&h| h)
    .count();
    let share = hits as f64 / 500.0;
    outcome(
        med.theta_hat == 2.0 && (hub.theta_hat - 5.0).abs() <= 1e-10 && share >= 0.95,
        format!("median {}; huber center error {:.1e}; laplace |theta_hat|<=0.05 in {:.1}%", med.theta_hat, (hub.theta_hat - 5.0).abs(), 100.0 * share),
    )
}

fn run_cli(kind: &str, config: &std::path::Path, out: &std::path::Path, threads: &str) -> i32 {
    let args = ["equiproc", kind, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads];
    cli_with(args, &mut std::io::sink(), &mut std::io::stderr())
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        (
            "gmc-decay",
            r#"{"kind":"gmc-decay","master_seed":11,"reps":3000,"model":{"process":{"type":"garch11","omega":0.1,"a":0.1,"b":0.8}},"lags":[1,2,3,4,5,6,7,8]}"#,
        ),
        (
            "modulus",
            r#"{"kind":"modulus","master_seed":11,"reps":130,"model":{"process":{"type":"ar1","phi":0.5,"sigma":1.0}},
               "embedding":{"type":"lag-pair","h":1},
               "family":{"kind":{"type":"quantilogram","alpha":0.1},"theta":{"lower":[-2.0],"upper":[-1.0]}},
               "grid_points":32,"deltas":[0.05,0.2],"n":200,"Q":4,"gamma":1.0,"eta":0.5,"pilot_reps":20000}"#,
        ),
        (
            "quantilogram",
            r#"{"kind":"quantilogram","master_seed":11,"reps":200,"model":{"process":{"type":"arch1","omega":1.0,"a1":0.3}},"alpha":0.1,"h":2,"n":500}"#,
        ),
        (
            "dominance",
            r#"{"kind":"dominance","master_seed":11,"reps":150,"model":{"process":{"type":"qar1","a0":0.0,"a1":1.0,"b0":0.2,"b1":0.4},"innovation":{"kind":"uniform-0-1"}},
               "embedding":{"type":"bivariate-copy","shift":0.1},
               "family":{"kind":{"type":"dominance-pair"},"theta":{"lower":[-1.0],"upper":[2.0]}},"grid_points":51,"n":300}"#,
        ),
    ];
    let mut identical = 0;
    let mut total = 0;
    for (kind, text) in configs {
        let cfg = dir.path().join(format!("{kind}.json"));
        std::fs::write(&cfg, text).unwrap();
        let (a, b) = (dir.path().join(format!("{kind}-1")), dir.path().join(format!("{kind}-8")));
        if run_cli(kind, &cfg, &a, "1") != 0 || run_cli(kind, &cfg, &b, "8") != 0 {
            return outcome(false, format!("{kind} run failed"));
        }
        for entry in std::fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            if name == MANIFEST_FILE {
                continue;
            }
            total += 1;
            if std::fs::read(a.join(&name)).unwrap() == std::fs::read(b.join(&name)).unwrap() {
                identical += 1;
            }
        }
    }
    outcome(identical == total && total > 0, format!("{identical}/{total} report files byte-identical at 1 and 8 threads"))
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut unexpected = Vec::new();
    for (id, f) in criteria {
        let start = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && KNOWN_UNATTAINABLE.contains(&id) { " [known unattainable]" } else { "" };
        println!("criterion {id:>2}: {verdict}{note} ({:.1}s) {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.pass && !KNOWN_UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
