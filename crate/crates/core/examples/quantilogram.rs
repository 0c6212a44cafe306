//! Sample quantilogram and its decomposition into drift, the empirical
//! process at the true quantile, and the estimation remainder.

use equiproc::estimators::sample_quantilogram;
use equiproc::families::{FamilyKind, FunctionFamily, ParamBox};
use equiproc::innovations::StreamKey;
use equiproc::models::{stationary_quantile, Embedding, EmbeddingSpec, MeanOracle, ModelSpec, MIN_ORACLE_LENGTH};
use equiproc::stats::{map_replications, Moments};

fn main() -> equiproc::Result<()> {
    let (alpha, h) = (0.1, 1);
    for (label, spec) in [("iid normal (null)", ModelSpec::iid_normal()), ("arch1(1, 0.3)", ModelSpec::arch1(1.0, 0.3))] {
        let emb = Embedding::identity(spec.build()?);
        let ta = stationary_quantile(&emb, alpha, 8, MIN_ORACLE_LENGTH)?;
        let pair = Embedding::new(*emb.base(), EmbeddingSpec::LagPair { h })?;
        let family = FunctionFamily::new(FamilyKind::Quantilogram { alpha }, ParamBox::singleton(vec![ta])?)?;
        let oracle = MeanOracle::new(pair, family, 8, MIN_ORACLE_LENGTH)?;

        println!("{label}: theta_alpha {ta:.4}, E f at theta_alpha {:.2e}", oracle.mean(&[ta]));
        for n in [200, 2000] {
            let rows = map_replications(500, |rep| {
                let x = emb.simulate(StreamKey::replication(8, rep), n, 2000).expect("valid model");
                sample_quantilogram(x.as_slice(), alpha, h, ta, |t| oracle.mean(&[t])).expect("n > h")
            });
            let mut scaled = Moments::default();
            let mut rem = Moments::default();
            rows.iter().for_each(|r| {
                scaled.push(r.scaled);
                rem.push(r.remainder.abs());
            });
            let worst = rows.iter().map(|r| r.identity_residual().abs()).fold(0.0, f64::max);
            println!(
                "  n {n:>4}: scaled {:.4} +- {:.4}  E|remainder| {:.4}  worst identity residual {worst:.1e}",
                scaled.mean(),
                scaled.std_error(),
                rem.mean()
            );
        }
    }
    Ok(())
}
