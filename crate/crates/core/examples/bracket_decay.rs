//! Coupling decay of the bounding functions of a quantilogram bracketing
//! cover on AR(1), for a few bracket sizes.
//!
//! cargo run --release --example bracket_decay -- 0.2 0.5 1.0

use equiproc::families::{build_cover, FamilyKind, FunctionFamily, MarginalInfo, ParamBox, DEFAULT_COVER_CAP};
use equiproc::gmc::{bracket_coupling_norm, DecaySettings};
use equiproc::models::{Embedding, EmbeddingSpec, ModelSpec};
use equiproc::numerics::std_normal_quantile;

fn main() -> equiproc::Result<()> {
    let deltas: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("delta")).collect();
    let deltas = if deltas.is_empty() { vec![0.2, 0.5, 1.0] } else { deltas };

    let emb = Embedding::new(ModelSpec::ar1(0.5, 1.0).build()?, EmbeddingSpec::LagPair { h: 1 })?;
    let t = (4.0f64 / 3.0).sqrt() * std_normal_quantile(0.1);
    let family = FunctionFamily::new(FamilyKind::Quantilogram { alpha: 0.1 }, ParamBox::interval(t - 0.5, t + 0.5)?)?;
    let info = MarginalInfo::from_embedding(&emb, 1)?;
    let settings = DecaySettings::new((1..=12).collect(), 2.0, 20_000, 1);

    for delta in deltas {
        let cover = build_cover(&family, delta, &info, DEFAULT_COVER_CAP)?;
        let report = bracket_coupling_norm(&emb, &cover, &settings)?;
        println!("delta {delta}: {} brackets, alpha_hat {:?}, r2 {:?}", cover.len(), report.alpha_hat(), report.r_squared());
        for ((lag, e), (se, used)) in report.lags.iter().zip(&report.estimates).zip(report.std_errors.iter().zip(&report.used_in_fit)) {
            println!("  lag {lag:>2}  {e:.5}  se {se:.5}  {}", if *used { "fit" } else { "-" });
        }
    }
    Ok(())
}
