//! Coupling decay of whole function families: the quantilogram class on
//! AR(1) lag pairs, and the Huber class, which is dominated by the raw
//! coupling distance.

use equiproc::families::{FamilyKind, FunctionFamily, ParamBox};
use equiproc::gmc::{coupling_norm, family_coupling_norm, lipschitz_margin, DecaySettings};
use equiproc::models::{Embedding, EmbeddingSpec, ModelSpec};

fn main() -> equiproc::Result<()> {
    let base = ModelSpec::ar1(0.5, 1.0).build()?;
    let pairs = Embedding::new(base, EmbeddingSpec::LagPair { h: 1 })?;
    let quant = FunctionFamily::new(FamilyKind::Quantilogram { alpha: 0.1 }, ParamBox::interval(-2.0, -1.0)?)?;
    let lags: Vec<usize> = (1..=10).collect();

    for p in [1.0, 2.0, 4.0] {
        let r = family_coupling_norm(&pairs, &quant, &quant.theta.grid(32), &DecaySettings::new(lags.clone(), p, 20_000, 5))?;
        let a = r.alpha_hat().unwrap_or(f64::NAN);
        println!("quantilogram p={p}: alpha_hat {a:.4}  alpha_hat^p {:.4}  r2 {:.4}", a.powf(p), r.r_squared().unwrap_or(f64::NAN));
    }

    let scalar = Embedding::identity(base);
    let huber = FunctionFamily::new(FamilyKind::Huber { delta: 1.345 }, ParamBox::interval(-1.0, 1.0)?)?;
    let settings = DecaySettings::new(lags, 2.0, 5000, 5);
    let h = family_coupling_norm(&scalar, &huber, &huber.theta.grid(41), &settings)?;
    let raw = coupling_norm(&scalar, &settings)?;
    for i in [0, 4, 9] {
        println!("lag {:>2}: huber {:.5} <= raw {:.5}", h.lags[i], h.estimates[i], raw.estimates[i]);
    }
    println!("worst sup|f(x) - f(y)| - |x - y|: {:.2e}", lipschitz_margin(&scalar, &huber, &huber.theta.grid(41), &settings)?);
    Ok(())
}
