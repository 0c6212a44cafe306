//! Bracketing covers: bracket counts against delta, an empirical check of a
//! cover, and the bracketing integral with its convergence gate.

use equiproc::families::{
    bracketing_integral, bracketing_number, build_cover, family_bracketing_integral, verify_cover, FamilyKind, FunctionFamily,
    Law, MarginalInfo, ParamBox, DEFAULT_COVER_CAP,
};
use equiproc::models::{Embedding, EmbeddingSpec, ModelSpec};

fn main() -> equiproc::Result<()> {
    let emb = Embedding::new(ModelSpec::ar1(0.5, 1.0).build()?, EmbeddingSpec::LagPair { h: 1 })?;
    let info = MarginalInfo::from_embedding(&emb, 2)?;
    let quant = FunctionFamily::new(FamilyKind::Quantilogram { alpha: 0.1 }, ParamBox::interval(-2.0, -1.0)?)?;

    println!("delta  N(delta)");
    for delta in [0.4, 0.2, 0.1, 0.05, 0.025] {
        println!("{delta:<6} {}", bracketing_number(&quant, delta, &info, DEFAULT_COVER_CAP)?);
    }

    let cover = build_cover(&quant, 0.2, &info, DEFAULT_COVER_CAP)?;
    let sample = Law::Stationary { embedding: &emb, master_seed: 2 }.sample(2, 50_000, 0)?;
    let check = verify_cover(&cover, &quant, &sample, &quant.theta.grid(200))?;
    println!(
        "cover of {} brackets: domination ok {}, size ok {}, max rho(b_k) {:.4}",
        check.brackets, check.domination_ok, check.size_ok, check.max_rho_hat
    );

    let r = bracketing_integral(|x| x.powi(-2), 2.0, 1.0, 4)?;
    println!("int x^(-1/3) (x^-2)^(1/4) dx = {:.8}", r.value);
    for q in [2, 4, 8] {
        match family_bracketing_integral(&quant, &info, 1.0, q) {
            Ok(r) => println!("quantilogram, gamma 1, Q {q}: {:.4}", r.value),
            Err(e) => println!("quantilogram, gamma 1, Q {q}: {e}"),
        }
    }
    Ok(())
}
