//! The L2 pseudometric rho(f_theta - f_theta') under a uniform law and under
//! a model's stationary law, and finding a pair at a target distance.

use equiproc::empproc::find_pair;
use equiproc::families::{rho, FamilyKind, FunctionFamily, Law, ParamBox, RhoMethod};
use equiproc::models::{Embedding, EmbeddingSpec, ModelSpec};

fn main() -> equiproc::Result<()> {
    let ind = FunctionFamily::new(FamilyKind::Indicator, ParamBox::interval(0.0, 1.0)?)?;
    let unif = Law::Uniform01 { master_seed: 1 };
    for method in [RhoMethod::Auto, RhoMethod::MonteCarlo] {
        let r = rho(&ind, &[0.3], &[0.5], unif, 100_000, method)?;
        println!("indicator 0.3 vs 0.5 ({method:?}): {:.6} +- {:.1e} [{:?}]  exact {:.6}", r.value, r.std_error, r.source, 0.2f64.sqrt());
    }

    let emb = Embedding::new(ModelSpec::ar1(0.5, 1.0).build()?, EmbeddingSpec::LagPair { h: 1 })?;
    let quant = FunctionFamily::new(FamilyKind::Quantilogram { alpha: 0.1 }, ParamBox::interval(-3.0, 3.0)?)?;
    let law = Law::Stationary { embedding: &emb, master_seed: 1 };
    let t0 = -1.478;
    for gap in [0.01, 0.04, 0.16] {
        let r = rho(&quant, &[t0], &[t0 + gap], law, 100_000, RhoMethod::Auto)?;
        println!("quantilogram gap {gap}: rho {:.4}  rho/sqrt(gap) {:.3}", r.value, r.value / gap.sqrt());
    }
    for target in [0.05, 0.2] {
        let p = find_pair(&quant, &[t0], target, law, 100_000)?;
        println!("target {target}: theta' = {:.4}, rho {:.4}", p.theta_prime[0], p.rho.value);
    }
    Ok(())
}
