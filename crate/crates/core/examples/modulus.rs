//! Monte Carlo equicontinuity modulus E(sup |nu_n(f - g)|)^Q over pairs with
//! rho(f - g) < delta, and the exceedance probe as n grows.

use equiproc::empproc::{equicontinuity_probe, modulus_experiment, ModulusSettings};
use equiproc::families::{FamilyKind, FunctionFamily, MarginalInfo, ParamBox};
use equiproc::models::{Embedding, EmbeddingSpec, MeanOracle, ModelSpec, MIN_ORACLE_LENGTH};

fn main() -> equiproc::Result<()> {
    let emb = Embedding::new(ModelSpec::ar1(0.5, 1.0).build()?, EmbeddingSpec::LagPair { h: 1 })?;
    let family = FunctionFamily::new(FamilyKind::Quantilogram { alpha: 0.1 }, ParamBox::interval(-1.978, -0.978)?)?;
    let grid = family.theta.grid(64);
    let info = MarginalInfo::from_embedding(&emb, 4)?;
    let oracle = MeanOracle::new(emb.clone(), family.clone(), 4, MIN_ORACLE_LENGTH)?;
    let settings = ModulusSettings {
        deltas: vec![0.05, 0.1, 0.2, 0.4],
        n: 400,
        q: 4,
        gamma: 1.0,
        eta: 0.3,
        reps: 300,
        master_seed: 4,
        burn_in: 2000,
        pilot_reps: 100_000,
    };
    let report = modulus_experiment(&emb, &family, &grid, &info, &oracle, &settings)?;
    println!("bracketing integral {:.4}", report.bracketing_integral);
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));

    let probe = equicontinuity_probe(&emb, &family, &grid, &info, &oracle, &settings, &[100, 400, 1600])?;
    for n in [100, 400, 1600] {
        let row: Vec<String> = settings.deltas.iter().map(|&d| format!("{:.3}", probe.freq(d, n).unwrap())).collect();
        println!("n {n:>4}: P(sup > {}) per delta {}", settings.eta, row.join(" "));
    }

    // Q = 2 leaves the bracketing integral divergent for this family
    let refused = modulus_experiment(&emb, &family, &grid, &info, &oracle, &ModulusSettings { q: 2, ..settings });
    println!("Q=2: {}", refused.unwrap_err());
    Ok(())
}
