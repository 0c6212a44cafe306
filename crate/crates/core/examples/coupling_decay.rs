//! Geometric moment contraction: ||xi_n - xi_n'||_q per lag and the fitted
//! decay rate, for AR(1) (rate |phi|) and a few nonlinear models.

use equiproc::gmc::{coupling_norm, DecaySettings};
use equiproc::models::{Embedding, ModelSpec};

fn main() -> equiproc::Result<()> {
    let lags: Vec<usize> = (1..=20).collect();
    let cases = [
        ("ar1(0.5), q=2", ModelSpec::ar1(0.5, 1.0), 2.0),
        ("arch1(0.5, 0.4), q=1", ModelSpec::arch1(0.5, 0.4), 1.0),
        ("garch11(0.1, 0.1, 0.8), q=2", ModelSpec::garch11(0.1, 0.1, 0.8), 2.0),
        ("rcar1(0.4, 0.3), q=2", ModelSpec::rcar1(0.4, 0.3), 2.0),
    ];
    for (label, spec, q) in cases {
        let emb = Embedding::identity(spec.build()?);
        let report = coupling_norm(&emb, &DecaySettings::new(lags.clone(), q, 20_000, 3))?;
        println!("{label}: alpha_hat {:?}  r2 {:?}", report.alpha_hat(), report.r_squared());
        println!("  lag 1 {:.4}  lag 5 {:.4}  lag 10 {:.2e}", report.estimates[0], report.estimates[4], report.estimates[9]);
    }
    println!("closed form for ar1: lag 1 {:.4}", 0.5 * (8.0f64 / 3.0).sqrt());
    Ok(())
}
