//! Stochastic dominance sup-statistic on paired series: bounded in n under
//! equal marginals, growing like sqrt(n) under a shift.

use equiproc::estimators::dominance_stat;
use equiproc::innovations::StreamKey;
use equiproc::models::{Embedding, EmbeddingSpec, ModelSpec};
use equiproc::stats::{map_replications, Moments};

fn main() -> equiproc::Result<()> {
    let grid: Vec<f64> = (0..101).map(|i| -3.0 + 0.06 * i as f64).collect();
    let base = ModelSpec::garch11(0.1, 0.1, 0.8).build()?;
    for shift in [0.0, 0.3] {
        let emb = Embedding::new(base, EmbeddingSpec::BivariateCopy { shift })?;
        for n in [500, 2000, 8000] {
            let stats = map_replications(200, |rep| {
                let x = emb.simulate(StreamKey::replication(12, rep), n, 2000).expect("valid model");
                dominance_stat(&x.column(0), &x.column(1), &grid).expect("equal lengths").statistic
            });
            let mut m = Moments::default();
            stats.iter().for_each(|s| m.push(*s));
            println!("shift {shift}: n {n:>5}  mean sup {:.4} +- {:.4}", m.mean(), m.std_error());
        }
    }
    Ok(())
}
