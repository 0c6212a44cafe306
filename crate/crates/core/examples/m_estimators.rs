//! Median and Huber location estimates with their near-root certificates.

use equiproc::estimators::{m_estimate, MVariant};
use equiproc::innovations::{derive_stream, InnovationSpec, StreamKey};

fn main() -> equiproc::Result<()> {
    let small = [1.0, 2.0, 3.0];
    println!("median of {small:?}: {:?}", m_estimate(MVariant::Median, &small)?);

    // heavy tails: student-t(3) shifted to 2
    let mut s = derive_stream(InnovationSpec::StudentT { dof: 3.0 }, StreamKey::new(10, 0));
    let data: Vec<f64> = s.draw(5000).into_iter().map(|x| x + 2.0).collect();
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    println!("sample mean {mean:.4}");
    for v in [MVariant::Median, MVariant::Huber { delta: 0.5 }, MVariant::Huber { delta: 1.345 }, MVariant::Huber { delta: 5.0 }] {
        let m = m_estimate(v, &data)?;
        println!("{v:?}: theta_hat {:.5}  |sum f| {:.2e}", m.theta_hat, m.abs_score_sum);
    }
    Ok(())
}
