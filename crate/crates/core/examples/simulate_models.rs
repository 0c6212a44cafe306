//! Simulate every model family, check stationary moments and look at a
//! coupled pair converging.

use equiproc::innovations::{InnovationSpec, StreamKey};
use equiproc::models::{simulate_coupled, simulate_path, write_paths_csv, ModelSpec};

fn main() -> equiproc::Result<()> {
    let specs = [
        ("iid", ModelSpec::iid_normal()),
        ("ar1", ModelSpec::ar1(0.5, 1.0)),
        ("arch1", ModelSpec::arch1(0.5, 0.4)),
        ("garch11", ModelSpec::garch11(0.1, 0.1, 0.8)),
        ("qar1", ModelSpec::qar1(-0.5, 1.0, 0.2, 0.4).with_innovation(InnovationSpec::Uniform01)),
        ("rcar1", ModelSpec::rcar1(0.4, 0.3)),
    ];
    for (name, spec) in specs {
        let model = spec.build()?;
        let path = simulate_path(&model, StreamKey::replication(1, 0), 50_000, 2000)?;
        let x = path.as_slice();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        let sd = model.gaussian_sd().map(|s| format!("{:.4}", s * s)).unwrap_or_else(|| "-".into());
        println!(
            "{name:<8} contraction {:.4}  mean {mean:>8.4}  var {var:>8.4}  (gaussian var {sd})",
            model.contraction_factor()
        );
    }

    // coupled copies share innovations from period 1 on
    let model = ModelSpec::garch11(0.1, 0.1, 0.8).build()?;
    let pair = simulate_coupled(&model, 1, 0, 30, 2000)?;
    for i in [0, 4, 9, 19, 29] {
        let (x, y) = (pair.original.row(i)[0], pair.perturbed.row(i)[0]);
        println!("n={:>2}  xi {x:>9.5}  xi' {y:>9.5}  |diff| {:.2e}", i + 1, (x - y).abs());
    }

    let mut csv = Vec::new();
    write_paths_csv(&mut csv, &[(0, &pair.original), (1, &pair.perturbed)])?;
    println!("{}", String::from_utf8_lossy(&csv).lines().take(3).collect::<Vec<_>>().join("\n"));
    Ok(())
}
