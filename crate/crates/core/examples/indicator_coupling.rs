//! Indicator-of-index classes 1{U < V'lambda} in the three coupling cases:
//! constant V, V a function of W, and U independent of V given W.

use equiproc::families::ParamBox;
use equiproc::gmc::{indicator_coupling, CouplingCase, DecaySettings, GMap, IndicatorCouplingSpec, Inequality, VSource};
use equiproc::models::{Embedding, EmbeddingSpec, ModelSpec};
use equiproc::Error;

fn main() -> equiproc::Result<()> {
    let base = ModelSpec::ar1(0.5, 1.0).build()?;
    let settings = DecaySettings::new((1..=10).collect(), 1.0, 10_000, 9);

    let singleton = IndicatorCouplingSpec {
        u: 0,
        v: VSource::Constant { value: vec![1.0] },
        w: vec![],
        case: CouplingCase::Singleton,
        inequality: Inequality::Strict,
        lambda: ParamBox::interval(-1.0, 1.0)?,
    };
    let r = indicator_coupling(&Embedding::identity(base), &singleton, &singleton.lambda.grid(64), &settings)?;
    println!("case i  (constant V):   alpha_hat {:?}", r.alpha_hat());

    // (T, C, 1, z): censored outcome, censoring time, intercept, covariate
    let cens = Embedding::new(
        base,
        EmbeddingSpec::CensoredTriple {
            beta: [0.0, 1.0],
            covariate: ModelSpec::ar1(0.3, 1.0),
            z_bound: 1.0,
            censor_mean: 0.5,
            censor_scale: 1.0,
        },
    )?;
    let function = IndicatorCouplingSpec {
        u: 0,
        v: VSource::Columns { columns: vec![2, 3] },
        w: vec![3],
        case: CouplingCase::Function { g: GMap::PrependOne },
        inequality: Inequality::Weak,
        lambda: ParamBox::new(vec![-0.5, 0.5], vec![0.5, 1.5])?,
    };
    let r = indicator_coupling(&cens, &function, &function.lambda.grid(8), &settings)?;
    println!("case ii (V = (1, z)):   alpha_hat {:?}", r.alpha_hat());

    let ci = IndicatorCouplingSpec {
        v: VSource::Columns { columns: vec![1] },
        case: CouplingCase::ConditionalIndependence,
        lambda: ParamBox::singleton(vec![1.0])?,
        ..function.clone()
    };
    let r = indicator_coupling(&cens, &ci, &ci.lambda.grid(1), &settings)?;
    println!("case iii (T vs C | z):  alpha_hat {:?}", r.alpha_hat());

    // claiming V = g(W) when it is not is a configuration error
    let wrong = IndicatorCouplingSpec { v: VSource::Columns { columns: vec![1, 3] }, ..function };
    match indicator_coupling(&cens, &wrong, &wrong.lambda.grid(4), &settings) {
        Err(e @ Error::CouplingConfig(_)) => println!("refused: {e}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
