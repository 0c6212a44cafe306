use super::{cover::bracketing_envelope, FunctionFamily, MarginalInfo};
use crate::error::{Error, Result};
use crate::numerics::{integrate, Quadrature};

const ABS_TOL: f64 = 1e-8;
const MAX_INTERVALS: usize = 20_000;

/// `int_0^1 x^(-gamma/(2+gamma)) N(x)^(1/Q) dx` where `N(x) = O(x^-order)`
/// as `x -> 0`.
///
/// The integrand behaves like `x^e` with `e = -gamma/(2+gamma) - order/Q`;
/// `e <= -1` is reported as [`Error::DivergentIntegral`] without integrating.
/// Otherwise `x = u^m` with `m >= 1/(e+1)` removes the endpoint singularity.
pub fn bracketing_integral<N: Fn(f64) -> f64>(count: N, growth_order: f64, gamma: f64, q: u32) -> Result<Quadrature> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    if q < 2 || q % 2 != 0 {
        return Err(Error::param(format!("Q must be an even integer >= 2, got {q}")));
    }
    if !(growth_order >= 0.0) {
        return Err(Error::param(format!("growth order must be non-negative, got {growth_order}")));
    }
    let lead = -gamma / (2.0 + gamma);
    let exponent = lead - growth_order / q as f64;
    if exponent <= -1.0 {
        return Err(Error::DivergentIntegral { exponent, gamma, q });
    }
    let m = (1.0 / (exponent + 1.0)).ceil().max(3.0);
    let inv_q = 1.0 / q as f64;
    let integrand = |u: f64| {
        let x = u.powf(m);
        if x <= 0.0 {
            return 0.0;
        }
        // fold u^(m-1) into the power of x to avoid 0 * inf underflow
        m * x.powf(lead) * count(x).powf(inv_q) * u.powf(m - 1.0)
    };
    Ok(integrate(integrand, 0.0, 1.0, ABS_TOL, MAX_INTERVALS))
}

/// Bracketing integral of a family with the continuous envelope of the
/// counts produced by its cover construction.
pub fn family_bracketing_integral(family: &FunctionFamily, info: &MarginalInfo, gamma: f64, q: u32) -> Result<Quadrature> {
    family.validate()?;
    let (envelope, order) = bracketing_envelope(family, info);
    bracketing_integral(envelope, order, gamma, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{FamilyKind, ParamBox};

    #[test]
    fn power_law_count() {
        let r = bracketing_integral(|x| x.powi(-2), 2.0, 1.0, 4).unwrap();
        assert!((r.value - 6.0).abs() < 1e-6, "{}", r.value);
        assert!(r.converged);
    }

    #[test]
    fn singleton_count() {
        let r = bracketing_integral(|_| 1.0, 0.0, 1.0, 2).unwrap();
        assert!((r.value - 1.5).abs() < 1e-7, "{}", r.value);
    }

    #[test]
    fn divergent_exponent_is_flagged() {
        match bracketing_integral(|x| x.powi(-2), 2.0, 1.0, 2) {
            Err(Error::DivergentIntegral { exponent, .. }) => assert!((exponent + 4.0 / 3.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_odd_q_and_bad_gamma() {
        assert!(bracketing_integral(|_| 1.0, 0.0, 1.0, 3).is_err());
        assert!(bracketing_integral(|_| 1.0, 0.0, 0.0, 2).is_err());
    }

    #[test]
    fn near_boundary_exponent_still_converges() {
        // e = -1/3 - 0.6 = -0.9333..., antiderivative x^(e+1)/(e+1)
        let r = bracketing_integral(|x| x.powf(-1.2), 1.2, 1.0, 2).unwrap();
        let e: f64 = -1.0 / 3.0 - 0.6;
        assert!((r.value - 1.0 / (e + 1.0)).abs() < 1e-6, "{}", r.value);
    }

    #[test]
    fn quantilogram_family_integral() {
        let f = FunctionFamily::new(FamilyKind::Quantilogram { alpha: 0.1 }, ParamBox::interval(-1.0, 1.0).unwrap()).unwrap();
        let info = MarginalInfo::uniform();
        let ok = family_bracketing_integral(&f, &info, 1.0, 4).unwrap();
        assert!(ok.value.is_finite() && ok.value > 0.0);
        assert!(matches!(family_bracketing_integral(&f, &info, 1.0, 2), Err(Error::DivergentIntegral { .. })));
        let h = FunctionFamily::new(FamilyKind::Huber { delta: 1.0 }, ParamBox::interval(-1.0, 1.0).unwrap()).unwrap();
        assert!(family_bracketing_integral(&h, &info, 1.0, 2).is_ok());
    }
}
