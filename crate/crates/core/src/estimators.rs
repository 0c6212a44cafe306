//! Sample quantilogram with its three-term decomposition, location
//! M-estimators (median, Huber) and the stochastic dominance sup-statistic.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::fmt_f64;
use crate::stats::sorted_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantilogramResult {
    pub alpha: f64,
    pub h: usize,
    pub n: usize,
    pub theta_hat: f64,
    pub theta_alpha: f64,
    /// `(n-h)^{-1} sum f_{theta_hat}(xi_i)`
    pub statistic: f64,
    /// `sqrt(n-h) * statistic`
    pub scaled: f64,
    /// `sqrt(n-h) E f_{theta_hat}(xi_0)`
    pub drift: f64,
    /// `nu_{n-h} f_{theta_alpha}`
    pub nu_theta_alpha: f64,
    /// `nu_{n-h}(f_{theta_hat} - f_{theta_alpha})`
    pub remainder: f64,
    /// `sqrt(n-h) E f_{theta_alpha}(xi_0)`, zero under the null at the true
    /// quantile. Reported only: the centred `nu` terms already absorb it.
    pub centering: f64,
}

impl QuantilogramResult {
    /// `scaled - (drift + nu + remainder)`; zero up to rounding.
    pub fn identity_residual(&self) -> f64 {
        self.scaled - (self.drift + self.nu_theta_alpha + self.remainder)
    }

    pub const CSV_HEADER: &'static str = "alpha,h,n,theta_hat,statistic,scaled,drift,nu_theta_alpha,remainder,centering";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(self.alpha),
            self.h,
            self.n,
            fmt_f64(self.theta_hat),
            fmt_f64(self.statistic),
            fmt_f64(self.scaled),
            fmt_f64(self.drift),
            fmt_f64(self.nu_theta_alpha),
            fmt_f64(self.remainder),
            fmt_f64(self.centering)
        )
    }
}

/// Type-1 empirical `alpha`-quantile: the order statistic at index `ceil(alpha n)`.
pub fn empirical_quantile(data: &[f64], alpha: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&sorted, alpha))
}

/// Sample quantilogram at lag `h` with `theta_hat` the type-1 sample
/// quantile. `mean_of(theta)` supplies `E f_theta(xi_0)` for the drift and
/// centering terms; `theta_alpha` is the population quantile.
pub fn sample_quantilogram<M: Fn(f64) -> f64>(data: &[f64], alpha: f64, h: usize, theta_alpha: f64, mean_of: M) -> Result<QuantilogramResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if h == 0 {
        return Err(Error::param("lag h must be at least 1"));
    }
    let n = data.len();
    if n <= h {
        return Err(Error::LagTooLarge { h, n });
    }
    let theta_hat = empirical_quantile(data, alpha)?;
    let f = |t: f64, a: f64, b: f64| {
        let ind = |x: f64| if x < t { 1.0 } else { 0.0 };
        (alpha - ind(a)) * (alpha - ind(b))
    };
    let m = (n - h) as f64;
    let root_m = m.sqrt();
    let (mut s_hat, mut s_alpha) = (0.0, 0.0);
    for i in h..n {
        s_hat += f(theta_hat, data[i - h], data[i]);
        s_alpha += f(theta_alpha, data[i - h], data[i]);
    }
    let (e_hat, e_alpha) = (mean_of(theta_hat), mean_of(theta_alpha));
    let statistic = s_hat / m;
    Ok(QuantilogramResult {
        alpha,
        h,
        n,
        theta_hat,
        theta_alpha,
        statistic,
        scaled: s_hat / root_m,
        drift: root_m * e_hat,
        nu_theta_alpha: (s_alpha - m * e_alpha) / root_m,
        remainder: ((s_hat - s_alpha) - m * (e_hat - e_alpha)) / root_m,
        centering: root_m * e_alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MVariant {
    Median,
    Huber { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MEstimate {
    pub variant: MVariant,
    pub n: usize,
    pub theta_hat: f64,
    /// `n^{-1} sum f_{theta_hat}(x_i)`
    pub residual_score: f64,
    /// `|sum f_{theta_hat}(x_i)|`
    pub abs_score_sum: f64,
}

impl MEstimate {
    pub const CSV_HEADER: &'static str = "variant,delta,n,theta_hat,residual_score,abs_score_sum";

    pub fn csv_row(&self) -> String {
        let (name, delta) = match self.variant {
            MVariant::Median => ("median", String::new()),
            MVariant::Huber { delta } => ("huber", fmt_f64(delta)),
        };
        format!(
            "{name},{delta},{},{},{},{}",
            self.n,
            fmt_f64(self.theta_hat),
            fmt_f64(self.residual_score),
            fmt_f64(self.abs_score_sum)
        )
    }
}

const HUBER_TOL: f64 = 1e-10;

fn score(variant: MVariant, data: &[f64], theta: f64) -> f64 {
    match variant {
        MVariant::Median => data.iter().map(|x| (x - theta).signum() * ((x - theta) != 0.0) as u8 as f64).sum(),
        MVariant::Huber { delta } => data.iter().map(|x| (x - theta).clamp(-delta, delta)).sum(),
    }
}

/// Exact root of the Huber score on the linear piece active at `theta`.
fn huber_linear_root(data: &[f64], delta: f64, theta: f64) -> Option<f64> {
    let (mut active_sum, mut active, mut clipped) = (0.0, 0usize, 0.0);
    for &x in data {
        let r = x - theta;
        if r.abs() < delta {
            active_sum += x;
            active += 1;
        } else {
            clipped += delta * r.signum();
        }
    }
    (active > 0).then(|| (active_sum + clipped) / active as f64)
}

/// Median (midpoint for even `n`) or Huber location estimate.
///
/// Huber solves the monotone score equation by bisection on
/// `[min, max]` down to width `1e-10`, then jumps to the exact root of the
/// linear piece when that lowers `|score|`.
pub fn m_estimate(variant: MVariant, data: &[f64]) -> Result<MEstimate> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("data contain non-finite values"));
    }
    let theta_hat = match variant {
        MVariant::Median => {
            let mut s = data.to_vec();
            s.sort_by(f64::total_cmp);
            let n = s.len();
            if n % 2 == 1 {
                s[n / 2]
            } else {
                0.5 * (s[n / 2 - 1] + s[n / 2])
            }
        }
        MVariant::Huber { delta } => {
            if !(delta > 0.0) || !delta.is_finite() {
                return Err(Error::param(format!("huber delta must be positive, got {delta}")));
            }
            let mut lo = data.iter().copied().fold(f64::INFINITY, f64::min);
            let mut hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut mid = 0.5 * (lo + hi);
            while hi - lo > HUBER_TOL {
                let s = score(variant, data, mid);
                if s == 0.0 {
                    break;
                }
                if s > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                let next = 0.5 * (lo + hi);
                if next == mid {
                    break;
                }
                mid = next;
            }
            match huber_linear_root(data, delta, mid) {
                Some(r) if r >= lo && r <= hi && score(variant, data, r).abs() < score(variant, data, mid).abs() => r,
                _ => mid,
            }
        }
    };
    let s = score(variant, data, theta_hat);
    Ok(MEstimate {
        variant,
        n: data.len(),
        theta_hat,
        residual_score: s / data.len() as f64,
        abs_score_sum: s.abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceResult {
    pub grid: Vec<f64>,
    /// `n^{-1/2} sum_i (1{x1_i <= theta} - 1{x2_i <= theta})` per grid point.
    pub values: Vec<f64>,
    pub statistic: f64,
    pub argmax: f64,
    pub argmax_index: usize,
}

impl DominanceResult {
    /// `theta,value`
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "theta,value")?;
        for (t, v) in self.grid.iter().zip(&self.values) {
            writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*v))?;
        }
        Ok(())
    }
}

/// `sup_theta n^{-1/2} sum_i f_theta(xi_i)` over `grid`, ties going to the
/// lowest grid index.
pub fn dominance_stat(x1: &[f64], x2: &[f64], grid: &[f64]) -> Result<DominanceResult> {
    if x1.len() != x2.len() {
        return Err(Error::LengthMismatch(x1.len(), x2.len()));
    }
    if x1.is_empty() {
        return Err(Error::EmptyData);
    }
    if grid.is_empty() {
        return Err(Error::param("theta grid is empty"));
    }
    let sort = |x: &[f64]| {
        let mut s = x.to_vec();
        s.sort_by(f64::total_cmp);
        s
    };
    let (s1, s2) = (sort(x1), sort(x2));
    let root_n = (x1.len() as f64).sqrt();
    let values: Vec<f64> = grid
        .iter()
        .map(|&t| {
            let c1 = s1.partition_point(|&x| x <= t) as f64;
            let c2 = s2.partition_point(|&x| x <= t) as f64;
            (c1 - c2) / root_n
        })
        .collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    Ok(DominanceResult {
        grid: grid.to_vec(),
        statistic: values[best],
        argmax: grid[best],
        argmax_index: best,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantilogram_on_constant_series() {
        let r = sample_quantilogram(&[2.0; 10], 0.3, 1, 2.0, |_| 0.0).unwrap();
        assert_eq!(r.theta_hat, 2.0);
        assert!((r.statistic - 0.09).abs() < 1e-15);
        assert!(sample_quantilogram(&[1.0, 2.0], 0.3, 2, 0.0, |_| 0.0).is_err());
    }

    #[test]
    fn quantile_is_type_one() {
        let d = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(empirical_quantile(&d, 0.2).unwrap(), 1.0);
        assert_eq!(empirical_quantile(&d, 0.21).unwrap(), 2.0);
        assert_eq!(empirical_quantile(&d, 1.0).unwrap(), 5.0);
    }

    #[test]
    fn median_examples() {
        let m = m_estimate(MVariant::Median, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.theta_hat, 2.0);
        assert_eq!(m.abs_score_sum, 0.0);
        assert_eq!(m_estimate(MVariant::Median, &[4.0, 1.0, 3.0, 2.0]).unwrap().theta_hat, 2.5);
        assert!(m_estimate(MVariant::Median, &[]).is_err());
    }

    #[test]
    fn huber_symmetric_and_skewed() {
        let data = [3.0, 4.5, 5.0, 5.5, 7.0, 2.0, 8.0];
        let h = m_estimate(MVariant::Huber { delta: 1.0 }, &data).unwrap();
        assert!((h.theta_hat - 5.0).abs() <= 1e-10);
        let skew = [0.0, 0.1, 0.3, 0.4, 5.0, 9.0, 0.2];
        let h = m_estimate(MVariant::Huber { delta: 0.5 }, &skew).unwrap();
        assert!(h.abs_score_sum <= 1e-8 * skew.len() as f64, "{h:?}");
        assert!(m_estimate(MVariant::Huber { delta: 0.0 }, &skew).is_err());
    }

    #[test]
    fn dominance_examples() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let grid: Vec<f64> = (0..21).map(|i| -1.5 + 0.15 * i as f64).collect();
        let same = dominance_stat(&x, &x, &grid).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.argmax_index, 0);
        let up: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        let shifted = dominance_stat(&up, &x, &grid).unwrap();
        assert!(shifted.values.iter().all(|&v| v <= 0.0));
        assert!(dominance_stat(&x, &x[1..], &grid).is_err());
    }

    proptest! {
        #[test]
        fn median_is_equivariant(data in prop::collection::vec(-100.0..100.0f64, 1..40), c in -50.0..50.0f64) {
            let a = m_estimate(MVariant::Median, &data).unwrap().theta_hat;
            let shifted: Vec<f64> = data.iter().map(|x| x + c).collect();
            let b = m_estimate(MVariant::Median, &shifted).unwrap().theta_hat;
            // exact when the shift itself is exact in floating point
            prop_assert!((b - (a + c)).abs() <= 1e-12 * (1.0 + a.abs() + c.abs()));
            let m = m_estimate(MVariant::Median, &data).unwrap();
            prop_assert!(m.abs_score_sum <= 1.0 || data.len() % 2 == 0 && m.abs_score_sum <= 2.0);
        }

        #[test]
        fn huber_stays_in_range(data in prop::collection::vec(-10.0..10.0f64, 1..60), delta in 0.05..3.0f64) {
            let h = m_estimate(MVariant::Huber { delta }, &data).unwrap();
            let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(h.theta_hat >= lo && h.theta_hat <= hi);
            prop_assert!(h.abs_score_sum <= 1e-8 * data.len() as f64);
        }

        #[test]
        fn quantilogram_identity(data in prop::collection::vec(-3.0..3.0f64, 3..80), alpha in 0.05..0.95f64, ta in -1.0..1.0f64) {
            let r = sample_quantilogram(&data, alpha, 1, ta, |t| 0.1 * t).unwrap();
            let scale = 1.0 + r.scaled.abs() + r.drift.abs() + r.nu_theta_alpha.abs() + r.remainder.abs() + r.centering.abs();
            prop_assert!(r.identity_residual().abs() <= 1e-12 * scale);
        }

        #[test]
        fn dominance_invariant_under_monotone_maps(
            pairs in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 1..60),
            grid in prop::collection::vec(-3.0..3.0f64, 1..20),
        ) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = dominance_stat(&a, &b, &grid).unwrap();
            let g = |v: &f64| v.exp();
            let ta: Vec<f64> = a.iter().map(g).collect();
            let tb: Vec<f64> = b.iter().map(g).collect();
            let tg: Vec<f64> = grid.iter().map(g).collect();
            let mapped = dominance_stat(&ta, &tb, &tg).unwrap();
            prop_assert_eq!(&base.values, &mapped.values);
            prop_assert!(base.values.iter().all(|v| *v <= base.statistic));
        }
    }
}
