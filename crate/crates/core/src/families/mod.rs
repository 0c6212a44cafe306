//! Parametric function families `{f_theta : theta in Theta}`, their `rho`
//! pseudometric, bracketing covers and the bracketing integral.

mod cover;
mod integral;
mod rho;

pub use cover::{bracketing_number, build_cover, verify_cover, BracketingCover, CoverCheck, MarginalInfo, DEFAULT_COVER_CAP};
pub use integral::{bracketing_integral, family_bracketing_integral};
pub use rho::{rho, Law, RhoMethod, RhoMetricEstimate, RhoSource};
pub(crate) use rho::pairwise_rho;
#[cfg(test)]
pub(crate) use rho::mean_and_se;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyKind {
    /// `f_theta(x) = 1{x < theta}`
    Indicator,
    /// `f_theta(x1, x2) = (alpha - 1{x1 < theta})(alpha - 1{x2 < theta})`
    Quantilogram { alpha: f64 },
    /// `f_theta(x) = sign(x - theta)`
    Sign,
    /// `f_theta(x) = clamp(x - theta, -delta, delta)`
    Huber { delta: f64 },
    /// `f_theta(x1, x2) = 1{x1 <= theta} - 1{x2 <= theta}`
    DominancePair,
    /// `f_(theta, eta)(y1, z1, y2, z2) = 1{y1 <= z1 eta1 + theta} - 1{y2 <= z2 eta2 + theta}`
    DominanceResidual,
    /// `f_theta(t, c, z) = z 1{t <= c} 1{t <= z'theta}`, `z = (1, z1)`, `|z1| <= z_bound`
    CensoredQr { z_bound: f64 },
}

/// Compact axis-aligned parameter box. A box with `lower == upper` in every
/// coordinate is a singleton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::param("parameter box bounds must be non-empty and of equal length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::param("parameter box needs finite lower <= upper"));
        }
        Ok(ParamBox { lower, upper })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        ParamBox::new(vec![lo], vec![hi])
    }

    pub fn singleton(point: Vec<f64>) -> Result<Self> {
        ParamBox::new(point.clone(), point)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn is_singleton(&self) -> bool {
        (0..self.dim()).all(|j| self.width(j) == 0.0)
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().zip(self.lower.iter().zip(&self.upper)).all(|(t, (l, u))| l <= t && t <= u)
    }

    /// Tensor grid with `points` equally spaced values per non-degenerate
    /// coordinate (endpoints included), in row-major order.
    pub fn grid(&self, points: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|j| {
                if self.width(j) == 0.0 || points <= 1 {
                    vec![self.lower[j]]
                } else {
                    (0..points)
                        .map(|i| {
                            if i + 1 == points {
                                self.upper[j]
                            } else {
                                self.lower[j] + self.width(j) * i as f64 / (points - 1) as f64
                            }
                        })
                        .collect()
                }
            })
            .collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionFamily {
    pub kind: FamilyKind,
    pub theta: ParamBox,
}

impl FunctionFamily {
    pub fn new(kind: FamilyKind, theta: ParamBox) -> Result<Self> {
        let family = FunctionFamily { kind, theta };
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            FamilyKind::Quantilogram { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                return Err(Error::param(format!("quantilogram alpha must lie in (0, 1), got {alpha}")));
            }
            FamilyKind::Huber { delta } if !(delta > 0.0) || !delta.is_finite() => {
                return Err(Error::param(format!("huber delta must be positive, got {delta}")));
            }
            FamilyKind::CensoredQr { z_bound } if !(z_bound > 0.0) || !z_bound.is_finite() => {
                return Err(Error::param(format!("censored-qr z_bound must be positive, got {z_bound}")));
            }
            _ => {}
        }
        ParamBox::new(self.theta.lower.clone(), self.theta.upper.clone())?;
        if self.theta.dim() != self.param_dim() {
            return Err(Error::DimensionMismatch { expected: self.param_dim(), got: self.theta.dim() });
        }
        Ok(())
    }

    pub fn param_dim(&self) -> usize {
        match self.kind {
            FamilyKind::DominanceResidual => 3,
            FamilyKind::CensoredQr { .. } => 2,
            _ => 1,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self.kind {
            FamilyKind::Indicator | FamilyKind::Sign | FamilyKind::Huber { .. } => 1,
            FamilyKind::Quantilogram { .. } | FamilyKind::DominancePair => 2,
            FamilyKind::DominanceResidual | FamilyKind::CensoredQr { .. } => 4,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self.kind {
            FamilyKind::CensoredQr { .. } => 2,
            _ => 1,
        }
    }

    /// Uniform bound `B` on `|f_theta(x)|`, per output coordinate.
    pub fn bound(&self) -> f64 {
        match self.kind {
            FamilyKind::Huber { delta } => delta,
            FamilyKind::CensoredQr { z_bound } => z_bound.max(1.0),
            _ => 1.0,
        }
    }

    /// Families built from indicators of half-lines.
    pub fn is_indicator_type(&self) -> bool {
        !matches!(self.kind, FamilyKind::Huber { .. })
    }

    /// Unchecked evaluation of output coordinate `coord`.
    #[inline]
    pub fn value(&self, theta: &[f64], x: &[f64], coord: usize) -> f64 {
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        match self.kind {
            FamilyKind::Indicator => ind(x[0] < theta[0]),
            FamilyKind::Quantilogram { alpha } => {
                (alpha - ind(x[0] < theta[0])) * (alpha - ind(x[1] < theta[0]))
            }
            FamilyKind::Sign => {
                let d = x[0] - theta[0];
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            FamilyKind::Huber { delta } => (x[0] - theta[0]).clamp(-delta, delta),
            FamilyKind::DominancePair => ind(x[0] <= theta[0]) - ind(x[1] <= theta[0]),
            FamilyKind::DominanceResidual => {
                ind(x[0] <= x[1] * theta[1] + theta[0]) - ind(x[2] <= x[3] * theta[2] + theta[0])
            }
            FamilyKind::CensoredQr { .. } => {
                let (t, c) = (x[0], x[1]);
                let index = x[2] * theta[0] + x[3] * theta[1];
                if t <= c && t <= index {
                    x[2 + coord]
                } else {
                    0.0
                }
            }
        }
    }

    fn check_dims(&self, theta: &[f64], x: &[f64]) -> Result<()> {
        if theta.len() != self.param_dim() {
            return Err(Error::DimensionMismatch { expected: self.param_dim(), got: theta.len() });
        }
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    /// `f_theta(x)` for real-valued families.
    pub fn evaluate(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        self.check_dims(theta, x)?;
        if self.output_dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.output_dim() });
        }
        Ok(self.value(theta, x, 0))
    }

    /// `f_theta(x)` as a vector (length 1 for real-valued families).
    pub fn evaluate_vector(&self, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(theta, x)?;
        Ok((0..self.output_dim()).map(|j| self.value(theta, x, j)).collect())
    }
}
