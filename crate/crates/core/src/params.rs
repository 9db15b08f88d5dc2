//! Problem parameters shared by every stage of the pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TflError};

/// Order of accuracy of the underlying classical Laplacian stencil.
///
/// `P2` is the three-point central stencil and serves as the low-order
/// benchmark; `P4`, `P6` and `P8` are the wide high-order stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum SchemeOrder {
    P2,
    P4,
    P6,
    P8,
}

impl SchemeOrder {
    pub const ALL: [SchemeOrder; 4] = [Self::P2, Self::P4, Self::P6, Self::P8];
    pub const HIGH: [SchemeOrder; 3] = [Self::P4, Self::P6, Self::P8];

    pub fn from_u32(p: u32) -> Result<Self> {
        match p {
            2 => Ok(Self::P2),
            4 => Ok(Self::P4),
            6 => Ok(Self::P6),
            8 => Ok(Self::P8),
            other => Err(TflError::UnsupportedSchemeOrder(other)),
        }
    }

    pub fn as_u32(self) -> u32 {
        match self {
            Self::P2 => 2,
            Self::P4 => 4,
            Self::P6 => 6,
            Self::P8 => 8,
        }
    }

    /// One-sided weights `[w_0, w_1, .., w_m]` of the 1-d stencil for `-u''`,
    /// so that `-h^2 u''(x) ≈ w_0 u(x) + Σ_k w_k (u(x - kh) + u(x + kh))`.
    pub fn stencil(self) -> &'static [f64] {
        const P2: [f64; 2] = [2.0, -1.0];
        const P4: [f64; 3] = [30.0 / 12.0, -16.0 / 12.0, 1.0 / 12.0];
        const P6: [f64; 4] = [49.0 / 18.0, -3.0 / 2.0, 3.0 / 20.0, -1.0 / 90.0];
        const P8: [f64; 5] = [
            205.0 / 72.0,
            -8.0 / 5.0,
            1.0 / 5.0,
            -8.0 / 315.0,
            1.0 / 560.0,
        ];
        match self {
            Self::P2 => &P2,
            Self::P4 => &P4,
            Self::P6 => &P6,
            Self::P8 => &P8,
        }
    }

    pub fn half_width(self) -> usize {
        self.stencil().len() - 1
    }
}

impl TryFrom<u32> for SchemeOrder {
    type Error = TflError;

    fn try_from(p: u32) -> Result<Self> {
        Self::from_u32(p)
    }
}

impl From<SchemeOrder> for u32 {
    fn from(p: SchemeOrder) -> u32 {
        p.as_u32()
    }
}

impl fmt::Display for SchemeOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u32())
    }
}

/// Scalar parameters of `(-Δ)^{α/2}_λ u - σ Δu + ν u = f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TflParams {
    /// Fractional power, in `(0, 1) ∪ (1, 2)`.
    pub alpha: f64,
    /// Tempering parameter.
    pub lambda: f64,
    /// Classical diffusion coefficient.
    pub sigma: f64,
    /// Reaction coefficient.
    pub nu: f64,
    pub dim: usize,
    pub order: SchemeOrder,
    /// Spatial step.
    pub h: f64,
}

impl TflParams {
    /// Builds a validated parameter set with `σ = ν = 0`.
    pub fn new(alpha: f64, lambda: f64, dim: usize, order: SchemeOrder, h: f64) -> Result<Self> {
        let params = Self {
            alpha,
            lambda,
            sigma: 0.0,
            nu: 0.0,
            dim,
            order,
            h,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_nu(mut self, nu: f64) -> Result<Self> {
        self.nu = nu;
        self.validate()?;
        Ok(self)
    }

    pub fn with_h(mut self, h: f64) -> Result<Self> {
        self.h = h;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.alpha;
        if !(a.is_finite() && a > 0.0 && a < 2.0 && a != 1.0) {
            return Err(TflError::InvalidParameter {
                name: "alpha",
                value: a,
                reason: "must lie in (0, 1) or (1, 2)",
            });
        }
        for (name, value) in [
            ("lambda", self.lambda),
            ("sigma", self.sigma),
            ("nu", self.nu),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(TflError::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and non-negative",
                });
            }
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(TflError::InvalidParameter {
                name: "h",
                value: self.h,
                reason: "must be finite and positive",
            });
        }
        if !(1..=3).contains(&self.dim) {
            return Err(TflError::UnsupportedDimension(self.dim));
        }
        Ok(())
    }

    /// `(-1)^⌊α⌋`, the sign making the symbol non-negative.
    pub fn branch_sign(&self) -> f64 {
        if self.alpha > 1.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Tempering seen on the unit lattice, `hλ`.
    pub fn scaled_lambda(&self) -> f64 {
        self.h * self.lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_excluded_alpha_values() {
        for alpha in [0.0, 1.0, 2.0, -0.3, 2.5, f64::NAN] {
            assert!(TflParams::new(alpha, 0.5, 1, SchemeOrder::P4, 0.1).is_err());
        }
        assert!(TflParams::new(0.999, 0.5, 1, SchemeOrder::P4, 0.1).is_ok());
    }

    #[test]
    fn rejects_negative_coefficients() {
        let p = TflParams::new(0.5, 0.0, 2, SchemeOrder::P4, 0.1).unwrap();
        assert!(p.with_sigma(-1.0).is_err());
        assert!(p.with_nu(-1e-3).is_err());
        assert!(TflParams::new(0.5, -0.1, 2, SchemeOrder::P4, 0.1).is_err());
        assert!(TflParams::new(0.5, 0.1, 2, SchemeOrder::P4, 0.0).is_err());
        assert!(TflParams::new(0.5, 0.1, 4, SchemeOrder::P4, 0.1).is_err());
    }

    #[test]
    fn stencil_weights_sum_to_zero() {
        for p in SchemeOrder::ALL {
            let w = p.stencil();
            let total = w[0] + 2.0 * w[1..].iter().sum::<f64>();
            assert!(total.abs() < 1e-14, "p = {p}: {total}");
        }
        assert!(SchemeOrder::from_u32(3).is_err());
    }
}
