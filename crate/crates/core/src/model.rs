//! Physical parameters shared by the reference solver and the reduced model.

use crate::error::{Error, Result};

/// Which G-equation is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    /// Curvature linearized into `d S_l ΔG`.
    Viscous,
    /// Full mean-curvature term `d S_l |∇G| ∇·(∇G/|∇G|)`.
    Curvature,
}

impl std::str::FromStr for Equation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "viscous" => Ok(Equation::Viscous),
            "curvature" => Ok(Equation::Curvature),
            other => Err(Error::Config(format!("unknown equation {other:?}"))),
        }
    }
}

impl Equation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Equation::Viscous => "viscous",
            Equation::Curvature => "curvature",
        }
    }
}

/// Markstein number, laminar speed and propagation direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontParams {
    pub d: f64,
    pub s_l: f64,
    pub p: [f64; 2],
}

impl FrontParams {
    pub fn new(d: f64, s_l: f64, p: [f64; 2]) -> Result<Self> {
        let params = Self { d, s_l, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d.is_finite() && self.d >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "d must be nonnegative, got {}",
                self.d
            )));
        }
        if !(self.s_l.is_finite() && self.s_l > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "s_l must be positive, got {}",
                self.s_l
            )));
        }
        let norm = self.p[0].hypot(self.p[1]);
        if !((norm - 1.0).abs() <= 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "propagation direction must be a unit vector, |p| = {norm}"
            )));
        }
        Ok(())
    }

    /// `∫ P·x dx` over the unit square.
    pub fn planar_offset(&self) -> f64 {
        0.5 * (self.p[0] + self.p[1])
    }
}
