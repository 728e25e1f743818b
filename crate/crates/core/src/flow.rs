//! Incompressible cellular velocity fields.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowSpec {
    /// `V = ∇⊥H` with `H = A/(2π) sin(2πx) sin(2πy)`.
    Steady { amplitude: f64 },
    /// `A (cos 2πy, cos 2πx) + Aθ cos(2πt) (sin 2πy, sin 2πx)`.
    TimePeriodic { amplitude: f64, theta: f64 },
}

/// Velocity components sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySample {
    pub v1: ScalarField,
    pub v2: ScalarField,
}

impl VelocitySample {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            v1: ScalarField::zeros(grid),
            v2: ScalarField::zeros(grid),
        }
    }

    /// `base + w · pert`, nodewise.
    pub fn combine(base: &VelocitySample, w: f64, pert: &VelocitySample) -> Self {
        let mut out = base.clone();
        out.v1.axpy(w, &pert.v1);
        out.v2.axpy(w, &pert.v2);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.v1.max_abs().max(self.v2.max_abs())
    }
}

impl FlowSpec {
    pub fn steady(amplitude: f64) -> Result<Self> {
        let f = FlowSpec::Steady { amplitude };
        f.validate()?;
        Ok(f)
    }

    pub fn time_periodic(amplitude: f64, theta: f64) -> Result<Self> {
        let f = FlowSpec::TimePeriodic { amplitude, theta };
        f.validate()?;
        Ok(f)
    }

    /// The zero flow.
    pub fn still() -> Self {
        FlowSpec::Steady { amplitude: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, theta) = match *self {
            FlowSpec::Steady { amplitude } => (amplitude, 0.0),
            FlowSpec::TimePeriodic { amplitude, theta } => (amplitude, theta),
        };
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "flow amplitude must be nonnegative, got {a}"
            )));
        }
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "theta must be nonnegative, got {theta}"
            )));
        }
        Ok(())
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            FlowSpec::Steady { amplitude } | FlowSpec::TimePeriodic { amplitude, .. } => amplitude,
        }
    }

    pub fn theta(&self) -> f64 {
        match *self {
            FlowSpec::Steady { .. } => 0.0,
            FlowSpec::TimePeriodic { theta, .. } => theta,
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, FlowSpec::TimePeriodic { theta, .. } if *theta != 0.0)
    }

    /// Uniform bound `A (1 + θ)` on each velocity component.
    pub fn component_bound(&self) -> f64 {
        self.amplitude() * (1.0 + self.theta())
    }

    pub fn velocity(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let (x, y) = (x.rem_euclid(1.0), y.rem_euclid(1.0));
        match *self {
            FlowSpec::Steady { amplitude: a } => {
                let (sx, cx) = (TAU * x).sin_cos();
                let (sy, cy) = (TAU * y).sin_cos();
                (-a * sx * cy, a * cx * sy)
            }
            FlowSpec::TimePeriodic { amplitude: a, theta } => {
                let (sx, cx) = (TAU * x).sin_cos();
                let (sy, cy) = (TAU * y).sin_cos();
                let w = a * theta * time_weight(t);
                (a * cy + w * sy, a * cx + w * sx)
            }
        }
    }

    /// Nodewise evaluation at time `t`.
    pub fn sample_on_grid(&self, grid: GridSpec, t: f64) -> VelocitySample {
        let v1 = ScalarField::from_fn(grid, |x, y| self.velocity(x, y, t).0);
        let v2 = ScalarField::from_fn(grid, |x, y| self.velocity(x, y, t).1);
        VelocitySample { v1, v2 }
    }

    /// Splits the sampled flow as `base + cos(2πt) · pert`; exact for both
    /// variants. `pert` is `None` when the flow is steady in time.
    pub fn affine_samples(&self, grid: GridSpec) -> (VelocitySample, Option<VelocitySample>) {
        match *self {
            FlowSpec::Steady { .. } => (self.sample_on_grid(grid, 0.0), None),
            FlowSpec::TimePeriodic { amplitude, theta } => {
                let base = FlowSpec::TimePeriodic {
                    amplitude,
                    theta: 0.0,
                }
                .sample_on_grid(grid, 0.0);
                if theta == 0.0 {
                    return (base, None);
                }
                let s = amplitude * theta;
                let v1 = ScalarField::from_fn(grid, |_, y| s * (TAU * y).sin());
                let v2 = ScalarField::from_fn(grid, |x, _| s * (TAU * x).sin());
                (base, Some(VelocitySample { v1, v2 }))
            }
        }
    }
}

/// `cos(2πt)`, the time modulation of the periodic perturbation.
pub fn time_weight(t: f64) -> f64 {
    (TAU * t.rem_euclid(1.0)).cos()
}

/// Samples a flow at successive times, reusing the affine split so each
/// time costs one pass over the grid.
#[derive(Debug, Clone)]
pub struct FlowSampler {
    base: VelocitySample,
    pert: Option<VelocitySample>,
    cached_t: Option<f64>,
    current: VelocitySample,
}

impl FlowSampler {
    pub fn new(flow: &FlowSpec, grid: GridSpec) -> Self {
        let (base, pert) = flow.affine_samples(grid);
        let current = base.clone();
        Self {
            base,
            pert,
            cached_t: None,
            current,
        }
    }

    pub fn is_steady(&self) -> bool {
        self.pert.is_none()
    }

    pub fn at(&mut self, t: f64) -> &VelocitySample {
        if let Some(pert) = &self.pert {
            if self.cached_t != Some(t) {
                self.current = VelocitySample::combine(&self.base, time_weight(t), pert);
                self.cached_t = Some(t);
            }
        }
        &self.current
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steady_examples() {
        let f = FlowSpec::steady(4.0).unwrap();
        assert_eq!(f.velocity(0.0, 0.0, 0.0), (0.0, 0.0));
        let (a, b) = f.velocity(0.25, 0.25, 0.0);
        assert!(a.abs() < 1e-14 && b.abs() < 1e-14);
    }

    #[test]
    fn time_periodic_perturbation_vanishes_at_quarter_period() {
        let f = FlowSpec::time_periodic(4.0, 1.0).unwrap();
        for &(x, y) in &[(0.1, 0.7), (0.33, 0.2), (0.9, 0.05)] {
            let (v1, v2) = f.velocity(x, y, 0.25);
            let b1 = 4.0 * (TAU * y).cos();
            let b2 = 4.0 * (TAU * x).cos();
            assert!((v1 - b1).abs() < 1e-14 && (v2 - b2).abs() < 1e-14);
        }
    }

    #[test]
    fn theta_zero_equals_base() {
        let f = FlowSpec::time_periodic(4.0, 0.0).unwrap();
        let g = GridSpec::new(16).unwrap();
        let s0 = f.sample_on_grid(g, 0.0);
        for t in [0.1, 0.37, 0.5, 2.9] {
            assert_eq!(f.sample_on_grid(g, t), s0);
        }
    }

    #[test]
    fn steady_sup_norm() {
        let g = GridSpec::new(80).unwrap();
        let s = FlowSpec::steady(4.0).unwrap().sample_on_grid(g, 0.0);
        assert!((s.max_abs() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn discrete_divergence_is_negligible() {
        let g = GridSpec::new(80).unwrap();
        for f in [
            FlowSpec::steady(4.0).unwrap(),
            FlowSpec::time_periodic(4.0, 1.0).unwrap(),
        ] {
            for t in [0.0, 0.3] {
                let s = f.sample_on_grid(g, t);
                let (d1, _) = s.v1.gradient_c4();
                let (_, d2) = s.v2.gradient_c4();
                assert!((&d1 + &d2).max_abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn periodic_in_space_and_time() {
        let f = FlowSpec::time_periodic(4.0, 0.7).unwrap();
        let s = FlowSpec::steady(3.0).unwrap();
        for &(x, y, t) in &[(0.125, 0.5, 0.25), (0.75, 0.25, 0.5)] {
            assert_eq!(f.velocity(x + 1.0, y, t), f.velocity(x, y, t));
            assert_eq!(f.velocity(x, y + 1.0, t), f.velocity(x, y, t));
            assert_eq!(f.velocity(x, y, t + 1.0), f.velocity(x, y, t));
            assert_eq!(s.velocity(x + 1.0, y, t), s.velocity(x, y, t));
        }
    }

    #[test]
    fn component_bound_holds() {
        let g = GridSpec::new(32).unwrap();
        let f = FlowSpec::time_periodic(4.0, 1.0).unwrap();
        for t in [0.0, 0.1, 0.5, 0.77] {
            assert!(f.sample_on_grid(g, t).max_abs() <= f.component_bound() + 1e-12);
        }
    }

    #[test]
    fn sampler_matches_direct_sampling() {
        let g = GridSpec::new(16).unwrap();
        let f = FlowSpec::time_periodic(4.0, 1.0).unwrap();
        let mut sampler = FlowSampler::new(&f, g);
        for t in [0.0, 0.13, 0.5] {
            let direct = f.sample_on_grid(g, t);
            let cached = sampler.at(t).clone();
            assert!((&direct.v1 - &cached.v1).max_abs() < 1e-13);
            assert!((&direct.v2 - &cached.v2).max_abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_negative_parameters() {
        assert!(FlowSpec::steady(-1.0).is_err());
        assert!(FlowSpec::time_periodic(1.0, -0.5).is_err());
    }
}
