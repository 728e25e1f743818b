//! Reference finite-difference solver for the periodic cell problem.
//!
//! The unknown is the periodic part `u` of `G = P·x + u`. `P` enters only as
//! an offset on the one-sided derivatives and as the forcing `V·P`; the
//! Laplacian of `G` equals that of `u`.

pub mod hamiltonian;
pub mod krylov;
pub mod weno;

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::flow::{FlowSampler, FlowSpec, VelocitySample};
use crate::grid::{GridSpec, ScalarField};
use crate::model::{Equation, FrontParams};
use crate::snapshots::SnapshotSet;

pub use hamiltonian::{godunov_hamiltonian, godunov_normal};
pub use weno::{weno5_pair, Axis, WenoPair};

/// Denominator guard for the curvature quotient.
pub const CURVATURE_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ExplicitRk3,
    SemiImplicit,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rk3" | "explicit_rk3" | "explicit" => Ok(Scheme::ExplicitRk3),
            "semi_implicit" | "semiimplicit" | "implicit" => Ok(Scheme::SemiImplicit),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::ExplicitRk3 => "rk3",
            Scheme::SemiImplicit => "semi_implicit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub params: FrontParams,
    pub dt: f64,
    pub scheme: Scheme,
    pub equation: Equation,
    pub flow: FlowSpec,
    pub grid: GridSpec,
}

impl FdConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.flow.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        self.check_cfl()
    }

    /// Each time-step restriction as `(name, limit)`; the step must satisfy
    /// `dt < limit` (or `dt <= limit` for the diffusive bound).
    pub fn step_limits(&self) -> Vec<(&'static str, f64, bool)> {
        let h = self.grid.spacing();
        let s_l = self.params.s_l;
        let d = self.params.d;
        let v = self.flow.component_bound();
        let advective = 1.0 / (2.0 * (s_l + v) / h);
        match (self.equation, self.scheme) {
            (Equation::Viscous, Scheme::ExplicitRk3) => {
                let mut limits = vec![("advective CFL (S_l+|V|)/h", advective, true)];
                if d > 0.0 {
                    limits.push(("diffusive bound h^2/(8 d S_l)", h * h / (8.0 * d * s_l), false));
                }
                limits
            }
            (Equation::Viscous, Scheme::SemiImplicit) => {
                vec![("normal-speed CFL 2 S_l/h", 1.0 / (2.0 * s_l / h), true)]
            }
            (Equation::Curvature, Scheme::ExplicitRk3) => vec![(
                "curvature CFL (S_l+|V|)/h + 4 S_l d/h^2",
                1.0 / (2.0 * (s_l + v) / h + 4.0 * s_l * d / (h * h)),
                true,
            )],
            (Equation::Curvature, Scheme::SemiImplicit) => {
                vec![("advective CFL (S_l+|V|)/h", advective, true)]
            }
        }
    }

    pub fn check_cfl(&self) -> Result<()> {
        for (bound, limit, strict) in self.step_limits() {
            let ok = if strict {
                self.dt < limit
            } else {
                self.dt <= limit
            };
            if !ok {
                return Err(Error::Cfl {
                    bound,
                    limit,
                    dt: self.dt,
                });
            }
        }
        Ok(())
    }

    /// Smallest number of equal substeps splitting `interval` so every
    /// step restriction holds.
    pub fn substeps_for(&self, interval: f64) -> usize {
        let mut k = 1usize;
        loop {
            let trial = FdConfig {
                dt: interval / k as f64,
                ..*self
            };
            if trial.check_cfl().is_ok() {
                return k;
            }
            k += 1;
        }
    }
}

/// Central second-order derivatives of `G = P·x + u` at one node.
#[derive(Debug, Clone, Copy)]
struct CentralDerivs {
    gx: f64,
    gy: f64,
    gxx: f64,
    gyy: f64,
    gxy: f64,
}

fn central_derivs(u: &[f64], g: GridSpec, p: [f64; 2], i: usize, j: usize) -> CentralDerivs {
    let n = g.n_cells();
    let h = g.spacing();
    let im = g.wrap(i as isize - 1) * n;
    let ip = g.wrap(i as isize + 1) * n;
    let jm = g.wrap(j as isize - 1);
    let jp = g.wrap(j as isize + 1);
    let row = i * n;
    let c = u[row + j];
    CentralDerivs {
        gx: (u[ip + j] - u[im + j]) / (2.0 * h) + p[0],
        gy: (u[row + jp] - u[row + jm]) / (2.0 * h) + p[1],
        gxx: (u[ip + j] - 2.0 * c + u[im + j]) / (h * h),
        gyy: (u[row + jp] - 2.0 * c + u[row + jm]) / (h * h),
        gxy: (u[ip + jp] - u[ip + jm] - u[im + jp] + u[im + jm]) / (4.0 * h * h),
    }
}

/// `|∇G| ∇·(∇G/|∇G|) = (G_y² G_xx − 2 G_x G_y G_xy + G_x² G_yy) / (G_x² + G_y²)`
/// with second-order central differences and a guarded denominator.
pub fn curvature_term(u: &ScalarField, p: [f64; 2]) -> ScalarField {
    let g = u.grid();
    let n = g.n_cells();
    let vals = u.values();
    let mut out = vec![0.0; g.len()];
    for i in 0..n {
        for j in 0..n {
            let d = central_derivs(vals, g, p, i, j);
            out[i * n + j] = (d.gy * d.gy * d.gxx - 2.0 * d.gx * d.gy * d.gxy + d.gx * d.gx * d.gyy)
                / (d.gx * d.gx + d.gy * d.gy + CURVATURE_GUARD);
        }
    }
    ScalarField::from_values(g, out).expect("grid-sized buffer")
}

/// `Δ∞G = (G_x² G_xx + 2 G_x G_y G_xy + G_y² G_yy) / (G_x² + G_y²)`, central.
pub fn infinity_laplacian(u: &ScalarField, p: [f64; 2]) -> ScalarField {
    let g = u.grid();
    let n = g.n_cells();
    let vals = u.values();
    let mut out = vec![0.0; g.len()];
    for i in 0..n {
        for j in 0..n {
            let d = central_derivs(vals, g, p, i, j);
            out[i * n + j] = (d.gx * d.gx * d.gxx + 2.0 * d.gx * d.gy * d.gxy + d.gy * d.gy * d.gyy)
                / (d.gx * d.gx + d.gy * d.gy + CURVATURE_GUARD);
        }
    }
    ScalarField::from_values(g, out).expect("grid-sized buffer")
}

/// Stepper state for one configuration.
#[derive(Debug, Clone)]
pub struct FdSolver {
    cfg: FdConfig,
    sampler: FlowSampler,
    wx_m: Vec<f64>,
    wx_p: Vec<f64>,
    wy_m: Vec<f64>,
    wy_p: Vec<f64>,
    linear_iterations: usize,
}

impl FdSolver {
    pub fn new(cfg: FdConfig) -> Result<Self> {
        cfg.validate()?;
        let len = cfg.grid.len();
        Ok(Self {
            cfg,
            sampler: FlowSampler::new(&cfg.flow, cfg.grid),
            wx_m: vec![0.0; len],
            wx_p: vec![0.0; len],
            wy_m: vec![0.0; len],
            wy_p: vec![0.0; len],
            linear_iterations: 0,
        })
    }

    pub fn config(&self) -> &FdConfig {
        &self.cfg
    }

    /// Krylov iterations spent so far by the semi-implicit steppers.
    pub fn linear_iterations(&self) -> usize {
        self.linear_iterations
    }

    fn weno_all(&mut self, u: &ScalarField) {
        let g = self.cfg.grid;
        weno::weno5_pair_into(g, u.values(), Axis::X, &mut self.wx_m, &mut self.wx_p);
        weno::weno5_pair_into(g, u.values(), Axis::Y, &mut self.wy_m, &mut self.wy_p);
    }

    /// Nodewise Godunov Hamiltonian of `G = P·x + u` at time `t`.
    pub fn hamiltonian(&mut self, u: &ScalarField, t: f64) -> ScalarField {
        self.weno_all(u);
        let [px, py] = self.cfg.params.p;
        let s_l = self.cfg.params.s_l;
        let vel = self.sampler.at(t);
        let (v1, v2) = (vel.v1.values(), vel.v2.values());
        let out: Vec<f64> = (0..u.values().len())
            .map(|k| {
                godunov_hamiltonian(
                    self.wx_m[k] + px,
                    self.wx_p[k] + px,
                    self.wy_m[k] + py,
                    self.wy_p[k] + py,
                    v1[k],
                    v2[k],
                    s_l,
                )
            })
            .collect();
        ScalarField::from_values(u.grid(), out).expect("grid-sized buffer")
    }

    /// `-H(G) + d S_l Δu`
    pub fn rhs_explicit_viscous(&mut self, u: &ScalarField, t: f64) -> ScalarField {
        let mut out = self.hamiltonian(u, t);
        let ds = self.cfg.params.d * self.cfg.params.s_l;
        let lap = u.laplacian_c2();
        for (o, l) in out.values_mut().iter_mut().zip(lap.values()) {
            *o = -*o + ds * l;
        }
        out
    }

    /// `-H(G) + d S_l |∇G| ∇·(∇G/|∇G|)`
    pub fn curvature_rhs(&mut self, u: &ScalarField, t: f64) -> ScalarField {
        let mut out = self.hamiltonian(u, t);
        let ds = self.cfg.params.d * self.cfg.params.s_l;
        let kappa = curvature_term(u, self.cfg.params.p);
        for (o, k) in out.values_mut().iter_mut().zip(kappa.values()) {
            *o = -*o + ds * k;
        }
        out
    }

    pub fn rhs(&mut self, u: &ScalarField, t: f64) -> ScalarField {
        match self.cfg.equation {
            Equation::Viscous => self.rhs_explicit_viscous(u, t),
            Equation::Curvature => self.curvature_rhs(u, t),
        }
    }

    /// Three-stage TVD Runge-Kutta step (Gottlieb-Shu coefficients).
    pub fn step_rk3(&mut self, u: &ScalarField, t: f64) -> Result<ScalarField> {
        let dt = self.cfg.dt;
        let l0 = self.rhs(u, t);
        let mut u1 = u.clone();
        u1.axpy(dt, &l0);
        let l1 = self.rhs(&u1, t + dt);
        let mut u2 = u1;
        u2.axpy(dt, &l1);
        let u2 = u.zip_map(&u2, |a, b| 0.75 * a + 0.25 * b);
        let l2 = self.rhs(&u2, t + 0.5 * dt);
        let mut u3 = u2;
        u3.axpy(dt, &l2);
        Ok(u.zip_map(&u3, |a, b| a / 3.0 + 2.0 / 3.0 * b))
    }

    /// Applies `x + dt V·∇_c2 x − dt d S_l Δ_c2 x`.
    pub fn implicit_operator(&self, vel: &VelocitySample, x: &[f64], out: &mut [f64]) {
        apply_implicit(self.cfg.grid, self.cfg.dt, self.cfg.params, vel, x, out)
    }

    fn implicit_solve(&mut self, t_next: f64, b: Vec<f64>) -> Result<ScalarField> {
        let cfg = self.cfg;
        let h = cfg.grid.spacing();
        let diag = 1.0 + 4.0 * cfg.dt * cfg.params.d * cfg.params.s_l / (h * h);
        let vel = self.sampler.at(t_next).clone();
        let mut x = b.clone();
        let stats = krylov::bicgstab(
            |x, out| apply_implicit(cfg.grid, cfg.dt, cfg.params, &vel, x, out),
            diag,
            &b,
            &mut x,
        )?;
        self.linear_iterations += stats.iterations;
        ScalarField::from_values(cfg.grid, x)
    }

    /// Explicit part shared by the semi-implicit steppers:
    /// `u − dt (S_l |∇G|_Godunov + V(t+dt)·P)`.
    fn semi_implicit_rhs(&mut self, u: &ScalarField, t: f64) -> Vec<f64> {
        self.weno_all(u);
        let cfg = self.cfg;
        let [px, py] = cfg.params.p;
        let s_l = cfg.params.s_l;
        let dt = cfg.dt;
        let vel = self.sampler.at(t + dt);
        let (v1, v2) = (vel.v1.values(), vel.v2.values());
        u.values()
            .iter()
            .enumerate()
            .map(|(k, &uk)| {
                let nor = godunov_normal(
                    self.wx_m[k] + px,
                    self.wx_p[k] + px,
                    self.wy_m[k] + py,
                    self.wy_p[k] + py,
                    s_l,
                );
                uk - dt * (nor + v1[k] * px + v2[k] * py)
            })
            .collect()
    }

    /// Backward Euler for convection and diffusion, forward for the normal
    /// term.
    pub fn step_semi_implicit(&mut self, u: &ScalarField, t: f64) -> Result<ScalarField> {
        let b = self.semi_implicit_rhs(u, t);
        self.implicit_solve(t + self.cfg.dt, b)
    }

    /// As [`Self::step_semi_implicit`], with the curvature split into an
    /// implicit Laplacian and an explicit `Δ∞`.
    pub fn step_curvature_semi_implicit(
        &mut self,
        u: &ScalarField,
        t: f64,
    ) -> Result<ScalarField> {
        let mut b = self.semi_implicit_rhs(u, t);
        let coef = self.cfg.dt * self.cfg.params.d * self.cfg.params.s_l;
        let dinf = infinity_laplacian(u, self.cfg.params.p);
        for (bk, dk) in b.iter_mut().zip(dinf.values()) {
            *bk -= coef * dk;
        }
        self.implicit_solve(t + self.cfg.dt, b)
    }

    pub fn step(&mut self, u: &ScalarField, t: f64) -> Result<ScalarField> {
        match (self.cfg.scheme, self.cfg.equation) {
            (Scheme::ExplicitRk3, _) => self.step_rk3(u, t),
            (Scheme::SemiImplicit, Equation::Viscous) => self.step_semi_implicit(u, t),
            (Scheme::SemiImplicit, Equation::Curvature) => self.step_curvature_semi_implicit(u, t),
        }
    }

    /// Advances `n_steps` steps from time `t0`, checking finiteness after
    /// every step.
    pub fn advance(&mut self, u: &ScalarField, t0: f64, n_steps: usize) -> Result<ScalarField> {
        let mut cur = u.clone();
        for s in 0..n_steps {
            cur = self.step(&cur, t0 + s as f64 * self.cfg.dt)?;
            if !cur.is_finite() {
                return Err(Error::NonFiniteStep { step: s + 1 });
            }
        }
        Ok(cur)
    }
}

fn apply_implicit(
    g: GridSpec,
    dt: f64,
    params: FrontParams,
    vel: &VelocitySample,
    x: &[f64],
    out: &mut [f64],
) {
    let n = g.n_cells();
    let h = g.spacing();
    let cd = dt / (2.0 * h);
    let dd = dt * params.d * params.s_l / (h * h);
    let (v1, v2) = (vel.v1.values(), vel.v2.values());
    for i in 0..n {
        let im = g.wrap(i as isize - 1) * n;
        let ip = g.wrap(i as isize + 1) * n;
        let row = i * n;
        for j in 0..n {
            let jm = if j == 0 { n - 1 } else { j - 1 };
            let jp = if j + 1 == n { 0 } else { j + 1 };
            let k = row + j;
            let (xe, xw, xn, xs) = (x[ip + j], x[im + j], x[row + jp], x[row + jm]);
            out[k] = x[k] + cd * (v1[k] * (xe - xw) + v2[k] * (xn - xs))
                - dd * (xe + xw + xn + xs - 4.0 * x[k]);
        }
    }
}

/// Output of [`solve_reference`].
#[derive(Debug, Clone)]
pub struct ReferenceRun {
    pub snapshots: SnapshotSet,
    pub final_field: ScalarField,
    pub steps: usize,
    /// Wall-clock time of the stepping loop only.
    pub elapsed: Duration,
    pub linear_iterations: usize,
}

/// Integrates from planar initial data `u = 0` to `t_final`, recording a
/// snapshot every `record_stride` steps (and at `t = 0`).
pub fn solve_reference(cfg: &FdConfig, t_final: f64, record_stride: usize) -> Result<ReferenceRun> {
    solve_from(cfg, &ScalarField::zeros(cfg.grid), 0.0, t_final, record_stride)
}

/// As [`solve_reference`] from arbitrary initial data `u0` at time `t0`.
pub fn solve_from(
    cfg: &FdConfig,
    u0: &ScalarField,
    t0: f64,
    t_final: f64,
    record_stride: usize,
) -> Result<ReferenceRun> {
    if cfg.params.d == 0.0 {
        return Err(Error::Inviscid);
    }
    if record_stride == 0 {
        return Err(Error::InvalidParameter("record_stride must be positive".into()));
    }
    let span = t_final - t0;
    let steps_f = span / cfg.dt;
    let steps = steps_f.round() as usize;
    if !(span > 0.0) || (steps_f - steps as f64).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "time span {span} is not a positive multiple of dt = {}",
            cfg.dt
        )));
    }
    let mut solver = FdSolver::new(*cfg)?;
    let mut snaps = SnapshotSet::new(cfg.grid);
    snaps.push(t0, u0)?;
    let start = Instant::now();
    let mut u = u0.clone();
    for s in 0..steps {
        let t = t0 + s as f64 * cfg.dt;
        u = solver.step(&u, t)?;
        if !u.is_finite() {
            return Err(Error::NonFiniteStep { step: s + 1 });
        }
        if (s + 1) % record_stride == 0 {
            snaps.push(t0 + (s + 1) as f64 * cfg.dt, &u)?;
        }
    }
    let elapsed = start.elapsed();
    Ok(ReferenceRun {
        snapshots: snaps,
        final_field: u,
        steps,
        elapsed,
        linear_iterations: solver.linear_iterations(),
    })
}
