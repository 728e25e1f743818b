//! Backward-Euler POD-Galerkin solver for the mean-free part and trapezoid
//! recovery of the mean.
//!
//! With `û = Σ a_i ψ_i` each step solves
//! `G(a_k) = M1(t_k) a_k − M2 a_{k−1} − c(t_k) − f(a_k) = 0`
//! by Newton's method with a forward-difference Jacobian. For the curvature
//! equation the bilinear form carries convection only and the curvature
//! production sits in the nonlinear term; there is no coercivity guarantee
//! in that case.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flow::{time_weight, FlowSpec, VelocitySample};
use crate::fd::CURVATURE_GUARD;
use crate::grid::ScalarField;
use crate::model::{Equation, FrontParams};
use crate::pod::PodBasis;

pub const NEWTON_MAX_ITERATIONS: usize = 50;
pub const NEWTON_TOLERANCE: f64 = 1e-10;
pub const JACOBIAN_STEP: f64 = 1e-7;
pub const PIVOT_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RomConfig {
    pub params: FrontParams,
    pub flow: FlowSpec,
    pub equation: Equation,
    pub dt: f64,
}

/// Precomputed Galerkin matrices. Convection and forcing are split as
/// `base + cos(2πt)·pert` for time-periodic flows.
#[derive(Debug, Clone)]
pub struct RomOperators {
    pub dt: f64,
    /// `⟨ψ_i, ψ_j⟩` in L².
    pub m2: DMatrix<f64>,
    /// `∫∇ψ_i·∇ψ_j`.
    pub stiffness: DMatrix<f64>,
    /// `C_ij = ∫(V·∇ψ_j) ψ_i`.
    pub conv_base: DMatrix<f64>,
    pub conv_pert: Option<DMatrix<f64>>,
    /// `∫(V·P) ψ_i`.
    pub forcing_base: DVector<f64>,
    pub forcing_pert: Option<DVector<f64>>,
    /// Coefficient of the stiffness block inside `a(·,·)`: `d S_l` for the
    /// viscous equation, zero for the curvature equation.
    pub diffusion: f64,
}

impl RomOperators {
    /// `M1(t) = M2 + Δt (C(t) + diffusion · K)`, rows indexed by the test
    /// function.
    pub fn m1(&self, t: f64) -> DMatrix<f64> {
        let mut a = self.conv_base.clone();
        if let Some(p) = &self.conv_pert {
            a += p * time_weight(t);
        }
        a += &self.stiffness * self.diffusion;
        &self.m2 + a * self.dt
    }

    /// `c(t)_i = −Δt ⟨V(t)·P, ψ_i⟩`
    pub fn c(&self, t: f64) -> DVector<f64> {
        let mut g = self.forcing_base.clone();
        if let Some(p) = &self.forcing_pert {
            g += p * time_weight(t);
        }
        g * -self.dt
    }
}

fn column_matrix(fields: &[ScalarField]) -> DMatrix<f64> {
    let n = fields[0].values().len();
    let mut m = DMatrix::zeros(n, fields.len());
    for (j, f) in fields.iter().enumerate() {
        m.column_mut(j).copy_from_slice(f.values());
    }
    m
}

fn gram(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.tr_mul(b) / a.nrows() as f64
}

fn convection_block(
    psi: &DMatrix<f64>,
    gx: &DMatrix<f64>,
    gy: &DMatrix<f64>,
    vel: &VelocitySample,
) -> DMatrix<f64> {
    let v1 = DVector::from_column_slice(vel.v1.values());
    let v2 = DVector::from_column_slice(vel.v2.values());
    let mut adv = gx.clone();
    for (j, mut col) in adv.column_iter_mut().enumerate() {
        col.component_mul_assign(&v1);
        col += gy.column(j).component_mul(&v2);
    }
    gram(psi, &adv)
}

fn forcing_vector(psi: &DMatrix<f64>, vel: &VelocitySample, p: [f64; 2]) -> DVector<f64> {
    let vp: Vec<f64> = vel
        .v1
        .values()
        .iter()
        .zip(vel.v2.values())
        .map(|(a, b)| a * p[0] + b * p[1])
        .collect();
    psi.tr_mul(&DVector::from_vec(vp)) / psi.nrows() as f64
}

/// Assembles all Galerkin matrices once; gradients by fourth-order central
/// differences, integrals by the grid quadrature.
pub fn assemble_operators(basis: &PodBasis, cfg: &RomConfig) -> RomOperators {
    let grid = basis.grid();
    let grads: Vec<(ScalarField, ScalarField)> = basis.psis.iter().map(|p| p.gradient_c4()).collect();
    let psi = column_matrix(&basis.psis);
    let gx = column_matrix(&grads.iter().map(|g| g.0.clone()).collect::<Vec<_>>());
    let gy = column_matrix(&grads.iter().map(|g| g.1.clone()).collect::<Vec<_>>());
    let (base, pert) = cfg.flow.affine_samples(grid);
    let p = cfg.params.p;
    RomOperators {
        dt: cfg.dt,
        m2: gram(&psi, &psi),
        stiffness: gram(&gx, &gx) + gram(&gy, &gy),
        conv_base: convection_block(&psi, &gx, &gy, &base),
        conv_pert: pert.as_ref().map(|v| convection_block(&psi, &gx, &gy, v)),
        forcing_base: forcing_vector(&psi, &base, p),
        forcing_pert: pert.as_ref().map(|v| forcing_vector(&psi, v, p)),
        diffusion: match cfg.equation {
            Equation::Viscous => cfg.params.d * cfg.params.s_l,
            Equation::Curvature => 0.0,
        },
    }
}

/// Nonlinear part of the reduced system and its Jacobian.
pub trait NonlinearTerm {
    fn dim(&self) -> usize;
    /// `f(a)`
    fn eval(&mut self, a: &[f64]) -> DVector<f64>;
    /// `∂f/∂a`
    fn jacobian(&mut self, a: &[f64]) -> DMatrix<f64>;
    /// Both at once; implementations may share the work.
    fn eval_with_jacobian(&mut self, a: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        (self.eval(a), self.jacobian(a))
    }
}

/// `f ≡ 0`
#[derive(Debug, Clone, Copy)]
pub struct NoNonlinearity(pub usize);

impl NonlinearTerm for NoNonlinearity {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&mut self, _a: &[f64]) -> DVector<f64> {
        DVector::zeros(self.0)
    }
    fn jacobian(&mut self, _a: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(self.0, self.0)
    }
}

/// Pointwise derivative fields of `G = P·x + û` over the grid.
#[derive(Debug, Clone)]
struct JetFields {
    gx: Vec<f64>,
    gy: Vec<f64>,
    gxx: Vec<f64>,
    gyy: Vec<f64>,
    gxy: Vec<f64>,
}

impl JetFields {
    fn zeros(n: usize, curvature: bool) -> Self {
        let m = if curvature { n } else { 0 };
        Self {
            gx: vec![0.0; n],
            gy: vec![0.0; n],
            gxx: vec![0.0; m],
            gyy: vec![0.0; m],
            gxy: vec![0.0; m],
        }
    }
}

/// `f_i = −Δt ⟨F(û), ψ_i⟩` with `F = φ − mean(φ)` and
/// `φ = S_l |P + ∇û|` (viscous) or `S_l |P + ∇û| − d S_l |∇G| ∇·(∇G/|∇G|)`
/// (curvature), evaluated over the full grid.
#[derive(Debug, Clone)]
pub struct GalerkinNonlinearity {
    r: usize,
    nodes: usize,
    p: [f64; 2],
    s_l: f64,
    ds: f64,
    dt: f64,
    curvature: bool,
    /// Columns `∂_x ψ_j`, `∂_y ψ_j` and, for curvature, the Hessian entries.
    gx: DMatrix<f64>,
    gy: DMatrix<f64>,
    hess: Option<[DMatrix<f64>; 3]>,
    /// Viscous case with `r <= FUSED_MAX_RANK`: per node `[∂xψ, ∂yψ, ψ]`,
    /// each `r` long, for the single-pass kernels.
    packed: Option<Vec<f64>>,
    psi: DMatrix<f64>,
    psi_sum: DVector<f64>,
    jet: JetFields,
    pert: JetFields,
    phi: DVector<f64>,
    dphi: DMatrix<f64>,
    /// Coefficients and `Q` of the most recent evaluation.
    last: Option<(Vec<f64>, f64)>,
}

impl GalerkinNonlinearity {
    pub fn new(basis: &PodBasis, params: FrontParams, equation: Equation, dt: f64) -> Self {
        let r = basis.r();
        let nodes = basis.grid().len();
        let grads: Vec<(ScalarField, ScalarField)> = basis.psis.iter().map(|p| p.gradient_c4()).collect();
        let curvature = equation == Equation::Curvature;
        let hess = curvature.then(|| {
            let h: Vec<(ScalarField, ScalarField, ScalarField)> =
                basis.psis.iter().map(|p| p.hessian_c4()).collect();
            [
                column_matrix(&h.iter().map(|x| x.0.clone()).collect::<Vec<_>>()),
                column_matrix(&h.iter().map(|x| x.1.clone()).collect::<Vec<_>>()),
                column_matrix(&h.iter().map(|x| x.2.clone()).collect::<Vec<_>>()),
            ]
        });
        let psi = column_matrix(&basis.psis);
        let psi_sum = DVector::from_iterator(r, psi.column_iter().map(|c| c.sum()));
        let packed = (!curvature && r <= FUSED_MAX_RANK).then(|| {
            let mut v = Vec::with_capacity(3 * r * nodes);
            for k in 0..nodes {
                v.extend(grads.iter().map(|g| g.0.values()[k]));
                v.extend(grads.iter().map(|g| g.1.values()[k]));
                v.extend(basis.psis.iter().map(|p| p.values()[k]));
            }
            v
        });
        Self {
            r,
            nodes,
            p: params.p,
            s_l: params.s_l,
            ds: params.d * params.s_l,
            dt,
            curvature,
            gx: column_matrix(&grads.iter().map(|g| g.0.clone()).collect::<Vec<_>>()),
            gy: column_matrix(&grads.iter().map(|g| g.1.clone()).collect::<Vec<_>>()),
            hess,
            packed,
            psi,
            psi_sum,
            jet: JetFields::zeros(nodes, curvature),
            pert: JetFields::zeros(nodes, curvature),
            phi: DVector::zeros(nodes),
            dphi: DMatrix::zeros(nodes, r),
            last: None,
        }
    }

    fn fill_jet(&mut self, a: &[f64]) {
        let av = DVector::from_column_slice(a);
        let n = self.nodes;
        let mut out = DVector::zeros(n);
        out.gemv(1.0, &self.gx, &av, 0.0);
        for (o, v) in self.jet.gx.iter_mut().zip(out.iter()) {
            *o = self.p[0] + v;
        }
        out.gemv(1.0, &self.gy, &av, 0.0);
        for (o, v) in self.jet.gy.iter_mut().zip(out.iter()) {
            *o = self.p[1] + v;
        }
        if let Some([hxx, hyy, hxy]) = &self.hess {
            out.gemv(1.0, hxx, &av, 0.0);
            self.jet.gxx.copy_from_slice(out.as_slice());
            out.gemv(1.0, hyy, &av, 0.0);
            self.jet.gyy.copy_from_slice(out.as_slice());
            out.gemv(1.0, hxy, &av, 0.0);
            self.jet.gxy.copy_from_slice(out.as_slice());
        }
    }

    fn phi_of(jet: &JetFields, s_l: f64, ds: f64, curvature: bool, out: &mut [f64]) {
        if curvature {
            for k in 0..out.len() {
                let (gx, gy) = (jet.gx[k], jet.gy[k]);
                let sq = gx * gx + gy * gy;
                let kappa = (gy * gy * jet.gxx[k] - 2.0 * gx * gy * jet.gxy[k] + gx * gx * jet.gyy[k])
                    / (sq + CURVATURE_GUARD);
                out[k] = s_l * sq.sqrt() - ds * kappa;
            }
        } else {
            for ((o, gx), gy) in out.iter_mut().zip(&jet.gx).zip(&jet.gy) {
                *o = s_l * (gx * gx + gy * gy).sqrt();
            }
        }
    }

    fn fill_phi(&mut self, a: &[f64]) {
        self.fill_jet(a);
        Self::phi_of(&self.jet, self.s_l, self.ds, self.curvature, self.phi.as_mut_slice());
        let q = self.phi.sum() / self.nodes as f64;
        self.last = Some((a.to_vec(), q));
    }

    /// Pointwise `φ` of the reduced field `Σ a_i ψ_i`.
    pub fn phi_field(&mut self, a: &[f64]) -> Vec<f64> {
        self.fill_phi(a);
        self.phi.as_slice().to_vec()
    }

    /// `Q(a) = ∫φ`, the rate in `ū_t = −Q`. Reuses the last evaluation when
    /// it was at the same coefficients.
    pub fn mean_rate(&mut self, a: &[f64]) -> f64 {
        if let Some((prev, q)) = &self.last {
            if prev.as_slice() == a {
                return *q;
            }
        }
        self.fill_phi(a);
        self.last.as_ref().map(|l| l.1).unwrap_or(0.0)
    }
}

impl NonlinearTerm for GalerkinNonlinearity {
    fn dim(&self) -> usize {
        self.r
    }

    fn eval(&mut self, a: &[f64]) -> DVector<f64> {
        if self.packed.is_some() {
            return self.fused(a, false).0;
        }
        self.fill_phi(a);
        let n = self.nodes as f64;
        let mean = self.phi.sum() / n;
        (self.psi.tr_mul(&self.phi) - &self.psi_sum * mean) * (-self.dt / n)
    }

    /// Forward differences with step `JACOBIAN_STEP` in each coefficient,
    /// assembled column by column from the perturbed derivative fields.
    fn jacobian(&mut self, a: &[f64]) -> DMatrix<f64> {
        if self.packed.is_some() {
            return self.fused(a, true).1;
        }
        self.jacobian_columns(a)
    }

    fn eval_with_jacobian(&mut self, a: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        if self.packed.is_some() {
            return self.fused(a, true);
        }
        (self.eval(a), self.jacobian_columns(a))
    }
}

impl GalerkinNonlinearity {
    /// Column-by-column forward-difference Jacobian over the derivative
    /// fields; the general path used for curvature and large ranks.
    pub fn jacobian_columns(&mut self, a: &[f64]) -> DMatrix<f64> {
        let h = JACOBIAN_STEP;
        self.fill_phi(a);
        let mut phi_j = vec![0.0; self.nodes];
        for j in 0..self.r {
            let perturb = |dst: &mut [f64], base: &[f64], dir: &[f64]| {
                for ((d, b), v) in dst.iter_mut().zip(base).zip(dir) {
                    *d = b + h * v;
                }
            };
            perturb(&mut self.pert.gx, &self.jet.gx, self.gx.column(j).as_slice());
            perturb(&mut self.pert.gy, &self.jet.gy, self.gy.column(j).as_slice());
            if let Some([hxx, hyy, hxy]) = &self.hess {
                perturb(&mut self.pert.gxx, &self.jet.gxx, hxx.column(j).as_slice());
                perturb(&mut self.pert.gyy, &self.jet.gyy, hyy.column(j).as_slice());
                perturb(&mut self.pert.gxy, &self.jet.gxy, hxy.column(j).as_slice());
            }
            Self::phi_of(&self.pert, self.s_l, self.ds, self.curvature, &mut phi_j);
            for ((d, p1), p0) in self.dphi.column_mut(j).iter_mut().zip(&phi_j).zip(self.phi.iter()) {
                *d = (p1 - p0) / h;
            }
        }
        let n = self.nodes as f64;
        let col_means = DVector::from_iterator(self.r, self.dphi.column_iter().map(|c| c.sum() / n));
        (self.psi.tr_mul(&self.dphi) - &self.psi_sum * col_means.transpose()) * (-self.dt / n)
    }
}

/// Largest rank served by the single-pass kernels.
pub const FUSED_MAX_RANK: usize = 16;

#[derive(Debug, Clone)]
struct FusedSums {
    phi: f64,
    f: Vec<f64>,
    jac: Vec<f64>,
    dcol: Vec<f64>,
}

/// One pass over the nodes accumulating `Σφ`, `Σφψ_i` and, when `JAC`, the
/// forward-difference sums `Σ ψ_i ∂_jφ` and `Σ ∂_jφ`.
fn fused_kernel<const R: usize, const JAC: bool>(
    packed: &[f64],
    a: &[f64],
    p: [f64; 2],
    s_l: f64,
) -> FusedSums {
    let h = JACOBIAN_STEP;
    let inv_h = 1.0 / h;
    let a: [f64; R] = a.try_into().expect("rank matches kernel");
    let mut phi_sum = 0.0;
    let mut f = [0.0; R];
    let mut jac = [[0.0; R]; R];
    let mut dcol = [0.0; R];
    for node in packed.chunks_exact(3 * R) {
        let gxr: &[f64; R] = node[..R].try_into().unwrap();
        let gyr: &[f64; R] = node[R..2 * R].try_into().unwrap();
        let psi: &[f64; R] = node[2 * R..].try_into().unwrap();
        let mut gx = p[0];
        let mut gy = p[1];
        for j in 0..R {
            gx += a[j] * gxr[j];
            gy += a[j] * gyr[j];
        }
        let phi0 = s_l * (gx * gx + gy * gy).sqrt();
        phi_sum += phi0;
        for i in 0..R {
            f[i] += psi[i] * phi0;
        }
        if JAC {
            let mut d = [0.0; R];
            for j in 0..R {
                let px = gx + h * gxr[j];
                let py = gy + h * gyr[j];
                d[j] = (s_l * (px * px + py * py).sqrt() - phi0) * inv_h;
            }
            for j in 0..R {
                dcol[j] += d[j];
            }
            for i in 0..R {
                for j in 0..R {
                    jac[i][j] += psi[i] * d[j];
                }
            }
        }
    }
    FusedSums {
        phi: phi_sum,
        f: f.to_vec(),
        jac: jac.iter().flatten().copied().collect(),
        dcol: dcol.to_vec(),
    }
}

macro_rules! dispatch_rank {
    ($r:expr, $jac:literal, $($arg:expr),*) => {
        match $r {
            1 => fused_kernel::<1, $jac>($($arg),*),
            2 => fused_kernel::<2, $jac>($($arg),*),
            3 => fused_kernel::<3, $jac>($($arg),*),
            4 => fused_kernel::<4, $jac>($($arg),*),
            5 => fused_kernel::<5, $jac>($($arg),*),
            6 => fused_kernel::<6, $jac>($($arg),*),
            7 => fused_kernel::<7, $jac>($($arg),*),
            8 => fused_kernel::<8, $jac>($($arg),*),
            9 => fused_kernel::<9, $jac>($($arg),*),
            10 => fused_kernel::<10, $jac>($($arg),*),
            11 => fused_kernel::<11, $jac>($($arg),*),
            12 => fused_kernel::<12, $jac>($($arg),*),
            13 => fused_kernel::<13, $jac>($($arg),*),
            14 => fused_kernel::<14, $jac>($($arg),*),
            15 => fused_kernel::<15, $jac>($($arg),*),
            16 => fused_kernel::<16, $jac>($($arg),*),
            _ => unreachable!("rank above FUSED_MAX_RANK"),
        }
    };
}

impl GalerkinNonlinearity {
    fn fused(&mut self, a: &[f64], with_jac: bool) -> (DVector<f64>, DMatrix<f64>) {
        let packed = self.packed.as_deref().expect("fused path");
        let r = self.r;
        let sums = if with_jac {
            dispatch_rank!(r, true, packed, a, self.p, self.s_l)
        } else {
            dispatch_rank!(r, false, packed, a, self.p, self.s_l)
        };
        let n = self.nodes as f64;
        let scale = -self.dt / n;
        let mean = sums.phi / n;
        self.last = Some((a.to_vec(), mean));
        let f = DVector::from_iterator(r, (0..r).map(|i| (sums.f[i] - self.psi_sum[i] * mean) * scale));
        let jac = if with_jac {
            DMatrix::from_fn(r, r, |i, j| {
                (sums.jac[i * r + j] - self.psi_sum[i] * sums.dcol[j] / n) * scale
            })
        } else {
            DMatrix::zeros(0, 0)
        };
        (f, jac)
    }

    /// Evaluation through the general column path, bypassing the fused
    /// kernels; used to cross-check them.
    pub fn eval_columns(&mut self, a: &[f64]) -> DVector<f64> {
        self.fill_phi(a);
        let n = self.nodes as f64;
        let mean = self.phi.sum() / n;
        (self.psi.tr_mul(&self.phi) - &self.psi_sum * mean) * (-self.dt / n)
    }
}


/// Gaussian elimination with partial pivoting; fails when a pivot drops
/// below `PIVOT_TOLERANCE` times the largest entry.
pub fn solve_dense(mut m: DMatrix<f64>, mut b: DVector<f64>) -> Result<DVector<f64>> {
    let n = m.nrows();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let (piv, pval) = (col..n)
            .map(|i| (i, m[(i, col)].abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pval < PIVOT_TOLERANCE * scale {
            return Err(Error::SingularJacobian(pval));
        }
        if piv != col {
            m.swap_rows(piv, col);
            b.swap_rows(piv, col);
        }
        let d = m[(col, col)];
        for i in (col + 1)..n {
            let l = m[(i, col)] / d;
            if l != 0.0 {
                for j in col..n {
                    m[(i, j)] -= l * m[(col, j)];
                }
                b[i] -= l * b[col];
            }
        }
    }
    let mut x = DVector::zeros(n);
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|j| m[(i, j)] * x[j]).sum();
        x[i] = (b[i] - s) / m[(i, i)];
    }
    Ok(x)
}

/// Solves `M1 a − rhs − f(a) = 0` by Newton from `a_prev`. Returns the new
/// coefficients and the number of Newton updates taken.
pub fn newton_solve(
    m1: &DMatrix<f64>,
    rhs: &DVector<f64>,
    nonlinear: &mut dyn NonlinearTerm,
    a_prev: &[f64],
) -> Result<(Vec<f64>, usize)> {
    let mut a = DVector::from_column_slice(a_prev);
    let mut res = f64::INFINITY;
    for it in 0..=NEWTON_MAX_ITERATIONS {
        // the first residual and Jacobian share one pass when supported
        let (f, jac) = if it == 0 {
            let (f, j) = nonlinear.eval_with_jacobian(a.as_slice());
            (f, Some(j))
        } else {
            (nonlinear.eval(a.as_slice()), None)
        };
        let g = m1 * &a - rhs - f;
        res = g.norm();
        if !res.is_finite() {
            break;
        }
        if res <= NEWTON_TOLERANCE * (1.0 + a.norm()) {
            return Ok((a.as_slice().to_vec(), it));
        }
        if it == NEWTON_MAX_ITERATIONS {
            break;
        }
        let jac = m1 - jac.unwrap_or_else(|| nonlinear.jacobian(a.as_slice()));
        let delta = solve_dense(jac, -g)?;
        a += delta;
    }
    Err(Error::NewtonDiverged {
        iterations: NEWTON_MAX_ITERATIONS,
        residual: res,
    })
}

/// One backward-Euler step to time `t_next`.
pub fn step_backward_euler(
    ops: &RomOperators,
    nonlinear: &mut dyn NonlinearTerm,
    a_prev: &[f64],
    t_next: f64,
) -> Result<(Vec<f64>, usize)> {
    let rhs = &ops.m2 * DVector::from_column_slice(a_prev) + ops.c(t_next);
    newton_solve(&ops.m1(t_next), &rhs, nonlinear, a_prev)
}

/// Coefficient and mean trajectories of a reduced run.
#[derive(Debug, Clone, Default)]
pub struct RomTrajectory {
    pub times: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
    pub u_bar: Vec<f64>,
    /// `Q(a_k)` at each record.
    pub rates: Vec<f64>,
    /// Newton updates per step (one entry per step).
    pub newton_iterations: Vec<usize>,
    pub elapsed: Duration,
}

impl RomTrajectory {
    pub fn last_coeffs(&self) -> &[f64] {
        self.coeffs.last().map(|c| c.as_slice()).unwrap_or(&[])
    }

    pub fn last_u_bar(&self) -> f64 {
        self.u_bar.last().copied().unwrap_or(0.0)
    }

    pub fn last_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn median_newton_iterations(&self) -> usize {
        let mut v = self.newton_iterations.clone();
        v.sort_unstable();
        v.get(v.len() / 2).copied().unwrap_or(0)
    }
}

/// A basis with its assembled operators, ready to step.
#[derive(Debug, Clone)]
pub struct RomSolver {
    pub cfg: RomConfig,
    pub basis: PodBasis,
    pub ops: RomOperators,
    pub nonlinear: GalerkinNonlinearity,
    /// `M1` and `c` when the flow is steady.
    frozen: Option<(DMatrix<f64>, DVector<f64>)>,
}

impl RomSolver {
    pub fn new(basis: PodBasis, cfg: RomConfig) -> Result<Self> {
        cfg.params.validate()?;
        cfg.flow.validate()?;
        if !(cfg.dt.is_finite() && cfg.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", cfg.dt)));
        }
        if basis.psis.is_empty() {
            return Err(Error::InvalidParameter("empty basis".into()));
        }
        let ops = assemble_operators(&basis, &cfg);
        let nonlinear = GalerkinNonlinearity::new(&basis, cfg.params, cfg.equation, cfg.dt);
        let frozen = ops.conv_pert.is_none().then(|| (ops.m1(0.0), ops.c(0.0)));
        Ok(Self {
            cfg,
            basis,
            ops,
            nonlinear,
            frozen,
        })
    }

    pub fn r(&self) -> usize {
        self.basis.r()
    }

    pub fn nonlinear_rhs(&mut self, a: &[f64]) -> Vec<f64> {
        self.nonlinear.eval(a).as_slice().to_vec()
    }

    pub fn step(&mut self, a_prev: &[f64], t_next: f64) -> Result<(Vec<f64>, usize)> {
        match &self.frozen {
            Some((m1, c)) => {
                let rhs = &self.ops.m2 * DVector::from_column_slice(a_prev) + c;
                newton_solve(m1, &rhs, &mut self.nonlinear, a_prev)
            }
            None => step_backward_euler(&self.ops, &mut self.nonlinear, a_prev, t_next),
        }
    }

    /// `n_steps` steps from `(a0, ū0)` at `t0`, recovering `ū` by the
    /// composite trapezoid rule on the fly.
    pub fn run(&mut self, a0: &[f64], u_bar0: f64, t0: f64, n_steps: usize) -> Result<RomTrajectory> {
        let dt = self.cfg.dt;
        let start = Instant::now();
        let mut traj = RomTrajectory::default();
        let mut q_prev = self.nonlinear.mean_rate(a0);
        traj.times.push(t0);
        traj.coeffs.push(a0.to_vec());
        traj.u_bar.push(u_bar0);
        traj.rates.push(q_prev);
        let mut a = a0.to_vec();
        let mut u_bar = u_bar0;
        for k in 1..=n_steps {
            let t = t0 + k as f64 * dt;
            let (next, its) = self.step(&a, t)?;
            let q = self.nonlinear.mean_rate(&next);
            u_bar -= 0.5 * dt * (q_prev + q);
            q_prev = q;
            a = next;
            traj.times.push(t);
            traj.coeffs.push(a.clone());
            traj.u_bar.push(u_bar);
            traj.rates.push(q);
            traj.newton_iterations.push(its);
        }
        traj.elapsed = start.elapsed();
        Ok(traj)
    }

    /// `Σ a_i ψ_i + ū`
    pub fn reconstruct(&self, a: &[f64], u_bar: f64) -> ScalarField {
        reconstruct(&self.basis, a, u_bar)
    }
}

/// `ū_k = −(Δt/2) Σ_{i=1..k} [Q(a_{i−1}) + Q(a_i)]`, `ū_0 = 0`.
pub fn recover_mean(
    coeffs: &[Vec<f64>],
    basis: &PodBasis,
    params: FrontParams,
    equation: Equation,
    dt: f64,
) -> Vec<f64> {
    let mut nl = GalerkinNonlinearity::new(basis, params, equation, dt);
    let q: Vec<f64> = coeffs.iter().map(|a| nl.mean_rate(a)).collect();
    let mut out = Vec::with_capacity(q.len());
    let mut acc = 0.0;
    for (k, qk) in q.iter().enumerate() {
        if k > 0 {
            acc -= 0.5 * dt * (q[k - 1] + qk);
        }
        out.push(acc);
    }
    out
}

/// `U = Σ a_i ψ_i + ū`
pub fn reconstruct(basis: &PodBasis, a: &[f64], u_bar: f64) -> ScalarField {
    basis.combine(a).map(|v| v + u_bar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, InnerProductKind};
    use crate::pod::pod_of;
    use std::f64::consts::PI;

    fn test_basis(n: usize, kind: InnerProductKind) -> PodBasis {
        let g = GridSpec::new(n).unwrap();
        let fields: Vec<ScalarField> = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                ScalarField::from_fn(g, |x, y| {
                    (2.0 * PI * (a * x + b * y) + 0.3 * k as f64).sin() * (1.0 + 0.2 * k as f64)
                })
            })
            .collect();
        let refs: Vec<&ScalarField> = fields.iter().collect();
        pod_of(&refs, kind, 0.0).unwrap()
    }

    fn cfg(flow: FlowSpec, eq: Equation) -> RomConfig {
        RomConfig {
            params: FrontParams::new(0.1, 1.0, [1.0, 0.0]).unwrap(),
            flow,
            equation: eq,
            dt: 1e-3,
        }
    }

    #[test]
    fn scalar_recursion() {
        let m1 = DMatrix::from_element(1, 1, 2.0);
        let m2 = DMatrix::from_element(1, 1, 1.0);
        let c = DVector::from_element(1, 1.0);
        let mut a = vec![0.0];
        let mut seen = Vec::new();
        for _ in 0..3 {
            let rhs = &m2 * DVector::from_column_slice(&a) + &c;
            a = newton_solve(&m1, &rhs, &mut NoNonlinearity(1), &a).unwrap().0;
            seen.push(a[0]);
        }
        for (got, want) in seen.iter().zip([0.5, 0.75, 0.875]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn still_flow_operators_and_zero_dynamics() {
        let basis = test_basis(32, InnerProductKind::H1);
        let c = cfg(FlowSpec::still(), Equation::Viscous);
        let ops = assemble_operators(&basis, &c);
        let expect = &ops.m2 + &ops.stiffness * (c.dt * 0.1);
        assert!((ops.m1(0.3) - expect).amax() < 1e-15);
        assert_eq!(ops.c(0.3).amax(), 0.0);
        let mut rom = RomSolver::new(basis, c).unwrap();
        let traj = rom.run(&[0.0; 4], 0.0, 0.0, 100).unwrap();
        for (k, (a, ub)) in traj.coeffs.iter().zip(&traj.u_bar).enumerate() {
            assert!(a.iter().all(|v| *v == 0.0));
            assert!((ub + k as f64 * 1e-3).abs() < 1e-12);
        }
    }

    #[test]
    fn convection_block_is_skew_to_fourth_order() {
        // C + Cᵀ vanishes for divergence-free V up to the discrete product-rule
        // defect of the fourth-order gradient.
        let skew = |n: usize| {
            let basis = test_basis(n, InnerProductKind::H1);
            let ops = assemble_operators(&basis, &cfg(FlowSpec::steady(4.0).unwrap(), Equation::Viscous));
            let c = &ops.conv_base;
            (c + c.transpose()).amax() / c.amax()
        };
        let (s40, s80) = (skew(40), skew(80));
        assert!(s80 < 1e-4, "relative symmetric part {s80}");
        assert!(s40 / s80 > 12.0, "ratio {}", s40 / s80);
    }

    #[test]
    fn theta_zero_has_no_perturbation() {
        let basis = test_basis(16, InnerProductKind::L2);
        let ops = assemble_operators(&basis, &cfg(FlowSpec::time_periodic(4.0, 0.0).unwrap(), Equation::Viscous));
        assert!(ops.conv_pert.as_ref().map_or(true, |m| m.amax() == 0.0));
        assert!(ops.forcing_pert.as_ref().map_or(true, |v| v.amax() == 0.0));
        assert!((ops.m1(0.37) - ops.m1(0.0)).amax() == 0.0);
    }

    #[test]
    fn symmetric_part_of_m1_is_positive_definite() {
        let basis = test_basis(40, InnerProductKind::H1);
        let ops = assemble_operators(&basis, &cfg(FlowSpec::steady(4.0).unwrap(), Equation::Viscous));
        let m1 = ops.m1(0.0);
        let sym = (&m1 + m1.transpose()) * 0.5;
        let eigs = sym.symmetric_eigen().eigenvalues;
        assert!(eigs.min() > 0.0);
    }

    #[test]
    fn planar_state_has_zero_nonlinearity() {
        let basis = test_basis(16, InnerProductKind::H1);
        for eq in [Equation::Viscous, Equation::Curvature] {
            let mut nl = GalerkinNonlinearity::new(&basis, cfg(FlowSpec::still(), eq).params, eq, 1e-3);
            assert!(nl.eval(&[0.0; 4]).amax() < 1e-15);
            assert!((nl.mean_rate(&[0.0; 4]) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fused_jacobian_matches_column_differences() {
        let basis = test_basis(24, InnerProductKind::H1);
        for eq in [Equation::Viscous, Equation::Curvature] {
            let mut nl = GalerkinNonlinearity::new(&basis, cfg(FlowSpec::still(), eq).params, eq, 1e-3);
            let a = [0.03, -0.02, 0.05, 0.01];
            let jac = nl.jacobian(&a);
            let f0 = nl.eval(&a);
            for j in 0..4 {
                let mut ap = a;
                ap[j] += JACOBIAN_STEP;
                let col = (nl.eval(&ap) - &f0) / JACOBIAN_STEP;
                assert!((jac.column(j) - col).amax() <= 1e-6 * jac.amax(), "{eq:?} column {j}");
            }
        }
    }

    #[test]
    fn fused_kernels_match_column_path() {
        let basis = test_basis(24, InnerProductKind::H1);
        let params = cfg(FlowSpec::still(), Equation::Viscous).params;
        let mut nl = GalerkinNonlinearity::new(&basis, params, Equation::Viscous, 1e-3);
        let a = [0.03, -0.02, 0.05, 0.01];
        let (f, jac) = nl.eval_with_jacobian(&a);
        let f_cols = nl.eval_columns(&a);
        let jac_cols = nl.jacobian_columns(&a);
        assert!((&f - &f_cols).amax() <= 1e-14 * f.amax().max(1e-300) + 1e-18);
        assert!((&jac - &jac_cols).amax() <= 1e-8 * jac.amax());
        assert!((nl.eval(&a) - f).amax() == 0.0);
    }

    #[test]
    fn reconstruct_consistency() {
        let basis = test_basis(16, InnerProductKind::H1);
        let g = basis.grid();
        assert_eq!(reconstruct(&basis, &[0.0; 4], -1.0), ScalarField::constant(g, -1.0));
        let a = [0.3, -0.1, 0.7, 0.2];
        let u = reconstruct(&basis, &a, -0.4);
        assert!((u.mean().unwrap() + 0.4).abs() < 1e-9);
        assert!((&u.subtract_mean().unwrap() - &basis.combine(&a)).max_abs() < 1e-9);
    }

    #[test]
    fn recover_mean_zero_coefficients() {
        let basis = test_basis(16, InnerProductKind::H1);
        let c = cfg(FlowSpec::still(), Equation::Viscous);
        let ub = recover_mean(&vec![vec![0.0; 4]; 6], &basis, c.params, c.equation, 0.01);
        for (k, v) in ub.iter().enumerate() {
            assert!((v + 0.01 * k as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn singular_jacobian_is_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            solve_dense(m, DVector::from_vec(vec![1.0, 1.0])),
            Err(Error::SingularJacobian(_))
        ));
    }
}
