//! Demo computations in plain Rust; the wasm bindings are thin wrappers.
//! Avoids the timed drivers in the core crate because `Instant` is
//! unavailable on `wasm32-unknown-unknown`.

use podgeq::fd::{FdConfig, FdSolver, Scheme};
use podgeq::flow::FlowSpec;
use podgeq::grid::{GridSpec, InnerProductKind, ScalarField};
use podgeq::model::{Equation, FrontParams};
use podgeq::pod;
use podgeq::rom::{RomConfig, RomSolver};
use podgeq::snapshots::SnapshotSet;
use podgeq::Result;

/// Step of the recorded trajectory and of the reduced model.
pub const DT: f64 = 1e-3;

pub fn flow(amplitude: f64, theta: f64, time_periodic: bool) -> Result<FlowSpec> {
    if time_periodic {
        FlowSpec::time_periodic(amplitude, theta)
    } else {
        FlowSpec::steady(amplitude)
    }
}

/// Velocity at every node, interleaved `v1, v2`.
pub fn velocity_field(spec: FlowSpec, t: f64, n: usize) -> Result<Vec<f64>> {
    let s = spec.sample_on_grid(GridSpec::new(n)?, t);
    Ok(s.v1
        .values()
        .iter()
        .zip(s.v2.values())
        .flat_map(|(a, b)| [*a, *b])
        .collect())
}

fn fd_config(n: usize, d: f64, spec: FlowSpec) -> Result<(FdConfig, usize)> {
    let base = FdConfig {
        params: FrontParams::new(d, 1.0, [1.0, 0.0])?,
        dt: DT,
        scheme: Scheme::ExplicitRk3,
        equation: Equation::Viscous,
        flow: spec,
        grid: GridSpec::new(n)?,
    };
    base.validate().or_else(|_| base.params.validate())?;
    let k = base.substeps_for(DT);
    Ok((FdConfig { dt: DT / k as f64, ..base }, k))
}

/// Reference front advanced `DT` at a time.
#[derive(Debug, Clone)]
pub struct Front {
    solver: FdSolver,
    substeps: usize,
    u: ScalarField,
    t: f64,
}

impl Front {
    pub fn new(n: usize, d: f64, spec: FlowSpec) -> Result<Self> {
        let (cfg, substeps) = fd_config(n, d, spec)?;
        Ok(Self {
            solver: FdSolver::new(cfg)?,
            substeps,
            u: ScalarField::zeros(cfg.grid),
            t: 0.0,
        })
    }

    pub fn advance(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.u = self.solver.advance(&self.u, self.t, self.substeps)?;
            self.t += DT;
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn field(&self) -> &ScalarField {
        &self.u
    }

    /// `G = x + u` at every node.
    pub fn level_set(&self) -> Vec<f64> {
        let g = self.u.grid();
        let n = g.n_cells();
        (0..g.len())
            .map(|k| g.coord(k / n) + self.u.values()[k])
            .collect()
    }

    /// `−ū(t)/t`
    pub fn flame_speed(&self) -> f64 {
        if self.t > 0.0 {
            -self.u.node_mean() / self.t
        } else {
            f64::NAN
        }
    }
}

/// Spectrum, selected rank and both flame-speed histories.
#[derive(Debug, Clone, PartialEq)]
pub struct PodSummary {
    pub spectrum: Vec<f64>,
    pub rank: usize,
    pub times: Vec<f64>,
    pub fd_speed: Vec<f64>,
    pub rom_speed: Vec<f64>,
    pub final_error: f64,
}

/// Records a reference run on `[0, t_final]`, builds an H1 basis at
/// `e_pod`, and reruns the reduced model over the same window.
pub fn pod_summary(n: usize, d: f64, spec: FlowSpec, t_final: f64, e_pod: f64) -> Result<PodSummary> {
    let steps = (t_final / DT).round().max(1.0) as usize;
    let mut front = Front::new(n, d, spec)?;
    let mut snaps = SnapshotSet::new(front.field().grid());
    snaps.push(0.0, front.field())?;
    for _ in 0..steps {
        front.advance(1)?;
        snaps.push(front.time(), front.field())?;
    }
    let k = pod::correlation(&snaps, InnerProductKind::H1)?;
    let eig = pod::sym_eig(&k)?;
    let rank = pod::select_rank(&eig.values, e_pod)?.min(pod::numerical_rank(&eig.values));
    let basis = pod::build_basis(&snaps, InnerProductKind::H1, &eig, rank)?;

    let params = FrontParams::new(d, 1.0, [1.0, 0.0])?;
    let mut rom = RomSolver::new(
        basis,
        RomConfig {
            params,
            flow: spec,
            equation: Equation::Viscous,
            dt: DT,
        },
    )?;
    let mut a = vec![0.0; rank];
    let mut u_bar = 0.0;
    let mut q_prev = rom.nonlinear.mean_rate(&a);
    let mut times = Vec::with_capacity(steps);
    let mut fd_speed = Vec::with_capacity(steps);
    let mut rom_speed = Vec::with_capacity(steps);
    for i in 1..=steps {
        let t = i as f64 * DT;
        a = rom.step(&a, t)?.0;
        let q = rom.nonlinear.mean_rate(&a);
        u_bar -= 0.5 * DT * (q_prev + q);
        q_prev = q;
        times.push(t);
        fd_speed.push(-snaps.u_bar()[i] / t);
        rom_speed.push(-u_bar / t);
    }
    let u_rom = rom.reconstruct(&a, u_bar);
    let u_fd = front.field();
    let final_error = (&u_rom - u_fd).norm_l2() / u_fd.norm_l2();
    Ok(PodSummary {
        spectrum: eig.values.iter().map(|l| l.max(0.0)).collect(),
        rank,
        times,
        fd_speed,
        rom_speed,
        final_error,
    })
}
