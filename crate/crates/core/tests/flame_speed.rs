//! Long-horizon flame-speed comparison; about two minutes in release mode.
//! Run with `cargo test -p podgeq --test flame_speed -- --ignored --nocapture`.

use podgeq::fd::{solve_from, solve_reference, FdConfig, Scheme};
use podgeq::flow::FlowSpec;
use podgeq::grid::{GridSpec, InnerProductKind};
use podgeq::model::{Equation, FrontParams};
use podgeq::observables::flame_speed;
use podgeq::pod;
use podgeq::rom::{RomConfig, RomSolver};
use podgeq::timeseries::TimeSeries;

#[test]
#[ignore]
fn steady_flow_speed_matches_reference_to_t8() {
    let params = FrontParams::new(0.1, 1.0, [1.0, 0.0]).unwrap();
    let flow = FlowSpec::steady(4.0).unwrap();
    let base = FdConfig {
        params,
        dt: 1e-3,
        scheme: Scheme::ExplicitRk3,
        equation: Equation::Viscous,
        flow,
        grid: GridSpec::new(80).unwrap(),
    };
    let k = base.substeps_for(1e-3);
    let cfg = FdConfig { dt: 1e-3 / k as f64, ..base };
    let head = solve_reference(&cfg, 1.0, k).unwrap();
    let tail = solve_from(&cfg, &head.final_field, 1.0, 8.0, 100 * k).unwrap();

    let basis = pod::pod_with_rank(&head.snapshots, InnerProductKind::H1, 6).unwrap();
    let mut rom = RomSolver::new(basis, RomConfig { params, flow, equation: Equation::Viscous, dt: 1e-3 }).unwrap();
    let traj = rom.run(&[0.0; 6], 0.0, 0.0, 8000).unwrap();

    let fd = TimeSeries::new(tail.snapshots.times().to_vec(), vec![("u_bar".into(), tail.snapshots.u_bar().to_vec())]).unwrap();
    let fd_speed = flame_speed(&fd, params.p).unwrap();
    let mut worst: f64 = 0.0;
    for (t, s_fd) in fd_speed.times().iter().zip(fd_speed.column("s_bar").unwrap()) {
        let i = (t / 1e-3).round() as usize;
        let s_rom = -traj.u_bar[i] / traj.times[i];
        worst = worst.max((s_rom - s_fd).abs() / s_fd);
    }
    println!("worst relative S_bar mismatch on [1, 8]: {worst:.4e}; S_bar(8) FD {:.6}", fd_speed.column("s_bar").unwrap().last().unwrap());
    assert!(worst <= 0.02, "{worst}");
}
