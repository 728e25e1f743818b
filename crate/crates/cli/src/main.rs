use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use podgeq::adaptive::{run_adaptive, FdBurst};
use podgeq::config::RunConfig;
use podgeq::fd::solve_reference;
use podgeq::grid::{InnerProductKind, ScalarField};
use podgeq::io::{self, MAGIC};
use podgeq::observables::{flame_speed, relative_l2_error, time_averaged_sq_error};
use podgeq::pod::{self, PodBasis};
use podgeq::rom::{reconstruct, RomSolver};
use podgeq::timeseries::TimeSeries;
use podgeq::{Error, Result};

#[derive(Parser)]
#[command(name = "podgeq", version, about = "Reduced-order G-equation front propagation in periodic flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-difference reference run; writes the snapshot set.
    ReferenceSolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// CSV of the mean `u_bar` at every record.
        #[arg(long)]
        traj: Option<PathBuf>,
    },
    /// POD basis from a snapshot set.
    PodBuild {
        #[arg(long)]
        snapshots: PathBuf,
        #[arg(long = "e-pod")]
        e_pod: f64,
        #[arg(long, default_value = "h1")]
        inner: InnerProductKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduced run from planar data.
    RomSolve {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "t-final")]
        t_final: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ubar: PathBuf,
    },
    /// Reduced run with periodic enrichment checks; writes one row per check.
    AdaptiveSolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "init-basis")]
        init_basis: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "final-basis")]
        final_basis: Option<PathBuf>,
        #[arg(long)]
        ubar: Option<PathBuf>,
    },
    /// Flame-speed estimators from a `u_bar` series.
    FlameSpeed {
        #[arg(long)]
        ubar: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "p-x", default_value_t = 1.0)]
        p_x: f64,
        #[arg(long = "p-y", default_value_t = 0.0)]
        p_y: f64,
    },
    /// Pointwise-in-time errors between two runs. A run is a snapshot file
    /// or a coefficient CSV paired with its basis.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long = "basis-a")]
        basis_a: Option<PathBuf>,
        #[arg(long = "basis-b")]
        basis_b: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}

fn write_series(path: &Path, s: &TimeSeries) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    s.write_csv(&mut w)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

fn read_series(path: &Path) -> Result<TimeSeries> {
    TimeSeries::read_csv(BufReader::new(File::open(path)?))
}

fn coeff_series(times: &[f64], coeffs: &[Vec<f64>], u_bar: &[f64], r: usize) -> Result<TimeSeries> {
    let mut cols: Vec<(String, Vec<f64>)> = (0..r)
        .map(|i| {
            let col = coeffs.iter().map(|a| a.get(i).copied().unwrap_or(0.0)).collect();
            (format!("a{}", i + 1), col)
        })
        .collect();
    cols.push(("u_bar".into(), u_bar.to_vec()));
    TimeSeries::new(times.to_vec(), cols)
}

fn ubar_series(times: &[f64], u_bar: &[f64]) -> Result<TimeSeries> {
    TimeSeries::new(times.to_vec(), vec![("u_bar".into(), u_bar.to_vec())])
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::ReferenceSolve { config, out, traj } => {
            let cfg = RunConfig::load(&config)?;
            let fd = cfg.fd_config();
            let k = cfg.fd_substeps();
            let run = solve_reference(&fd, cfg.t_final, cfg.record_stride * k)?;
            eprintln!(
                "{} steps of {:.3e} ({} per record), {} snapshots, {:.3} s",
                run.steps,
                fd.dt,
                cfg.record_stride * k,
                run.snapshots.len(),
                run.elapsed.as_secs_f64()
            );
            io::save_snapshots(&out, &run.snapshots, Some(cfg.inner_product))?;
            if let Some(path) = traj {
                let s = &run.snapshots;
                write_series(&path, &ubar_series(s.times(), s.u_bar())?)?;
            }
        }
        Command::PodBuild {
            snapshots,
            e_pod,
            inner,
            out,
        } => {
            let snaps = io::load_snapshots(&snapshots)?;
            let start = Instant::now();
            let basis = pod::pod(&snaps, inner, e_pod)?;
            eprintln!(
                "r = {} from {} fields, tail {:.3e}, {:.3} s",
                basis.r(),
                snaps.total(),
                basis.tail(),
                start.elapsed().as_secs_f64()
            );
            io::save_basis(&out, &basis)?;
        }
        Command::RomSolve {
            basis,
            config,
            t_final,
            out,
            ubar,
        } => {
            let cfg = RunConfig::load(&config)?;
            let basis = io::load_basis(&basis)?;
            check_grid(&basis, &cfg)?;
            let t_final = t_final.unwrap_or(cfg.t_final);
            let n = steps_in(t_final, cfg.dt)?;
            let mut rom = RomSolver::new(basis, cfg.rom_config())?;
            let r = rom.r();
            let traj = rom.run(&vec![0.0; r], 0.0, 0.0, n)?;
            eprintln!(
                "r = {r}, {n} steps, median Newton updates {}, {:.4} s",
                traj.median_newton_iterations(),
                traj.elapsed.as_secs_f64()
            );
            write_series(&out, &coeff_series(&traj.times, &traj.coeffs, &traj.u_bar, r)?)?;
            write_series(&ubar, &ubar_series(&traj.times, &traj.u_bar)?)?;
        }
        Command::AdaptiveSolve {
            config,
            init_basis,
            out,
            final_basis,
            ubar,
        } => {
            let cfg = RunConfig::load(&config)?;
            let basis = io::load_basis(&init_basis)?;
            check_grid(&basis, &cfg)?;
            let acfg = cfg.adaptive_config();
            acfg.validate()?;
            let mut source = FdBurst::new(&acfg)?;
            let run = run_adaptive(&acfg, basis, cfg.t_final, &mut source)?;
            let reports = &run.reports;
            let col = |f: &dyn Fn(&podgeq::adaptive::CheckReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
            let series = TimeSeries::new(
                col(&|r| r.time),
                vec![
                    ("residual_norm".into(), col(&|r| r.residual_norm)),
                    ("relative_residual".into(), col(&|r| r.relative_residual)),
                    ("relative_residual_after".into(), col(&|r| r.relative_residual_after)),
                    ("basis_size".into(), col(&|r| r.basis_size as f64)),
                    ("enriched".into(), col(&|r| r.enriched as f64)),
                    ("fd_fraction".into(), col(&|r| r.fd_fraction)),
                ],
            )?;
            write_series(&out, &series)?;
            eprintln!(
                "final r = {}, FD fraction {:.3}, {:.3} s",
                run.basis.r(),
                run.fd_fraction(),
                run.elapsed.as_secs_f64()
            );
            if let Some(path) = final_basis {
                io::save_basis(&path, &run.basis)?;
            }
            if let Some(path) = ubar {
                write_series(&path, &ubar_series(&run.trajectory.times, &run.trajectory.u_bar)?)?;
            }
        }
        Command::FlameSpeed { ubar, out, p_x, p_y } => {
            let series = read_series(&ubar)?;
            write_series(&out, &flame_speed(&series, [p_x, p_y])?)?;
        }
        Command::Compare {
            a,
            b,
            basis_a,
            basis_b,
            out,
        } => {
            let ra = load_run(&a, basis_a.as_deref())?;
            let rb = load_run(&b, basis_b.as_deref())?;
            let mut times = Vec::new();
            let mut fa = Vec::new();
            let mut fb = Vec::new();
            let mut j = 0;
            for (i, &t) in ra.times.iter().enumerate() {
                while j < rb.times.len() && rb.times[j] < t - time_tol(t) {
                    j += 1;
                }
                if j < rb.times.len() && (rb.times[j] - t).abs() <= time_tol(t) {
                    times.push(t);
                    fa.push(ra.field(i));
                    fb.push(rb.field(j));
                }
            }
            if times.is_empty() {
                return Err(Error::Config("runs share no record times".into()));
            }
            let rel = fa
                .iter()
                .zip(&fb)
                .map(|(x, y)| relative_l2_error(x, y).unwrap_or(f64::NAN))
                .collect::<Vec<_>>();
            let sq = fa
                .iter()
                .zip(&fb)
                .map(|(x, y)| (x - y).norm_l2().powi(2))
                .collect::<Vec<_>>();
            write_series(&out, &TimeSeries::new(times, vec![("rel_l2".into(), rel), ("sq_l2".into(), sq)])?)?;
            if fa.len() >= 2 {
                println!("time-averaged squared L2 error {:e}", time_averaged_sq_error(&fa, &fb)?);
            }
        }
    }
    Ok(())
}

fn time_tol(t: f64) -> f64 {
    1e-9 * t.abs().max(1.0)
}

fn steps_in(span: f64, dt: f64) -> Result<usize> {
    let q = span / dt;
    if !(q >= 1.0) || (q - q.round()).abs() > 1e-6 {
        return Err(Error::Config(format!("t_final {span} is not a positive multiple of dt {dt}")));
    }
    Ok(q.round() as usize)
}

fn check_grid(basis: &PodBasis, cfg: &RunConfig) -> Result<()> {
    if basis.grid().n_cells() != cfg.n_cells {
        return Err(Error::Config(format!(
            "basis is on a {} grid but the config says n_cells = {}",
            basis.grid().n_cells(),
            cfg.n_cells
        )));
    }
    Ok(())
}

/// Full fields `u` at a list of times.
enum Run {
    Snapshots(podgeq::snapshots::SnapshotSet),
    Reduced { basis: PodBasis, series: TimeSeries },
}

struct LoadedRun {
    times: Vec<f64>,
    run: Run,
}

impl LoadedRun {
    fn field(&self, k: usize) -> ScalarField {
        match &self.run {
            Run::Snapshots(s) => s.full_field(k),
            Run::Reduced { basis, series } => {
                let a: Vec<f64> = (0..basis.r())
                    .map(|i| series.column(&format!("a{}", i + 1)).map_or(0.0, |c| c[k]))
                    .collect();
                let u_bar = series.column("u_bar").map_or(0.0, |c| c[k]);
                reconstruct(basis, &a, u_bar)
            }
        }
    }
}

fn load_run(path: &Path, basis: Option<&Path>) -> Result<LoadedRun> {
    let mut head = [0u8; 7];
    let n = File::open(path)?.read(&mut head)?;
    if n == 7 && &head == MAGIC.as_bytes() {
        let s = io::load_snapshots(path)?;
        return Ok(LoadedRun {
            times: s.times().to_vec(),
            run: Run::Snapshots(s),
        });
    }
    let basis = basis.ok_or_else(|| {
        Error::Config(format!("{} is a coefficient file; pass its basis", path.display()))
    })?;
    let basis = io::load_basis(basis)?;
    let series = read_series(path)?;
    if series.column("u_bar").is_none() || series.column(&format!("a{}", basis.r())).is_none() {
        return Err(Error::Config(format!(
            "{} lacks u_bar or a1..a{} columns",
            path.display(),
            basis.r()
        )));
    }
    Ok(LoadedRun {
        times: series.times().to_vec(),
        run: Run::Reduced { basis, series },
    })
}
