//! Flame speeds, error metrics and timing summaries.

use std::time::Duration;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::timeseries::TimeSeries;

/// `S_full(t) = −((p_x + p_y)/2 + ū(t)) / t` and `S_bar(t) = −ū(t) / t`
/// from a series with a `u_bar` column; rows with `t <= 0` are dropped.
pub fn flame_speed(u_bar: &TimeSeries, p: [f64; 2]) -> Result<TimeSeries> {
    let col = u_bar
        .column("u_bar")
        .ok_or_else(|| Error::InvalidParameter("series has no u_bar column".into()))?;
    let offset = 0.5 * (p[0] + p[1]);
    let mut times = Vec::new();
    let mut full = Vec::new();
    let mut bar = Vec::new();
    for (&t, &ub) in u_bar.times().iter().zip(col) {
        if t <= 0.0 {
            continue;
        }
        times.push(t);
        full.push(-(offset + ub) / t);
        bar.push(-ub / t);
    }
    TimeSeries::new(times, vec![("s_full".into(), full), ("s_bar".into(), bar)])
}

/// `‖test − reference‖_{L²} / ‖reference‖_{L²}`
pub fn relative_l2_error(test: &ScalarField, reference: &ScalarField) -> Result<f64> {
    test.check_same_grid(reference)?;
    let denom = reference.norm_l2();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((test - reference).norm_l2() / denom)
}

/// `(1/m) Σ_{k=1..m} ‖test_k − reference_k‖²_{L²}`, skipping the initial
/// record.
pub fn time_averaged_sq_error(test: &[ScalarField], reference: &[ScalarField]) -> Result<f64> {
    if test.len() != reference.len() || test.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "trajectories of length {} and {} cannot be compared",
            test.len(),
            reference.len()
        )));
    }
    let mut acc = 0.0;
    for (a, b) in test.iter().zip(reference).skip(1) {
        a.check_same_grid(b)?;
        let n = (a - b).norm_l2();
        acc += n * n;
    }
    Ok(acc / (test.len() - 1) as f64)
}

/// Wall-clock seconds of the three stages and the online speedup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingReport {
    pub fd_seconds: f64,
    pub rom_offline_seconds: f64,
    pub rom_online_seconds: f64,
    pub speedup: f64,
}

pub fn timing_report(fd: Duration, rom_offline: Duration, rom_online: Duration) -> TimingReport {
    let fd_seconds = fd.as_secs_f64();
    let rom_online_seconds = rom_online.as_secs_f64();
    TimingReport {
        fd_seconds,
        rom_offline_seconds: rom_offline.as_secs_f64(),
        rom_online_seconds,
        speedup: fd_seconds / rom_online_seconds,
    }
}

impl std::fmt::Display for TimingReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "fd {:.3} s, rom offline {:.3} s, rom online {:.4} s, speedup {:.1}x",
            self.fd_seconds, self.rom_offline_seconds, self.rom_online_seconds, self.speedup
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn planar_flame_speed_is_one() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let ub: Vec<f64> = times.iter().map(|t| -t).collect();
        let s = TimeSeries::new(times, vec![("u_bar".into(), ub)]).unwrap();
        let speed = flame_speed(&s, [1.0, 0.0]).unwrap();
        assert_eq!(speed.len(), 10);
        for v in speed.column("s_bar").unwrap() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn estimator_offset() {
        let s = TimeSeries::new(vec![8.0], vec![("u_bar".into(), vec![-3.0])]).unwrap();
        let speed = flame_speed(&s, [1.0, 0.0]).unwrap();
        let diff = speed.column("s_bar").unwrap()[0] - speed.column("s_full").unwrap()[0];
        assert!((diff - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn relative_error_examples() {
        let g = GridSpec::new(8).unwrap();
        let u = ScalarField::from_fn(g, |x, y| x + 2.0 * y + 0.1);
        assert_eq!(relative_l2_error(&u, &u).unwrap(), 0.0);
        assert!((relative_l2_error(&u.scaled(1.1), &u).unwrap() - 0.1).abs() < 1e-12);
        assert!(matches!(
            relative_l2_error(&u, &ScalarField::zeros(g)),
            Err(Error::ZeroReference)
        ));
    }

    #[test]
    fn time_average_skips_initial_record() {
        let g = GridSpec::new(8).unwrap();
        let a = vec![ScalarField::constant(g, 5.0), ScalarField::constant(g, 1.0), ScalarField::constant(g, 2.0)];
        let b = vec![ScalarField::zeros(g); 3];
        assert!((time_averaged_sq_error(&a, &b).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn speedup_is_fd_over_online() {
        let r = timing_report(Duration::from_secs(10), Duration::from_secs(3), Duration::from_millis(100));
        assert!((r.speedup - 100.0).abs() < 1e-9);
        assert_eq!(r.rom_offline_seconds, 3.0);
    }
}
