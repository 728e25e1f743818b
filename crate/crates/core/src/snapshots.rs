use crate::error::{Error, FormatError, Result};
use crate::grid::{GridSpec, ScalarField};

/// Mean-free solution snapshots `û(t_0..t_m)`, their backward difference
/// quotients `(û(t_i) - û(t_{i-1})) / (t_i - t_{i-1})`, and the means `ū(t_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    grid: GridSpec,
    times: Vec<f64>,
    u_hat: Vec<ScalarField>,
    dq: Vec<ScalarField>,
    u_bar: Vec<f64>,
}

impl SnapshotSet {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            times: Vec::new(),
            u_hat: Vec::new(),
            dq: Vec::new(),
            u_bar: Vec::new(),
        }
    }

    /// Rebuilds a set from stored parts, checking the structural invariants.
    pub fn from_parts(
        grid: GridSpec,
        times: Vec<f64>,
        u_hat: Vec<ScalarField>,
        dq: Vec<ScalarField>,
        u_bar: Vec<f64>,
    ) -> Result<Self> {
        let m = times.len();
        if u_hat.len() != m || u_bar.len() != m || dq.len() + 1 != m.max(1) {
            return Err(FormatError::Dimension(format!(
                "{} times, {} snapshots, {} difference quotients, {} means",
                m,
                u_hat.len(),
                dq.len(),
                u_bar.len()
            ))
            .into());
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FormatError::Dimension("times not strictly increasing".into()).into());
        }
        if u_hat.iter().chain(&dq).any(|f| f.grid() != grid) {
            return Err(FormatError::Dimension("field grid differs from header".into()).into());
        }
        Ok(Self {
            grid,
            times,
            u_hat,
            dq,
            u_bar,
        })
    }

    /// Appends the full periodic solution `u` at time `t`.
    pub fn push(&mut self, t: f64, u: &ScalarField) -> Result<()> {
        u.check_same_grid(&ScalarField::zeros(self.grid))?;
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::InvalidParameter(format!(
                    "snapshot time {t} not after {last}"
                )));
            }
        }
        let mean = u.mean()?;
        let hat = u.map(|v| v - mean);
        if let (Some(prev), Some(&t_prev)) = (self.u_hat.last(), self.times.last()) {
            let inv = 1.0 / (t - t_prev);
            self.dq.push(hat.zip_map(prev, |a, b| (a - b) * inv));
        }
        self.times.push(t);
        self.u_hat.push(hat);
        self.u_bar.push(mean);
        Ok(())
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn u_hat(&self) -> &[ScalarField] {
        &self.u_hat
    }

    pub fn dq(&self) -> &[ScalarField] {
        &self.dq
    }

    pub fn u_bar(&self) -> &[f64] {
        &self.u_bar
    }

    /// Number of recorded instants, `m + 1`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Total snapshot count `2m + 1` used by the POD.
    pub fn total(&self) -> usize {
        self.u_hat.len() + self.dq.len()
    }

    /// All POD snapshots: the `û` fields followed by the difference quotients.
    pub fn fields(&self) -> impl Iterator<Item = &ScalarField> + Clone {
        self.u_hat.iter().chain(self.dq.iter())
    }

    /// Full field `û + ū` at record `k`.
    pub fn full_field(&self, k: usize) -> ScalarField {
        let m = self.u_bar[k];
        self.u_hat[k].map(|v| v + m)
    }

    /// Index of the record at time `t` (within `1e-9`).
    pub fn index_of_time(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-9)
    }

    /// The records with `t <= t_max`, as a new set.
    pub fn window(&self, t_max: f64) -> SnapshotSet {
        let k = self
            .times
            .iter()
            .take_while(|&&t| t <= t_max + 1e-9)
            .count();
        SnapshotSet {
            grid: self.grid,
            times: self.times[..k].to_vec(),
            u_hat: self.u_hat[..k].to_vec(),
            dq: self.dq[..k.saturating_sub(1)].to_vec(),
            u_bar: self.u_bar[..k].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn push_maintains_invariants() {
        let g = GridSpec::new(16).unwrap();
        let mut s = SnapshotSet::new(g);
        for k in 0..5 {
            let t = k as f64 * 0.1;
            let u = ScalarField::from_fn(g, |x, y| -t + t * (2.0 * PI * x).sin() * y);
            s.push(t, &u).unwrap();
        }
        assert_eq!(s.len(), 5);
        assert_eq!(s.dq().len(), 4);
        assert_eq!(s.total(), 9);
        for f in s.u_hat() {
            assert!(f.integrate().unwrap().abs() < 1e-10);
        }
        for i in 1..5 {
            let dt = s.times()[i] - s.times()[i - 1];
            let expect = s.u_hat()[i].zip_map(&s.u_hat()[i - 1], |a, b| (a - b) * (1.0 / dt));
            assert_eq!(s.dq()[i - 1], expect);
        }
        let w = s.window(0.25);
        assert_eq!(w.len(), 3);
        assert_eq!(w.total(), 5);
    }

    #[test]
    fn rejects_non_increasing_times() {
        let g = GridSpec::new(8).unwrap();
        let mut s = SnapshotSet::new(g);
        s.push(0.0, &ScalarField::zeros(g)).unwrap();
        assert!(s.push(0.0, &ScalarField::zeros(g)).is_err());
    }
}
