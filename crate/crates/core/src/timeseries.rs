//! Named columns over shared timestamps, with full-precision CSV.

use std::io::{BufRead, Write};

use crate::error::{Error, FormatError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    columns: Vec<(String, Vec<f64>)>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("times not strictly increasing".into()));
        }
        for (name, col) in &columns {
            if col.len() != times.len() {
                return Err(Error::InvalidParameter(format!(
                    "column {name:?} has {} rows, expected {}",
                    col.len(),
                    times.len()
                )));
            }
        }
        Ok(Self { times, columns })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_slice())
    }

    pub fn columns(&self) -> &[(String, Vec<f64>)] {
        &self.columns
    }

    /// Header `t,<names…>` then one row per time; values use the shortest
    /// representation that round-trips (at most 17 significant digits).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for (n, _) in &self.columns {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (k, t) in self.times.iter().enumerate() {
            write!(w, "{}", fmt_f64(*t))?;
            for (_, c) in &self.columns {
                write!(w, ",{}", fmt_f64(c[k]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| FormatError::Header("empty CSV".into()))??;
        let names: Vec<&str> = header.trim().split(',').collect();
        if names.first() != Some(&"t") {
            return Err(FormatError::Header(format!("first column must be t, got {header:?}")).into());
        }
        let mut times = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len() - 1];
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<&str> = line.trim().split(',').collect();
            if vals.len() != names.len() {
                return Err(FormatError::Dimension(format!(
                    "row {} has {} fields, header has {}",
                    lineno + 2,
                    vals.len(),
                    names.len()
                ))
                .into());
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::from(FormatError::Header(format!("not a number: {s:?}"))))
            };
            times.push(parse(vals[0])?);
            for (c, v) in cols.iter_mut().zip(&vals[1..]) {
                c.push(parse(v)?);
            }
        }
        let columns = names[1..].iter().map(|n| n.to_string()).zip(cols).collect();
        Self::new(times, columns)
    }
}

/// Rust's `Display` for `f64` prints the shortest string that parses back to
/// the same value, which never needs more than 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() && v != 0.0 && (v.abs() >= 1e16 || v.abs() < 1e-5) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let times = vec![0.0, 0.1, 0.2, 1.0 / 3.0];
        let a = vec![1.0 / 7.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE];
        let b = vec![std::f64::consts::PI, -0.0, 1e-7, 123456789.123456789];
        let s = TimeSeries::new(times, vec![("a".into(), a), ("b".into(), b)]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = TimeSeries::read_csv(buf.as_slice()).unwrap();
        assert_eq!(s, back);
        for (x, y) in s.column("a").unwrap().iter().zip(back.column("a").unwrap()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn rejects_ragged_and_unordered() {
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![]).is_err());
        assert!(TimeSeries::new(vec![0.0], vec![("x".into(), vec![])]).is_err());
        assert!(TimeSeries::read_csv("t,x\n0,1,2\n".as_bytes()).is_err());
    }
}
