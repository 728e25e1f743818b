//! "PODGEQ1" container: a line-oriented text header ending in `end`,
//! followed by little-endian `f64` payload, fields row-major (x index
//! outer) and concatenated in header order.
//!
//! Snapshot files carry `count = m + 1` records: the payload is the `û`
//! fields, then the `m` difference quotients, then the `m + 1` means.
//! Basis files carry `count = r` fields plus the full spectrum in the
//! header.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::grid::{GridSpec, InnerProductKind, ScalarField};
use crate::pod::PodBasis;
use crate::snapshots::SnapshotSet;
use crate::timeseries::fmt_f64;

pub const MAGIC: &str = "PODGEQ1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Snapshots,
    Basis,
}

impl RecordKind {
    fn as_str(&self) -> &'static str {
        match self {
            RecordKind::Snapshots => "snapshots",
            RecordKind::Basis => "basis",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Header {
    kind: RecordKind,
    n_cells: usize,
    count: usize,
    inner: Option<InnerProductKind>,
    times: Vec<f64>,
    eigs: Vec<f64>,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ")
}

fn write_header<W: Write>(w: &mut W, h: &Header) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "kind {}", h.kind.as_str())?;
    writeln!(w, "n_cells {}", h.n_cells)?;
    writeln!(w, "count {}", h.count)?;
    writeln!(w, "inner {}", h.inner.map_or("none", |k| k.as_str()))?;
    writeln!(w, "times {}", join(&h.times))?;
    if h.kind == RecordKind::Basis {
        writeln!(w, "eigs {}", join(&h.eigs))?;
    }
    writeln!(w, "end")?;
    Ok(())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| FormatError::Header(format!("not a number: {t:?}")).into())
        })
        .collect()
}

fn read_header<R: BufRead>(r: &mut R) -> Result<Header> {
    let mut line = String::new();
    let mut magic = [0u8; 8];
    let got = read_up_to(r, &mut magic)?;
    if got < 8 || &magic[..7] != MAGIC.as_bytes() || magic[7] != b'\n' {
        return Err(FormatError::Magic(String::from_utf8_lossy(&magic[..got]).trim_end().to_string()).into());
    }
    let (mut kind, mut n_cells, mut count, mut inner, mut times, mut eigs) =
        (None, None, None, None, None, Vec::new());
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(FormatError::Header("missing end line".into()).into());
        }
        let l = line.trim_end_matches('\n');
        if l == "end" {
            break;
        }
        let (key, rest) = l.split_once(' ').unwrap_or((l, ""));
        let int = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::from(FormatError::Header(format!("bad {key}: {s:?}"))))
        };
        match key {
            "kind" => {
                kind = Some(match rest.trim() {
                    "snapshots" => RecordKind::Snapshots,
                    "basis" => RecordKind::Basis,
                    other => return Err(FormatError::Header(format!("unknown record kind {other:?}")).into()),
                })
            }
            "n_cells" => n_cells = Some(int(rest)?),
            "count" => count = Some(int(rest)?),
            "inner" => {
                inner = Some(match rest.trim() {
                    "none" => None,
                    k => Some(k.parse::<InnerProductKind>().map_err(|_| {
                        Error::from(FormatError::Header(format!("unknown inner product {k:?}")))
                    })?),
                })
            }
            "times" => times = Some(parse_list(rest)?),
            "eigs" => eigs = parse_list(rest)?,
            other => return Err(FormatError::Header(format!("unknown header key {other:?}")).into()),
        }
    }
    let missing = |k: &str| Error::from(FormatError::Header(format!("missing {k}")));
    Ok(Header {
        kind: kind.ok_or_else(|| missing("kind"))?,
        n_cells: n_cells.ok_or_else(|| missing("n_cells"))?,
        count: count.ok_or_else(|| missing("count"))?,
        inner: inner.ok_or_else(|| missing("inner"))?,
        times: times.ok_or_else(|| missing("times"))?,
        eigs,
    })
}

fn read_up_to<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        let n = r.read(&mut buf[got..])?;
        if n == 0 {
            break;
        }
        got += n;
    }
    Ok(got)
}

fn write_values<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_payload<R: Read>(r: &mut R, n_values: usize) -> Result<Vec<f64>> {
    let expected = n_values * 8;
    let mut bytes = Vec::with_capacity(expected);
    r.read_to_end(&mut bytes)?;
    if bytes.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            found: bytes.len(),
        }
        .into());
    }
    if bytes.len() > expected {
        return Err(FormatError::Dimension(format!(
            "payload has {} bytes, header implies {expected}",
            bytes.len()
        ))
        .into());
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn grid_of(h: &Header) -> Result<GridSpec> {
    GridSpec::new(h.n_cells)
        .map_err(|_| FormatError::Dimension(format!("n_cells {} below minimum", h.n_cells)).into())
}

fn fields_from(grid: GridSpec, values: &[f64], count: usize) -> Vec<ScalarField> {
    values
        .chunks_exact(grid.len())
        .take(count)
        .map(|c| ScalarField::from_values(grid, c.to_vec()).expect("chunk is grid-sized"))
        .collect()
}

pub fn write_snapshots<W: Write>(mut w: W, s: &SnapshotSet, inner: Option<InnerProductKind>) -> Result<()> {
    write_header(
        &mut w,
        &Header {
            kind: RecordKind::Snapshots,
            n_cells: s.grid().n_cells(),
            count: s.len(),
            inner,
            times: s.times().to_vec(),
            eigs: Vec::new(),
        },
    )?;
    for f in s.u_hat().iter().chain(s.dq()) {
        write_values(&mut w, f.values())?;
    }
    write_values(&mut w, s.u_bar())?;
    w.flush()?;
    Ok(())
}

pub fn read_snapshots<R: BufRead>(mut r: R) -> Result<SnapshotSet> {
    let h = read_header(&mut r)?;
    if h.kind != RecordKind::Snapshots {
        return Err(FormatError::Dimension(format!("expected snapshots, found {}", h.kind.as_str())).into());
    }
    if h.times.len() != h.count || h.count == 0 {
        return Err(FormatError::Dimension(format!("count {} but {} times", h.count, h.times.len())).into());
    }
    let grid = grid_of(&h)?;
    let m1 = h.count;
    let n_fields = 2 * m1 - 1;
    let values = read_payload(&mut r, n_fields * grid.len() + m1)?;
    let fields_end = n_fields * grid.len();
    let mut fields = fields_from(grid, &values[..fields_end], n_fields);
    let dq = fields.split_off(m1);
    SnapshotSet::from_parts(grid, h.times, fields, dq, values[fields_end..].to_vec())
}

pub fn write_basis<W: Write>(mut w: W, b: &PodBasis) -> Result<()> {
    write_header(
        &mut w,
        &Header {
            kind: RecordKind::Basis,
            n_cells: b.grid().n_cells(),
            count: b.r(),
            inner: Some(b.kind),
            times: Vec::new(),
            eigs: b.eigs.clone(),
        },
    )?;
    for f in &b.psis {
        write_values(&mut w, f.values())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_basis<R: BufRead>(mut r: R) -> Result<PodBasis> {
    let h = read_header(&mut r)?;
    if h.kind != RecordKind::Basis {
        return Err(FormatError::Dimension(format!("expected basis, found {}", h.kind.as_str())).into());
    }
    let kind = h
        .inner
        .ok_or_else(|| FormatError::Header("basis needs an inner product".into()))?;
    if h.count == 0 {
        return Err(FormatError::Dimension("empty basis".into()).into());
    }
    let grid = grid_of(&h)?;
    let values = read_payload(&mut r, h.count * grid.len())?;
    Ok(PodBasis {
        kind,
        psis: fields_from(grid, &values, h.count),
        eigs: h.eigs,
    })
}

pub fn save_snapshots(path: &Path, s: &SnapshotSet, inner: Option<InnerProductKind>) -> Result<()> {
    write_snapshots(BufWriter::new(File::create(path)?), s, inner)
}

pub fn load_snapshots(path: &Path) -> Result<SnapshotSet> {
    read_snapshots(BufReader::new(File::open(path)?))
}

pub fn save_basis(path: &Path, b: &PodBasis) -> Result<()> {
    write_basis(BufWriter::new(File::create(path)?), b)
}

pub fn load_basis(path: &Path) -> Result<PodBasis> {
    read_basis(BufReader::new(File::open(path)?))
}
