//! Method-of-snapshots proper orthogonal decomposition.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{gram_weight, inner_unchecked, GridSpec, InnerProductKind, ScalarField};
use crate::snapshots::SnapshotSet;

/// Off-diagonal stopping threshold of the Jacobi sweeps, relative to `‖K‖_F`.
pub const JACOBI_TOLERANCE: f64 = 1e-14;
/// Eigenvalues below this fraction of the largest are numerically zero.
pub const DROP_THRESHOLD: f64 = 1e-12;
/// Matrices larger than this go to the Householder-QR eigensolver; Jacobi
/// sweeps cost `O(n^3)` each and dominate the offline stage beyond it.
pub const JACOBI_MAX_DIM: usize = 256;
const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// `K_ij = inner(s_i, s_j, kind) / m` over the given snapshot fields.
pub fn correlation_of(fields: &[&ScalarField], kind: InnerProductKind) -> Result<DMatrix<f64>> {
    let m = fields.len();
    let Some(first) = fields.first() else {
        return Err(Error::EmptySnapshots);
    };
    let grid = first.grid();
    for f in fields {
        first.check_same_grid(f)?;
    }
    let n = grid.len();
    let s = DMatrix::from_fn(n, m, |i, j| fields[j].values()[i]);
    let weighted = match kind {
        InnerProductKind::L2 => None,
        InnerProductKind::H1 => {
            let mut w = DMatrix::zeros(n, m);
            for (j, f) in fields.iter().enumerate() {
                w.column_mut(j)
                    .copy_from_slice(gram_weight(f, kind).values());
            }
            Some(w)
        }
    };
    let mut k = s.tr_mul(weighted.as_ref().unwrap_or(&s));
    k /= (n * m) as f64;
    let sym = (&k + k.transpose()) * 0.5;
    Ok(sym)
}

/// Correlation matrix of the `2m+1` POD snapshots (the `û` fields followed by
/// the difference quotients).
pub fn correlation(snapshots: &SnapshotSet, kind: InnerProductKind) -> Result<DMatrix<f64>> {
    let fields: Vec<&ScalarField> = snapshots.fields().collect();
    correlation_of(&fields, kind)
}

/// Eigenvalues (descending) and matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn check_symmetric(k: &DMatrix<f64>) -> Result<()> {
    if !k.is_square() {
        return Err(Error::NotSymmetric(f64::INFINITY));
    }
    let scale = k.amax();
    let asym = (k - k.transpose()).amax();
    if scale > 0.0 && asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric(asym / scale));
    }
    Ok(())
}

fn sorted_descending(values: Vec<f64>, vectors: DMatrix<f64>) -> SymEig {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let n = vectors.nrows();
    let sorted_vecs = DMatrix::from_fn(n, order.len(), |i, j| vectors[(i, order[j])]);
    SymEig {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: sorted_vecs,
    }
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius mass drops to
/// `JACOBI_TOLERANCE · ‖K‖_F`.
pub fn jacobi_eig(k: &DMatrix<f64>) -> Result<SymEig> {
    check_symmetric(k)?;
    let n = k.nrows();
    let mut a = (k + k.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let total = a.norm();
    let target = JACOBI_TOLERANCE * total;
    let off = |a: &DMatrix<f64>| {
        let mut s = 0.0;
        for q in 0..n {
            for p in 0..q {
                s += a[(p, q)] * a[(p, q)];
            }
        }
        (2.0 * s).sqrt()
    };
    for _sweep in 0..100 {
        if off(&a) <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = c * arp - s * arq;
                    a[(r, q)] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[(p, r)];
                    let aqr = a[(q, r)];
                    a[(p, r)] = c * apr - s * aqr;
                    a[(q, r)] = s * apr + c * aqr;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[(i, i)]).collect();
    Ok(sorted_descending(values, v))
}

/// Householder tridiagonalization plus implicit QR (nalgebra).
pub fn dense_eig(k: &DMatrix<f64>) -> Result<SymEig> {
    check_symmetric(k)?;
    let sym = (k + k.transpose()) * 0.5;
    let e = sym.symmetric_eigen();
    Ok(sorted_descending(e.eigenvalues.iter().copied().collect(), e.eigenvectors))
}

/// Symmetric eigendecomposition: Jacobi up to `JACOBI_MAX_DIM`, dense QR
/// beyond.
pub fn sym_eig(k: &DMatrix<f64>) -> Result<SymEig> {
    if k.nrows() <= JACOBI_MAX_DIM {
        jacobi_eig(k)
    } else {
        dense_eig(k)
    }
}

/// Reduced basis orthonormal in `kind`, with the full spectrum it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    pub kind: InnerProductKind,
    pub psis: Vec<ScalarField>,
    /// Full descending spectrum; tiny negatives clipped to zero.
    pub eigs: Vec<f64>,
}

impl PodBasis {
    pub fn r(&self) -> usize {
        self.psis.len()
    }

    pub fn grid(&self) -> GridSpec {
        self.psis[0].grid()
    }

    /// `Σ a_i ψ_i`
    pub fn combine(&self, a: &[f64]) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid());
        for (ai, psi) in a.iter().zip(&self.psis) {
            out.axpy(*ai, psi);
        }
        out
    }

    /// Coefficients `inner(u, ψ_i, kind)`.
    pub fn project(&self, u: &ScalarField) -> Vec<f64> {
        self.psis
            .iter()
            .map(|psi| inner_unchecked(u, psi, self.kind))
            .collect()
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.psis.iter().enumerate() {
            for (j, b) in self.psis.iter().enumerate().take(i + 1) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((inner_unchecked(a, b, self.kind) - target).abs());
            }
        }
        worst
    }

    /// Eigenvalue mass beyond the current rank.
    pub fn tail(&self) -> f64 {
        self.eigs.iter().skip(self.r()).sum()
    }
}

/// `ψ_k = (m λ_k)^{-1/2} Σ_j (v_k)_j s_j` for `k = 1..r`, followed by one
/// modified Gram-Schmidt pass to remove round-off in the weak modes.
pub fn build_basis_of(
    fields: &[&ScalarField],
    kind: InnerProductKind,
    eig: &SymEig,
    r: usize,
) -> Result<PodBasis> {
    let m = fields.len();
    if m == 0 {
        return Err(Error::EmptySnapshots);
    }
    let lambda1 = eig.values.first().copied().unwrap_or(0.0);
    if !(lambda1 > 0.0) {
        return Err(Error::ZeroSpectrum);
    }
    let available = numerical_rank(&eig.values);
    if r == 0 || r > available {
        return Err(Error::RankExceedsNumericalRank {
            requested: r,
            available,
        });
    }
    let grid = fields[0].grid();
    let n = grid.len();
    let s = DMatrix::from_fn(n, m, |i, j| fields[j].values()[i]);
    let mut coeffs = eig.vectors.columns(0, r).into_owned();
    for k in 0..r {
        let scale = 1.0 / ((m as f64) * eig.values[k]).sqrt();
        coeffs.column_mut(k).scale_mut(scale);
    }
    let modes = s * coeffs;
    let mut psis: Vec<ScalarField> = (0..r)
        .map(|k| ScalarField::from_values(grid, modes.column(k).iter().copied().collect()))
        .collect::<Result<_>>()?;
    orthonormalize(&mut psis, kind);
    let floor = -DROP_THRESHOLD * lambda1;
    let eigs = eig
        .values
        .iter()
        .map(|&l| if l < 0.0 && l >= floor { 0.0 } else { l.max(0.0) })
        .collect();
    let basis = PodBasis { kind, psis, eigs };
    let defect = basis.orthonormality_defect();
    if defect > 1e-8 {
        return Err(Error::NotOrthonormal(defect));
    }
    Ok(basis)
}

pub fn build_basis(
    snapshots: &SnapshotSet,
    kind: InnerProductKind,
    eig: &SymEig,
    r: usize,
) -> Result<PodBasis> {
    let fields: Vec<&ScalarField> = snapshots.fields().collect();
    build_basis_of(&fields, kind, eig, r)
}

/// Modified Gram-Schmidt in place (no dropping).
fn orthonormalize(psis: &mut [ScalarField], kind: InnerProductKind) {
    for i in 0..psis.len() {
        let (done, rest) = psis.split_at_mut(i);
        let v = &mut rest[0];
        for q in done.iter() {
            let c = inner_unchecked(v, q, kind);
            v.axpy(-c, q);
        }
        let norm = inner_unchecked(v, v, kind).sqrt();
        *v = v.scaled(1.0 / norm);
    }
}

/// Count of eigenvalues at or above `DROP_THRESHOLD · λ_1`.
pub fn numerical_rank(eigs: &[f64]) -> usize {
    let Some(&l1) = eigs.first() else { return 0 };
    if !(l1 > 0.0) {
        return 0;
    }
    eigs.iter().take_while(|&&l| l >= DROP_THRESHOLD * l1).count()
}

/// Smallest `r` with `Σ_{l>r} λ_l / Σ_l λ_l <= e_pod`.
pub fn select_rank(eigs: &[f64], e_pod: f64) -> Result<usize> {
    let clipped: Vec<f64> = eigs.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroSpectrum);
    }
    // suffix sums accumulated from the small end avoid cancellation
    let mut tails = vec![0.0; clipped.len() + 1];
    for r in (0..clipped.len()).rev() {
        tails[r] = tails[r + 1] + clipped[r];
    }
    let r = (1..=clipped.len())
        .find(|&r| tails[r] <= e_pod * total * (1.0 + 1e-12))
        .unwrap_or(clipped.len());
    Ok(r)
}

/// `(1/m) Σ_i ‖s_i − Π_r s_i‖²_kind`, evaluated field by field.
pub fn projection_residual_of(fields: &[&ScalarField], basis: &PodBasis) -> f64 {
    let m = fields.len() as f64;
    fields
        .iter()
        .map(|s| {
            let coeffs = basis.project(s);
            let mut res = (*s).clone();
            for (c, psi) in coeffs.iter().zip(&basis.psis) {
                res.axpy(-c, psi);
            }
            inner_unchecked(&res, &res, basis.kind)
        })
        .sum::<f64>()
        / m
}

pub fn projection_residual(snapshots: &SnapshotSet, basis: &PodBasis) -> f64 {
    let fields: Vec<&ScalarField> = snapshots.fields().collect();
    projection_residual_of(&fields, basis)
}

/// Correlation, eigendecomposition, rank selection and basis assembly.
pub fn pod_of(fields: &[&ScalarField], kind: InnerProductKind, e_pod: f64) -> Result<PodBasis> {
    let k = correlation_of(fields, kind)?;
    let eig = sym_eig(&k)?;
    let r = select_rank(&eig.values, e_pod)?.min(numerical_rank(&eig.values));
    build_basis_of(fields, kind, &eig, r)
}

pub fn pod(snapshots: &SnapshotSet, kind: InnerProductKind, e_pod: f64) -> Result<PodBasis> {
    let fields: Vec<&ScalarField> = snapshots.fields().collect();
    pod_of(&fields, kind, e_pod)
}

/// As [`pod`] with a prescribed rank.
pub fn pod_with_rank(snapshots: &SnapshotSet, kind: InnerProductKind, r: usize) -> Result<PodBasis> {
    let fields: Vec<&ScalarField> = snapshots.fields().collect();
    let k = correlation_of(&fields, kind)?;
    let eig = sym_eig(&k)?;
    build_basis_of(&fields, kind, &eig, r)
}
