//! Diagonally preconditioned BiCGSTAB for the sparse nonsymmetric systems of
//! the semi-implicit steppers.

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 10_000;
pub const RELATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` with `A` applied by `matvec(x, out)` and a constant
/// diagonal preconditioner `diag`. `x` holds the initial guess on entry.
///
/// The iteration restarts from the current residual when the shadow inner
/// product degenerates.
pub fn bicgstab<F>(mut matvec: F, diag: f64, b: &[f64], x: &mut [f64]) -> Result<SolveStats>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_d = 1.0 / diag;
    let mut r = vec![0.0; n];
    let mut ax = vec![0.0; n];
    matvec(x, &mut ax);
    for k in 0..n {
        r[k] = b[k] - ax[k];
    }
    let mut rel = norm(&r) / b_norm;
    if rel <= RELATIVE_TOLERANCE {
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: rel,
        });
    }
    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);

    for it in 1..=MAX_ITERATIONS {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // restart
            r_hat.copy_from_slice(&r);
            p.iter_mut().for_each(|v| *v = 0.0);
            v.iter_mut().for_each(|v| *v = 0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
            y[k] = p[k] * inv_d;
        }
        matvec(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            omega = 0.0;
            continue;
        }
        alpha = rho / rv;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        if norm(&s) / b_norm <= RELATIVE_TOLERANCE {
            for k in 0..n {
                x[k] += alpha * y[k];
            }
            matvec(x, &mut ax);
            for k in 0..n {
                r[k] = b[k] - ax[k];
            }
            rel = norm(&r) / b_norm;
            if rel <= RELATIVE_TOLERANCE {
                return Ok(SolveStats {
                    iterations: it,
                    relative_residual: rel,
                });
            }
            continue;
        }
        for k in 0..n {
            z[k] = s[k] * inv_d;
        }
        matvec(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for k in 0..n {
            x[k] += alpha * y[k] + omega * z[k];
            r[k] = s[k] - omega * t[k];
        }
        rel = norm(&r) / b_norm;
        if rel <= RELATIVE_TOLERANCE {
            // confirm against the true residual
            matvec(x, &mut ax);
            for k in 0..n {
                r[k] = b[k] - ax[k];
            }
            rel = norm(&r) / b_norm;
            if rel <= RELATIVE_TOLERANCE {
                return Ok(SolveStats {
                    iterations: it,
                    relative_residual: rel,
                });
            }
        }
    }
    Err(Error::LinearSolve {
        iterations: MAX_ITERATIONS,
        residual: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Periodic 1D convection-diffusion: (1 + c) x_i - a x_{i-1} - b x_{i+1}.
    fn apply(x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let l = x[(i + n - 1) % n];
            let r = x[(i + 1) % n];
            out[i] = 3.0 * x[i] - 1.3 * l - 0.7 * r;
        }
    }

    #[test]
    fn solves_nonsymmetric_periodic_system() {
        let n = 64;
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin() + 0.1).collect();
        let mut b = vec![0.0; n];
        apply(&exact, &mut b);
        let mut x = vec![0.0; n];
        let stats = bicgstab(apply, 3.0, &b, &mut x).unwrap();
        assert!(stats.relative_residual <= RELATIVE_TOLERANCE);
        for (a, e) in x.iter().zip(&exact) {
            assert!((a - e).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut x = vec![1.0; 8];
        let stats = bicgstab(apply, 3.0, &[0.0; 8], &mut x).unwrap();
        assert_eq!(stats.iterations, 0);
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn singular_system_reports_failure() {
        // Pure periodic difference operator annihilates constants; rhs with
        // nonzero mean is inconsistent.
        let singular = |x: &[f64], out: &mut [f64]| {
            let n = x.len();
            for i in 0..n {
                out[i] = 2.0 * x[i] - x[(i + n - 1) % n] - x[(i + 1) % n];
            }
        };
        let b = vec![1.0; 16];
        let mut x = vec![0.0; 16];
        assert!(matches!(
            bicgstab(singular, 2.0, &b, &mut x),
            Err(Error::LinearSolve { .. })
        ));
    }
}
