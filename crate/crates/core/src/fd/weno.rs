//! Fifth-order Hamilton-Jacobi WENO one-sided derivatives (Jiang-Peng weights).

use crate::grid::{GridSpec, ScalarField};

/// Regularization in the smoothness indicators.
pub const WENO_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Left- and right-biased derivative approximations along one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct WenoPair {
    pub minus: ScalarField,
    pub plus: ScalarField,
}

/// Combines five consecutive divided differences into the WENO5 value.
#[inline(always)]
pub fn weno5(v1: f64, v2: f64, v3: f64, v4: f64, v5: f64) -> f64 {
    let phi1 = v1 / 3.0 - 7.0 / 6.0 * v2 + 11.0 / 6.0 * v3;
    let phi2 = -v2 / 6.0 + 5.0 / 6.0 * v3 + v4 / 3.0;
    let phi3 = v3 / 3.0 + 5.0 / 6.0 * v4 - v5 / 6.0;

    let s1 = 13.0 / 12.0 * (v1 - 2.0 * v2 + v3).powi(2) + 0.25 * (v1 - 4.0 * v2 + 3.0 * v3).powi(2);
    let s2 = 13.0 / 12.0 * (v2 - 2.0 * v3 + v4).powi(2) + 0.25 * (v2 - v4).powi(2);
    let s3 = 13.0 / 12.0 * (v3 - 2.0 * v4 + v5).powi(2) + 0.25 * (3.0 * v3 - 4.0 * v4 + v5).powi(2);

    let a1 = 0.1 / (s1 + WENO_EPS).powi(2);
    let a2 = 0.6 / (s2 + WENO_EPS).powi(2);
    let a3 = 0.3 / (s3 + WENO_EPS).powi(2);
    (a1 * phi1 + a2 * phi2 + a3 * phi3) / (a1 + a2 + a3)
}

/// One-sided WENO5 derivatives of a periodic field along `axis`.
pub fn weno5_pair(field: &ScalarField, axis: Axis) -> WenoPair {
    let g = field.grid();
    let mut minus = vec![0.0; g.len()];
    let mut plus = vec![0.0; g.len()];
    weno5_pair_into(g, field.values(), axis, &mut minus, &mut plus);
    WenoPair {
        minus: ScalarField::from_values(g, minus).expect("grid-sized buffer"),
        plus: ScalarField::from_values(g, plus).expect("grid-sized buffer"),
    }
}

/// Buffer-reusing variant of [`weno5_pair`].
pub fn weno5_pair_into(g: GridSpec, u: &[f64], axis: Axis, minus: &mut [f64], plus: &mut [f64]) {
    let n = g.n_cells();
    let inv_h = 1.0 / g.spacing();
    let mut line = vec![0.0; n];
    let mut dp = vec![0.0; n + 6];
    // dp[k + 3] = (u[k+1] - u[k]) / h for k in -3..n+3, wrapped.
    let (stride, lines_stride) = match axis {
        Axis::X => (n, 1),
        Axis::Y => (1, n),
    };
    for l in 0..n {
        let base = l * lines_stride;
        for (k, slot) in line.iter_mut().enumerate() {
            *slot = u[base + k * stride];
        }
        for (m, d) in dp.iter_mut().enumerate() {
            let k = m as isize - 3;
            let a = line[g.wrap(k)];
            let b = line[g.wrap(k + 1)];
            *d = (b - a) * inv_h;
        }
        for k in 0..n {
            let c = k + 3;
            let out = base + k * stride;
            minus[out] = weno5(dp[c - 3], dp[c - 2], dp[c - 1], dp[c], dp[c + 1]);
            plus[out] = weno5(dp[c + 2], dp[c + 1], dp[c], dp[c - 1], dp[c - 2]);
        }
    }
}
