//! Periodic uniform grids on the unit square and the field algebra built on them.
//!
//! Fields store the `n × n` unique nodes; node `n` is identified with node `0`.
//! Values are laid out row-major with the x index outermost, so
//! `values[i * n + j] = f(i h, j h)`.
//!
//! The composite trapezoid rule on a fully periodic grid reduces to the node
//! mean times the (unit) domain area, which is how [`ScalarField::integrate`]
//! is implemented.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Smallest admissible grid: the widest stencil in the crate has 7 points.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n_cells: usize,
    spacing: f64,
}

impl GridSpec {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(Error::InvalidParameter(format!(
                "n_cells must be at least {MIN_CELLS}, got {n_cells}"
            )));
        }
        Ok(Self {
            n_cells,
            spacing: 1.0 / n_cells as f64,
        })
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of stored nodes.
    #[inline]
    pub fn len(&self) -> usize {
        self.n_cells * self.n_cells
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_cells + j
    }

    /// Periodic wrap of a signed node offset.
    #[inline]
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n_cells as isize) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InnerProductKind {
    L2,
    H1,
}

impl InnerProductKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InnerProductKind::L2 => "l2",
            InnerProductKind::H1 => "h1",
        }
    }
}

impl std::str::FromStr for InnerProductKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(InnerProductKind::L2),
            "h1" => Ok(InnerProductKind::H1),
            other => Err(Error::Config(format!("unknown inner product {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = grid.n_cells();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            let x = grid.coord(i);
            for j in 0..n {
                values.push(f(x, grid.coord(j)));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(
                self.grid.n_cells(),
                other.grid.n_cells(),
            ));
        }
        Ok(())
    }

    /// Node mean without the finiteness check; the hot paths use this.
    #[inline]
    pub fn node_mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Composite trapezoid integral over the unit square.
    pub fn integrate(&self) -> Result<f64> {
        if !self.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(self.node_mean())
    }

    pub fn mean(&self) -> Result<f64> {
        self.integrate()
    }

    pub fn subtract_mean(&self) -> Result<ScalarField> {
        let m = self.mean()?;
        Ok(self.map(|v| v - m))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &ScalarField) {
        debug_assert_eq!(self.grid, x.grid);
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += alpha * v;
        }
    }

    pub fn scaled(&self, alpha: f64) -> ScalarField {
        self.map(|v| alpha * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L² norm (square root of the trapezoid integral of f²).
    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (s / self.values.len() as f64).sqrt()
    }

    pub fn norm(&self, kind: InnerProductKind) -> f64 {
        inner_unchecked(self, self, kind).max(0.0).sqrt()
    }

    /// Periodic shift: the result at node `(i, j)` is `self` at `(i - di, j - dj)`.
    pub fn shifted(&self, di: isize, dj: isize) -> ScalarField {
        let g = self.grid;
        let n = g.n_cells();
        let mut out = vec![0.0; g.len()];
        for i in 0..n {
            let si = g.wrap(i as isize - di);
            for j in 0..n {
                let sj = g.wrap(j as isize - dj);
                out[g.index(i, j)] = self.values[g.index(si, sj)];
            }
        }
        ScalarField { grid: g, values: out }
    }

    /// Fourth-order central gradient with periodic wrap.
    pub fn gradient_c4(&self) -> (ScalarField, ScalarField) {
        let g = self.grid;
        let n = g.n_cells();
        let c = 1.0 / (12.0 * g.spacing());
        let u = &self.values;
        let mut fx = vec![0.0; g.len()];
        let mut fy = vec![0.0; g.len()];
        for i in 0..n {
            let im2 = g.wrap(i as isize - 2) * n;
            let im1 = g.wrap(i as isize - 1) * n;
            let ip1 = g.wrap(i as isize + 1) * n;
            let ip2 = g.wrap(i as isize + 2) * n;
            let row = i * n;
            for j in 0..n {
                fx[row + j] =
                    (-u[ip2 + j] + 8.0 * u[ip1 + j] - 8.0 * u[im1 + j] + u[im2 + j]) * c;
            }
            for j in 0..n {
                let jm2 = g.wrap(j as isize - 2);
                let jm1 = g.wrap(j as isize - 1);
                let jp1 = g.wrap(j as isize + 1);
                let jp2 = g.wrap(j as isize + 2);
                fy[row + j] = (-u[row + jp2] + 8.0 * u[row + jp1] - 8.0 * u[row + jm1]
                    + u[row + jm2])
                    * c;
            }
        }
        (
            ScalarField { grid: g, values: fx },
            ScalarField { grid: g, values: fy },
        )
    }

    /// Fourth-order central second derivatives `(f_xx, f_yy, f_xy)`.
    ///
    /// The mixed derivative is the composition of the two first-derivative
    /// stencils.
    pub fn hessian_c4(&self) -> (ScalarField, ScalarField, ScalarField) {
        let g = self.grid;
        let n = g.n_cells();
        let c = 1.0 / (12.0 * g.spacing() * g.spacing());
        let u = &self.values;
        let mut fxx = vec![0.0; g.len()];
        let mut fyy = vec![0.0; g.len()];
        for i in 0..n {
            let im2 = g.wrap(i as isize - 2) * n;
            let im1 = g.wrap(i as isize - 1) * n;
            let ip1 = g.wrap(i as isize + 1) * n;
            let ip2 = g.wrap(i as isize + 2) * n;
            let row = i * n;
            for j in 0..n {
                fxx[row + j] = (-u[ip2 + j] + 16.0 * u[ip1 + j] - 30.0 * u[row + j]
                    + 16.0 * u[im1 + j]
                    - u[im2 + j])
                    * c;
                let jm2 = g.wrap(j as isize - 2);
                let jm1 = g.wrap(j as isize - 1);
                let jp1 = g.wrap(j as isize + 1);
                let jp2 = g.wrap(j as isize + 2);
                fyy[row + j] = (-u[row + jp2] + 16.0 * u[row + jp1] - 30.0 * u[row + j]
                    + 16.0 * u[row + jm1]
                    - u[row + jm2])
                    * c;
            }
        }
        let (fx, _) = self.gradient_c4();
        let (_, fxy) = fx.gradient_c4();
        (
            ScalarField { grid: g, values: fxx },
            ScalarField { grid: g, values: fyy },
            fxy,
        )
    }

    /// Five-point second-order Laplacian with periodic wrap.
    pub fn laplacian_c2(&self) -> ScalarField {
        let g = self.grid;
        let n = g.n_cells();
        let c = 1.0 / (g.spacing() * g.spacing());
        let u = &self.values;
        let mut out = vec![0.0; g.len()];
        for i in 0..n {
            let im1 = g.wrap(i as isize - 1) * n;
            let ip1 = g.wrap(i as isize + 1) * n;
            let row = i * n;
            for j in 0..n {
                let jm1 = g.wrap(j as isize - 1);
                let jp1 = g.wrap(j as isize + 1);
                out[row + j] = (u[ip1 + j] + u[im1 + j] + u[row + jp1] + u[row + jm1]
                    - 4.0 * u[row + j])
                    * c;
            }
        }
        ScalarField { grid: g, values: out }
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.scaled(rhs)
    }
}

fn dot_mean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

pub(crate) fn inner_unchecked(a: &ScalarField, b: &ScalarField, kind: InnerProductKind) -> f64 {
    let l2 = dot_mean(&a.values, &b.values);
    match kind {
        InnerProductKind::L2 => l2,
        InnerProductKind::H1 => {
            let (ax, ay) = a.gradient_c4();
            let (bx, by) = b.gradient_c4();
            l2 + dot_mean(&ax.values, &bx.values) + dot_mean(&ay.values, &by.values)
        }
    }
}

/// Inner product `⟨a, b⟩` in L² or H¹ (L² plus the L² pairing of the
/// fourth-order central gradients).
pub fn inner(a: &ScalarField, b: &ScalarField, kind: InnerProductKind) -> Result<f64> {
    a.check_same_grid(b)?;
    Ok(inner_unchecked(a, b, kind))
}

/// Applies the symmetric operator `W` with `inner(a, b, kind) = mean(a · W b)`.
///
/// For H¹ this is `I - Dx Dx - Dy Dy` since the periodic central stencil is
/// antisymmetric; used to assemble large Gram matrices in one pass.
pub fn gram_weight(field: &ScalarField, kind: InnerProductKind) -> ScalarField {
    match kind {
        InnerProductKind::L2 => field.clone(),
        InnerProductKind::H1 => {
            let (fx, fy) = field.gradient_c4();
            let (fxx, _) = fx.gradient_c4();
            let (_, fyy) = fy.gradient_c4();
            let mut out = field.clone();
            out.axpy(-1.0, &fxx);
            out.axpy(-1.0, &fyy);
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n).unwrap()
    }

    #[test]
    fn grid_spec_invariants() {
        for n in [8, 40, 80, 160, 1000] {
            let g = grid(n);
            assert!((g.spacing() * n as f64 - 1.0).abs() <= f64::EPSILON);
        }
        assert!(GridSpec::new(7).is_err());
    }

    #[test]
    fn integrate_examples() {
        let g = grid(80);
        assert_eq!(ScalarField::constant(g, 1.0).integrate().unwrap(), 1.0);
        let s = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        assert!(s.integrate().unwrap().abs() < 1e-13);
        let s2 = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin().powi(2));
        assert!((s2.integrate().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sin_squared_oracle_riemann_sum() {
        // Independent midpoint Riemann sum at 1e5 points.
        let n = 100_000;
        let s: f64 = (0..n)
            .map(|k| (2.0 * PI * (k as f64 + 0.5) / n as f64).sin().powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn integrate_rejects_non_finite() {
        let g = grid(8);
        let mut f = ScalarField::zeros(g);
        f.values_mut()[3] = f64::NAN;
        assert!(matches!(f.integrate(), Err(Error::NonFinite)));
        f.values_mut()[3] = f64::INFINITY;
        assert!(f.subtract_mean().is_err());
    }

    #[test]
    fn mean_examples() {
        let g = grid(80);
        let c = ScalarField::constant(g, 3.0);
        assert_eq!(c.mean().unwrap(), 3.0);
        assert!(c.subtract_mean().unwrap().max_abs() == 0.0);

        let s = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        assert!(s.mean().unwrap().abs() < 1e-13);
        assert!((&s.subtract_mean().unwrap() - &s).max_abs() < 1e-13);

        let f = ScalarField::from_fn(g, |_, y| 2.0 + (2.0 * PI * y).cos());
        assert!((f.mean().unwrap() - 2.0).abs() < 1e-13);
        let cosy = ScalarField::from_fn(g, |_, y| (2.0 * PI * y).cos());
        assert!((&f.subtract_mean().unwrap() - &cosy).max_abs() < 1e-13);
    }

    #[test]
    fn gradient_c4_examples() {
        let g = grid(80);
        let (fx, fy) = ScalarField::constant(g, 2.5).gradient_c4();
        assert_eq!(fx.max_abs(), 0.0);
        assert_eq!(fy.max_abs(), 0.0);

        let s = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        let exact = ScalarField::from_fn(g, |x, _| 2.0 * PI * (2.0 * PI * x).cos());
        let (fx, fy) = s.gradient_c4();
        assert!((&fx - &exact).max_abs() < 4e-5);
        assert!(fy.max_abs() < 1e-12);
    }

    fn c4_error(n: usize) -> f64 {
        let g = grid(n);
        let s = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        let exact = ScalarField::from_fn(g, |x, _| 2.0 * PI * (2.0 * PI * x).cos());
        (&s.gradient_c4().0 - &exact).max_abs()
    }

    #[test]
    fn gradient_c4_is_fourth_order() {
        let ratio = c4_error(40) / c4_error(80);
        assert!((ratio - 16.0).abs() <= 0.2 * 16.0, "ratio {ratio}");
    }

    fn lap_error(n: usize) -> f64 {
        let g = grid(n);
        let s = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        let exact = s.scaled(-4.0 * PI * PI);
        (&s.laplacian_c2() - &exact).max_abs()
    }

    #[test]
    fn laplacian_examples() {
        let g = grid(40);
        assert_eq!(ScalarField::constant(g, -1.0).laplacian_c2().max_abs(), 0.0);
        let ratio = lap_error(40) / lap_error(80);
        assert!((ratio - 4.0).abs() <= 0.8, "ratio {ratio}");
        // error is O(h^2) in absolute terms
        assert!(lap_error(80) < 4.0 * PI * PI * 1e-2);
    }

    #[test]
    fn hessian_c4_matches_analytic() {
        let g = grid(80);
        let f = ScalarField::from_fn(g, |x, y| (2.0 * PI * x).sin() * (2.0 * PI * y).cos());
        let (fxx, fyy, fxy) = f.hessian_c4();
        let k2 = 4.0 * PI * PI;
        let exx = f.scaled(-k2);
        let exy = ScalarField::from_fn(g, |x, y| -k2 * (2.0 * PI * x).cos() * (2.0 * PI * y).sin());
        assert!((&fxx - &exx).max_abs() < 1e-3);
        assert!((&fyy - &exx).max_abs() < 1e-3);
        assert!((&fxy - &exy).max_abs() < 1e-3);
    }

    #[test]
    fn inner_examples() {
        let g = grid(80);
        let s = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        let c = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).cos());
        assert!(inner(&s, &c, InnerProductKind::L2).unwrap().abs() < 1e-12);
        let h1 = inner(&s, &s, InnerProductKind::H1).unwrap();
        assert!((h1 - 0.5 * (1.0 + 4.0 * PI * PI)).abs() < 1e-3, "{h1}");
        assert!(inner(&s, &s, InnerProductKind::L2).unwrap() > 0.0);
        assert_eq!(
            inner(&ScalarField::zeros(g), &ScalarField::zeros(g), InnerProductKind::H1).unwrap(),
            0.0
        );
        let other = ScalarField::zeros(grid(40));
        assert!(matches!(
            inner(&s, &other, InnerProductKind::L2),
            Err(Error::GridMismatch(80, 40))
        ));
    }

    #[test]
    fn gram_weight_matches_inner() {
        let g = grid(16);
        let a = ScalarField::from_fn(g, |x, y| (2.0 * PI * x).sin() + (4.0 * PI * y).cos() * x);
        let b = ScalarField::from_fn(g, |x, y| (x - 0.5) * (y - 0.3) + (2.0 * PI * y).sin());
        for kind in [InnerProductKind::L2, InnerProductKind::H1] {
            let w = gram_weight(&b, kind);
            let via_w = dot_mean(a.values(), w.values());
            let direct = inner(&a, &b, kind).unwrap();
            assert!((via_w - direct).abs() < 1e-12 * direct.abs().max(1.0));
        }
    }
}
