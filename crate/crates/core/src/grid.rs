//! Tensor grid in `(x, t) = (log r, t)`, difference stencils and quadrature.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Uniform grid on `[x_min, x_max] × [0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    x_min: f64,
    x_max: f64,
    nx: usize,
    nt: usize,
}

impl Grid2D {
    pub fn new(x_min: f64, x_max: f64, nx: usize, nt: usize) -> Result<Self> {
        if nx < 5 || nt < 5 {
            return Err(Error::GridTooSmall(format!(
                "need N_x >= 5 and N_t >= 5, got N_x = {nx}, N_t = {nt}"
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need x_max > x_min, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Grid2D {
            x_min,
            x_max,
            nx,
            nt,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn len(&self) -> usize {
        self.nx * self.nt
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }
    pub fn ht(&self) -> f64 {
        1.0 / (self.nt - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.x_max
        } else {
            self.x_min + i as f64 * self.hx()
        }
    }

    pub fn t(&self, j: usize) -> f64 {
        if j == self.nt - 1 {
            1.0
        } else {
            j as f64 * self.ht()
        }
    }

    /// `u = r² = e^{2x}`.
    pub fn u(&self, i: usize) -> f64 {
        (2.0 * self.x(i)).exp()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }
    pub fn ts(&self) -> Vec<f64> {
        (0..self.nt).map(|j| self.t(j)).collect()
    }
    pub fn us(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.u(i)).collect()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nt + j
    }

    /// Same spacing, `x_max` replaced; `x_max - x_min` must be a multiple of `hx`.
    pub fn with_x_max(&self, x_max: f64) -> Result<Self> {
        let h = self.hx();
        let cells = ((x_max - self.x_min) / h).round();
        if ((x_max - self.x_min) / h - cells).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "x_max = {x_max} is not on the grid lattice of spacing {h}"
            )));
        }
        Grid2D::new(self.x_min, x_max, cells as usize + 1, self.nt)
    }
}

/// Real values on a [`Grid2D`], stored row-major by `i` then `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field2D {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Field2D {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Field2D::zeros(grid);
        for i in 0..grid.nx() {
            for j in 0..grid.nt() {
                out.values[grid.idx(i, j)] = f(grid.x(i), grid.t(j));
            }
        }
        out
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx(),
                grid.nt()
            )));
        }
        Ok(Field2D { grid, values })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    /// Values at fixed time index `j`, indexed by `i`.
    pub fn time_slice(&self, j: usize) -> Vec<f64> {
        (0..self.grid.nx()).map(|i| self.at(i, j)).collect()
    }

    /// Values at fixed space index `i`, indexed by `j`.
    pub fn space_column(&self, i: usize) -> &[f64] {
        let nt = self.grid.nt();
        &self.values[i * nt..(i + 1) * nt]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field2D {
        Field2D {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Field2D, f: impl Fn(f64, f64) -> f64) -> Result<Field2D> {
        self.check_same_grid(other)?;
        Ok(Field2D {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_grid(&self, other: &Field2D) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `x,t,value` CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 72);
        out.push_str("x,t,value\n");
        for i in 0..self.grid.nx() {
            for j in 0..self.grid.nt() {
                let _ = writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e}",
                    self.grid.x(i),
                    self.grid.t(j),
                    self.at(i, j)
                );
            }
        }
        out
    }

    /// Parses [`Field2D::to_csv`] output, recovering the grid.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("x,t,value") => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header `x,t,value`, got {other:?}"
                )))
            }
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 columns", k + 2)));
            }
            let mut v = [0.0; 3];
            for (slot, c) in v.iter_mut().zip(&cols) {
                *slot = c
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", k + 2)))?;
            }
            rows.push(v);
        }
        let nt = rows.iter().take_while(|r| r[0] == rows[0][0]).count();
        if nt == 0 || rows.len() % nt != 0 {
            return Err(Error::Parse("rows do not form a tensor grid".into()));
        }
        let nx = rows.len() / nt;
        let grid = Grid2D::new(rows[0][0], rows[rows.len() - 1][0], nx, nt)?;
        for (k, r) in rows.iter().enumerate() {
            let (i, j) = (k / nt, k % nt);
            let tol = 1e-12 * (1.0 + grid.x(i).abs());
            if (r[0] - grid.x(i)).abs() > tol || (r[1] - grid.t(j)).abs() > 1e-12 {
                return Err(Error::Parse(format!(
                    "row {} at ({}, {}) is off the uniform grid",
                    k + 2,
                    r[0],
                    r[1]
                )));
            }
        }
        Field2D::from_values(grid, rows.iter().map(|r| r[2]).collect())
    }
}

/// Second-order first derivative; one-sided at the ends.
pub fn diff1(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 3, "need at least 3 points");
    let mut g = vec![0.0; n];
    for k in 1..n - 1 {
        g[k] = (f[k + 1] - f[k - 1]) / (2.0 * h);
    }
    g[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    g[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    g
}

/// Second-order second derivative; one-sided four-point at the ends.
pub fn diff2(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 4, "need at least 4 points");
    let h2 = h * h;
    let mut g = vec![0.0; n];
    for k in 1..n - 1 {
        // symmetric in k ± 1, so reversal commutes bitwise
        g[k] = (f[k + 1] + f[k - 1] - 2.0 * f[k]) / h2;
    }
    g[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
    g[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
    g
}

fn along_x(f: &Field2D, op: impl Fn(&[f64], f64) -> Vec<f64>) -> Field2D {
    let g = *f.grid();
    let mut out = Field2D::zeros(g);
    for j in 0..g.nt() {
        let d = op(&f.time_slice(j), g.hx());
        for (i, v) in d.into_iter().enumerate() {
            out.set(i, j, v);
        }
    }
    out
}

fn along_t(f: &Field2D, op: impl Fn(&[f64], f64) -> Vec<f64>) -> Field2D {
    let g = *f.grid();
    let mut out = Field2D::zeros(g);
    for i in 0..g.nx() {
        let d = op(f.space_column(i), g.ht());
        for (j, v) in d.into_iter().enumerate() {
            out.set(i, j, v);
        }
    }
    out
}

pub fn d_dx(f: &Field2D) -> Field2D {
    along_x(f, diff1)
}
pub fn d2_dx2(f: &Field2D) -> Field2D {
    along_x(f, diff2)
}
pub fn d_dt(f: &Field2D) -> Field2D {
    along_t(f, diff1)
}
pub fn d2_dt2(f: &Field2D) -> Field2D {
    along_t(f, diff2)
}
pub fn d2_dxdt(f: &Field2D) -> Field2D {
    d_dx(&d_dt(f))
}

/// `∂_u f = e^{−2x}/2 · ∂_x f`.
pub fn d_du(f: &Field2D) -> Field2D {
    let g = *f.grid();
    let mut out = d_dx(f);
    for i in 0..g.nx() {
        let s = 0.5 / g.u(i);
        for j in 0..g.nt() {
            let k = g.idx(i, j);
            out.values[k] *= s;
        }
    }
    out
}

/// `max r^{k−β} |∇^k f|` with `∇^k f` the k-th x-derivative scaled by `e^{−kx}`.
pub fn weighted_sup_norm(f: &Field2D, beta: f64, k: usize) -> Result<f64> {
    let d = match k {
        0 => f.clone(),
        1 => d_dx(f),
        2 => d2_dx2(f),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "weighted norms use derivative order at most 2, got {k}"
            )))
        }
    };
    let g = *f.grid();
    let mut m = 0.0_f64;
    for i in 0..g.nx() {
        let w = (-beta * g.x(i)).exp();
        for j in 0..g.nt() {
            m = m.max(w * d.at(i, j).abs());
        }
    }
    Ok(m)
}

/// Trapezoidal rule on arbitrary nodes.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// `κ ∫ f(u) density(u) du` over radial samples, trapezoidal in `u`.
pub fn integrate_radial(us: &[f64], f: &[f64], density: &[f64], kappa: f64) -> Result<f64> {
    if us.len() != f.len() || us.len() != density.len() {
        return Err(Error::GridMismatch(format!(
            "radial lengths {} / {} / {}",
            us.len(),
            f.len(),
            density.len()
        )));
    }
    let ys: Vec<f64> = f.iter().zip(density).map(|(a, b)| a * b).collect();
    Ok(kappa * trapezoid(us, &ys))
}

/// `κ ∫∫ f density du dt`, trapezoidal in `u` and in `t`.
pub fn integrate(f: &Field2D, density: &Field2D, kappa: f64) -> Result<f64> {
    f.check_same_grid(density)?;
    let g = *f.grid();
    let us = g.us();
    let per_t: Vec<f64> = (0..g.nt())
        .map(|j| integrate_radial(&us, &f.time_slice(j), &density.time_slice(j), kappa))
        .collect::<Result<_>>()?;
    Ok(trapezoid(&g.ts(), &per_t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn g(nx: usize, nt: usize) -> Grid2D {
        Grid2D::new(-0.5, 1.5, nx, nt).unwrap()
    }

    #[test]
    fn too_small_grids_are_rejected() {
        assert!(matches!(
            Grid2D::new(0.0, 1.0, 4, 9),
            Err(Error::GridTooSmall(_))
        ));
        assert!(matches!(
            Grid2D::new(0.0, 1.0, 9, 3),
            Err(Error::GridTooSmall(_))
        ));
        assert!(Grid2D::new(1.0, 1.0, 9, 9).is_err());
        let grid = g(9, 9);
        assert!(grid.us().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(grid.t(8), 1.0);
        assert_eq!(grid.x(8), 1.5);
    }

    #[test]
    fn quadratic_exactness() {
        let grid = g(11, 9);
        let f = Field2D::from_fn(grid, |_, t| t * t);
        let d = d2_dt2(&f);
        assert!(d.values().iter().all(|v| (v - 2.0).abs() < 1e-10));
        let f = Field2D::from_fn(grid, |x, _| x);
        assert!(d_dx(&f).values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(d2_dx2(&f).sup_abs() < 1e-10);
        let f = Field2D::from_fn(grid, |x, t| 3.0 * x * x - x * t + 2.0 * t * t);
        let dxt = d2_dxdt(&f);
        assert!(dxt.values().iter().all(|v| (v + 1.0).abs() < 1e-10));
        let dxx = d2_dx2(&f);
        assert!(dxx.values().iter().all(|v| (v - 6.0).abs() < 1e-9));
    }

    #[test]
    fn constants_are_annihilated() {
        let grid = g(7, 6);
        let f = Field2D::from_fn(grid, |_, _| 4.25);
        for d in [d_dx(&f), d2_dx2(&f), d_dt(&f), d2_dt2(&f), d2_dxdt(&f)] {
            assert_eq!(d.sup_abs(), 0.0);
        }
    }

    #[test]
    fn mixed_derivative_converges_at_second_order() {
        // Oracle: analytic ∂x∂t [sin x cos t] = −cos x sin t.
        let err = |n: usize| {
            let grid = Grid2D::new(0.0, 2.0, n, n).unwrap();
            let f = Field2D::from_fn(grid, |x, t| x.sin() * t.cos());
            let d = d2_dxdt(&f);
            let exact = Field2D::from_fn(grid, |x, t| -x.cos() * t.sin());
            d.zip_with(&exact, |a, b| a - b).unwrap().sup_abs()
        };
        let (e1, e2, e3) = (err(21), err(41), err(81));
        let o1 = (e1 / e2).log2();
        let o2 = (e2 / e3).log2();
        assert!((1.8..=2.2).contains(&o1), "order {o1}");
        assert!((1.8..=2.2).contains(&o2), "order {o2}");
    }

    #[test]
    fn weighted_norms() {
        let grid = g(21, 5);
        let f = Field2D::from_fn(grid, |x, _| (-2.0 * x).exp());
        assert_relative_eq!(
            weighted_sup_norm(&f, -2.0, 0).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_eq!(
            weighted_sup_norm(&Field2D::zeros(grid), -2.0, 1).unwrap(),
            0.0
        );
        let f = Field2D::from_fn(grid, |x, _| (-2.0 * x).exp() + (-3.0 * x).exp());
        let expected = 1.0 + (-grid.x_min()).exp();
        assert_relative_eq!(
            weighted_sup_norm(&f, -2.0, 0).unwrap(),
            expected,
            epsilon = 1e-13
        );
        assert!(weighted_sup_norm(&f, -2.0, 3).is_err());
    }

    #[test]
    fn radial_integrals() {
        let grid = Grid2D::new(0.0, 0.5 * 2f64.ln(), 2001, 5).unwrap();
        let us = grid.us();
        let ones = vec![1.0; us.len()];
        let kappa = std::f64::consts::PI.powi(2);
        let v = integrate_radial(&us, &ones, &us, kappa).unwrap();
        assert_relative_eq!(v, kappa * 1.5, max_relative = 1e-6);
        let inv2: Vec<f64> = us.iter().map(|u| 1.0 / (u * u)).collect();
        let v = integrate_radial(&us, &inv2, &us, kappa).unwrap();
        assert_relative_eq!(v, kappa * 2f64.ln(), max_relative = 1e-6);
        assert_eq!(
            integrate_radial(&us, &vec![0.0; us.len()], &us, kappa).unwrap(),
            0.0
        );
        assert!(integrate_radial(&us, &ones[1..], &us, kappa).is_err());
    }

    #[test]
    fn space_time_integral() {
        let grid = Grid2D::new(0.0, 0.5 * 2f64.ln(), 1001, 11).unwrap();
        let f = Field2D::from_fn(grid, |_, t| t);
        let w = Field2D::from_fn(grid, |x, _| (2.0 * x).exp());
        let v = integrate(&f, &w, 1.0).unwrap();
        assert_relative_eq!(v, 0.75, max_relative = 1e-6);
        let other = Field2D::zeros(g(7, 7));
        assert!(integrate(&f, &other, 1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let grid = g(6, 5);
        let f = Field2D::from_fn(grid, |x, t| (x * 1.3).sin() + t.exp() / 3.0);
        let text = f.to_csv();
        assert!(text.starts_with("x,t,value\n"));
        let back = Field2D::from_csv(&text).unwrap();
        assert_eq!(back, f);
        assert!(Field2D::from_csv("a,b\n1,2").is_err());
    }

    #[test]
    fn lattice_extension() {
        let grid = Grid2D::new(-1.0, 4.0, 201, 9).unwrap();
        let g5 = grid.with_x_max(5.0).unwrap();
        assert_eq!(g5.nx(), 241);
        assert_relative_eq!(g5.hx(), grid.hx(), epsilon = 1e-15);
        assert!(grid.with_x_max(5.01).is_err());
    }

    proptest! {
        #[test]
        fn integration_is_linear_and_monotone(a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.0f64..2.0) {
            let grid = Grid2D::new(-1.0, 1.0, 41, 5).unwrap();
            let us = grid.us();
            let w: Vec<f64> = us.iter().map(|u| u * u).collect();
            let f: Vec<f64> = us.iter().map(|u| (u * a).sin()).collect();
            let h: Vec<f64> = us.iter().map(|u| (u * b).cos()).collect();
            let comb: Vec<f64> = f.iter().zip(&h).map(|(x, y)| a * x + b * y).collect();
            let lhs = integrate_radial(&us, &comb, &w, 1.0).unwrap();
            let rhs = a * integrate_radial(&us, &f, &w, 1.0).unwrap() + b * integrate_radial(&us, &h, &w, 1.0).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
            let bigger: Vec<f64> = f.iter().map(|v| v + c).collect();
            prop_assert!(integrate_radial(&us, &bigger, &w, 1.0).unwrap() >= integrate_radial(&us, &f, &w, 1.0).unwrap());
        }

        #[test]
        fn second_difference_kills_linear_functions(s in -5.0f64..5.0, c in -5.0f64..5.0) {
            let grid = Grid2D::new(-1.0, 2.0, 13, 6).unwrap();
            let f = Field2D::from_fn(grid, |x, t| s * x + c + t);
            prop_assert!(d2_dx2(&f).sup_abs() <= 1e-9);
        }
    }
}
