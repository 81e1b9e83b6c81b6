//! Sparse operators and interchangeable direct solvers.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::registry::{check_keys, Registry};

/// Row-compressed sparse matrix; each row keeps its entries sorted by column.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseLinearMap {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseLinearMap {
    pub fn new(n: usize) -> Self {
        SparseLinearMap {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `v` to entry `(r, c)`.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let row = &mut self.rows[r];
        match row.binary_search_by_key(&c, |e| e.0) {
            Ok(k) => row[k].1 += v,
            Err(k) => row.insert(k, (c, v)),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.rows[r];
        match row.binary_search_by_key(&c, |e| e.0) {
            Ok(k) => row[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.rows[r]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, _) in row {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }

    pub fn norm_inf(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| row.iter().map(|e| e.1.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] = v;
            }
        }
        m
    }
}

/// Solves `A x = b` for a square sparse `A`.
pub trait LinearSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve_raw(&self, a: &SparseLinearMap, b: &[f64]) -> Result<Vec<f64>>;

    /// Solves and checks the normwise backward error
    /// `|b − Ax| / (|A||x| + |b|)` against `tol`, with one round of
    /// iterative refinement when the first solve misses it.
    fn solve(&self, a: &SparseLinearMap, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        if b.len() != a.dim() {
            return Err(Error::LinearSolveFailure(format!(
                "right-hand side has length {}, operator has dimension {}",
                b.len(),
                a.dim()
            )));
        }
        let mut x = self.solve_raw(a, b)?;
        for pass in 0..2 {
            let ax = a.apply(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let err = backward_error(a, &x, b, &r);
            if !err.is_finite() {
                return Err(Error::LinearSolveFailure("non-finite solution".into()));
            }
            if err <= tol {
                return Ok(x);
            }
            if pass == 1 {
                return Err(Error::LinearSolveFailure(format!(
                    "backward error {err:e} exceeds {tol:e} after refinement"
                )));
            }
            let dx = self.solve_raw(a, &r)?;
            for (xi, di) in x.iter_mut().zip(dx) {
                *xi += di;
            }
        }
        unreachable!()
    }
}

fn backward_error(a: &SparseLinearMap, x: &[f64], b: &[f64], r: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    let denom = a.norm_inf() * inf(x) + inf(b);
    if denom == 0.0 {
        0.0
    } else {
        inf(r) / denom
    }
}

/// Banded Gaussian elimination with partial pivoting.
#[derive(Debug, Clone, Copy, Default)]
pub struct BandedLu;

impl LinearSolver for BandedLu {
    fn name(&self) -> &'static str {
        "banded-lu"
    }

    fn solve_raw(&self, a: &SparseLinearMap, b: &[f64]) -> Result<Vec<f64>> {
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        // Row r holds absolute columns [r - kl, r + kl + ku]; the extra kl
        // columns on the right receive fill-in from pivoting.
        let width = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * width];
        let slot = |r: usize, c: usize| r * width + (c + kl - r);
        for r in 0..n {
            for &(c, v) in a.row(r) {
                band[slot(r, c)] = v;
            }
        }
        let mut pivots = vec![0usize; n];
        let mut mult = vec![0.0; n * kl.max(1)];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = band[slot(k, k)].abs();
            for i in k + 1..=last_row {
                let v = band[slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::LinearSolveFailure(format!(
                    "singular pivot at row {k}"
                )));
            }
            pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    band.swap(slot(k, c), slot(p, c));
                }
            }
            let piv = band[slot(k, k)];
            for i in k + 1..=last_row {
                let m = band[slot(i, k)] / piv;
                mult[k * kl + (i - k - 1)] = m;
                if m != 0.0 {
                    band[slot(i, k)] = 0.0;
                    for c in k + 1..=last_col {
                        band[slot(i, c)] -= m * band[slot(k, c)];
                    }
                }
            }
        }
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, pivots[k]);
            let last_row = (k + kl).min(n - 1);
            for i in k + 1..=last_row {
                x[i] -= mult[k * kl + (i - k - 1)] * x[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + kl + ku).min(n - 1);
            let mut s = x[k];
            for c in k + 1..=last_col {
                s -= band[slot(k, c)] * x[c];
            }
            x[k] = s / band[slot(k, k)];
        }
        Ok(x)
    }
}

/// Dense LU through `nalgebra`; intended for small systems and cross-checks.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseLu;

impl LinearSolver for DenseLu {
    fn name(&self) -> &'static str {
        "dense-lu"
    }

    fn solve_raw(&self, a: &SparseLinearMap, b: &[f64]) -> Result<Vec<f64>> {
        let lu = a.to_dense().lu();
        lu.solve(&DVector::from_column_slice(b))
            .map(|v| v.as_slice().to_vec())
            .ok_or_else(|| Error::LinearSolveFailure("singular matrix".into()))
    }
}

pub fn solver_registry() -> Registry<dyn LinearSolver> {
    let mut reg: Registry<dyn LinearSolver> = Registry::new("linear solver");
    reg.register(
        "banded-lu",
        "banded Gaussian elimination with partial pivoting",
        |p| {
            check_keys("banded-lu", p, &[])?;
            Ok(Arc::new(BandedLu) as Arc<dyn LinearSolver>)
        },
    );
    reg.register("dense-lu", "dense LU factorization", |p| {
        check_keys("dense-lu", p, &[])?;
        Ok(Arc::new(DenseLu) as Arc<dyn LinearSolver>)
    });
    reg
}
