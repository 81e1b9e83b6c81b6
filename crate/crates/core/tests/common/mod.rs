//! Brute-force geometry in real and complex coordinates, used as oracles.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};

pub type C = Complex<f64>;

/// `(Φ'(u), Φ''(u))` of a radial potential.
pub type Radial<'a> = &'a dyn Fn(f64) -> (f64, f64);

pub fn to_complex(re: &[f64]) -> Vec<C> {
    (0..re.len() / 2)
        .map(|k| C::new(re[2 * k], re[2 * k + 1]))
        .collect()
}

pub fn norm_sq(z: &[C]) -> f64 {
    z.iter().map(|w| w.norm_sqr()).sum()
}

/// `g_{ij̄} = Φ' δ_ij + Φ'' z̄_i z_j` as the matrix `G[i][j]`.
pub fn hermitian(f: Radial, z: &[C]) -> DMatrix<C> {
    let (d1, d2) = f(norm_sq(z));
    let n = z.len();
    DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j {
            C::new(d1, 0.0)
        } else {
            C::new(0.0, 0.0)
        };
        diag + z[i].conj() * z[j] * d2
    })
}

/// Riemannian metric `2 Re g_{ij̄}` in the real coordinates `(x_1, y_1, …)`.
pub fn real_metric(f: Radial, re: &[f64]) -> DMatrix<f64> {
    let h = hermitian(f, &to_complex(re));
    let d = re.len();
    let unit = |a: usize| {
        let mut v = vec![C::new(0.0, 0.0); d / 2];
        v[a / 2] = if a.is_multiple_of(2) {
            C::new(1.0, 0.0)
        } else {
            C::new(0.0, 1.0)
        };
        v
    };
    DMatrix::from_fn(d, d, |a, b| {
        let (va, vb) = (unit(a), unit(b));
        let mut s = C::new(0.0, 0.0);
        for i in 0..d / 2 {
            for j in 0..d / 2 {
                s += h[(i, j)] * va[i] * vb[j].conj();
            }
        }
        2.0 * s.re
    })
}

fn shifted(re: &[f64], a: usize, s: f64) -> Vec<f64> {
    let mut p = re.to_vec();
    p[a] += s;
    p
}

/// `Γ^c_ab` with metric derivatives by central differences of step `h`.
fn christoffel(f: Radial, re: &[f64], h: f64) -> Vec<f64> {
    let d = re.len();
    let dg: Vec<DMatrix<f64>> = (0..d)
        .map(|c| {
            (real_metric(f, &shifted(re, c, h)) - real_metric(f, &shifted(re, c, -h))) / (2.0 * h)
        })
        .collect();
    let ginv = real_metric(f, re).try_inverse().unwrap();
    let mut out = vec![0.0; d * d * d];
    for c in 0..d {
        for a in 0..d {
            for b in 0..d {
                let mut s = 0.0;
                for e in 0..d {
                    s += ginv[(c, e)] * (dg[a][(e, b)] + dg[b][(e, a)] - dg[e][(a, b)]);
                }
                out[(c * d + a) * d + b] = 0.5 * s;
            }
        }
    }
    out
}

/// Riemannian scalar curvature from Christoffel symbols and their
/// central-difference derivatives.
pub fn riemannian_scalar(f: Radial, re: &[f64], h: f64) -> f64 {
    let d = re.len();
    let gam = christoffel(f, re, h);
    let dgam: Vec<Vec<f64>> = (0..d)
        .map(|e| {
            let (p, m) = (
                christoffel(f, &shifted(re, e, h), h),
                christoffel(f, &shifted(re, e, -h), h),
            );
            p.iter().zip(&m).map(|(x, y)| (x - y) / (2.0 * h)).collect()
        })
        .collect();
    let g = |c: usize, a: usize, b: usize| gam[(c * d + a) * d + b];
    let dg = |e: usize, c: usize, a: usize, b: usize| dgam[e][(c * d + a) * d + b];
    let ginv = real_metric(f, re).try_inverse().unwrap();
    let mut s = 0.0;
    for a in 0..d {
        for b in 0..d {
            let mut ric = 0.0;
            for c in 0..d {
                ric += dg(c, c, a, b) - dg(b, c, a, c);
                for e in 0..d {
                    ric += g(c, c, e) * g(e, a, b) - g(c, b, e) * g(e, a, c);
                }
            }
            s += ginv[(a, b)] * ric;
        }
    }
    s
}

/// Kähler scalar curvature `g^{ij̄} Ric_{ij̄}`, half the Riemannian one.
/// Steps `h` and `h/2` are Richardson-combined.
pub fn kahler_scalar(f: Radial, z: &[C], h: f64) -> f64 {
    let re: Vec<f64> = z.iter().flat_map(|w| [w.re, w.im]).collect();
    let (a, b) = (
        riemannian_scalar(f, &re, h),
        riemannian_scalar(f, &re, 0.5 * h),
    );
    0.5 * (4.0 * b - a) / 3.0
}

/// `∂_i∂_j̄ v` and `∂_i∂_j v` of a real function by central differences.
pub fn complex_hessians(v: &dyn Fn(&[f64]) -> f64, z: &[C], h: f64) -> (DMatrix<C>, DMatrix<C>) {
    let n = z.len();
    let base: Vec<f64> = z.iter().flat_map(|w| [w.re, w.im]).collect();
    let d2 = |a: usize, b: usize| {
        let at = |sa: f64, sb: f64| {
            let mut p = base.clone();
            p[a] += sa * h;
            p[b] += sb * h;
            v(&p)
        };
        (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h)
    };
    let mixed = DMatrix::from_fn(n, n, |i, j| {
        let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
        C::new(
            0.25 * (d2(xi, xj) + d2(yi, yj)),
            0.25 * (d2(xi, yj) - d2(yi, xj)),
        )
    });
    // ∂_i∂_j = ¼(∂x_i − i∂y_i)(∂x_j − i∂y_j)
    let pure = DMatrix::from_fn(n, n, |i, j| {
        let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
        C::new(
            0.25 * (d2(xi, xj) - d2(yi, yj)),
            -0.25 * (d2(xi, yj) + d2(yi, xj)),
        )
    });
    (mixed, pure)
}

/// Generic sample point of modulus `r` in `C^n`.
pub fn point(n: usize, r: f64, seed: f64) -> Vec<C> {
    let raw: Vec<C> = (0..n)
        .map(|k| {
            C::new(
                (seed + 1.7 * k as f64).cos() + 0.3,
                (1.3 * seed + 2.0 * k as f64).sin(),
            )
        })
        .collect();
    let s = norm_sq(&raw).sqrt();
    raw.into_iter().map(|w| w * (r / s)).collect()
}
