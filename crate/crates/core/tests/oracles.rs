//! Independent checks of the radial reduction against brute-force
//! computations in complex coordinates on `C^n`.

use alegeo_core::geometry::{
    scalar_curvature, EndpointPotential, RadialBackground, RadialFunction,
};
use alegeo_core::grid::{Field2D, Grid2D};
use alegeo_core::ma::{geodesic_at, ma_jacobian, ma_residual, InteriorIndex, PotentialPath};
use alegeo_core::slice::Slice;
use nalgebra::DMatrix;
use proptest::prelude::*;

mod common;

use common::{complex_hessians, hermitian, kahler_scalar, norm_sq, point, C};

/// `ln(1 + u)`.
struct LogProfile;

impl RadialFunction for LogProfile {
    fn d2(&self, u: f64) -> [f64; 3] {
        let v = 1.0 + u;
        [v.ln(), 1.0 / v, -1.0 / (v * v)]
    }
    fn jet(&self, u: f64) -> [f64; 5] {
        let v = 1.0 + u;
        [
            v.ln(),
            1.0 / v,
            -1.0 / (v * v),
            2.0 / v.powi(3),
            -6.0 / v.powi(4),
        ]
    }
}

#[derive(Clone, Copy)]
enum Model {
    Flat,
    Eh { a: f64 },
}

#[derive(Clone, Copy)]
enum Pert {
    Inverse(f64),
    Log,
}

/// `(Φ', Φ'')` of background plus perturbation, written out by hand.
fn total_derivs(model: Model, pert: Pert, u: f64) -> (f64, f64) {
    let (f1, f2) = match model {
        Model::Flat => (1.0, 0.0),
        Model::Eh { a } => {
            let a4 = a.powi(4);
            let s = (u * u + a4).sqrt();
            (s / u, -a4 / (u * u * s))
        }
    };
    let v = 1.0 + u;
    let (p1, p2) = match pert {
        Pert::Inverse(amp) => (-amp / (v * v), 2.0 * amp / (v * v * v)),
        Pert::Log => (1.0 / v, -1.0 / (v * v)),
    };
    (f1 + p1, f2 + p2)
}

fn profile(pert: Pert) -> Box<dyn RadialFunction> {
    match pert {
        Pert::Inverse(amp) => Box::new(EndpointPotential::inverse(amp)),
        Pert::Log => Box::new(LogProfile),
    }
}

fn background(model: Model, n: usize) -> RadialBackground {
    match model {
        Model::Flat => RadialBackground::flat(n),
        Model::Eh { a } => RadialBackground::eguchi_hanson(a).unwrap(),
    }
}

#[test]
fn scalar_curvature_matches_christoffel_oracle() {
    let cases = [
        (Model::Flat, 2, Pert::Log),
        (Model::Flat, 3, Pert::Log),
        (Model::Flat, 2, Pert::Inverse(0.3)),
        (Model::Eh { a: 1.0 }, 2, Pert::Inverse(0.05)),
        (Model::Eh { a: 0.7 }, 2, Pert::Inverse(0.0)),
    ];
    for (model, n, pert) in cases {
        let bg = background(model, n);
        let phi = profile(pert);
        let f = |u: f64| total_derivs(model, pert, u);
        for (r, seed) in [(0.8, 0.3), (1.3, 1.1), (2.2, 2.5)] {
            let z = point(n, r, seed);
            let brute = kahler_scalar(&f, &z, 1e-3);
            let k = scalar_curvature(&bg, phi.as_ref(), r * r).unwrap();
            assert!(
                (k - brute).abs() < 1e-5 * (1.0 + brute.abs()),
                "n = {n}, r = {r}: {k} vs {brute}"
            );
        }
    }
}

#[test]
fn grid_scalar_curvature_matches_christoffel_oracle() {
    let (model, pert) = (Model::Eh { a: 1.0 }, Pert::Inverse(0.05));
    let bg = background(model, 2);
    let phi = EndpointPotential::inverse(0.05);
    let nx = 401;
    let xs: Vec<f64> = (0..nx)
        .map(|i| -0.5 + 2.0 * i as f64 / (nx - 1) as f64)
        .collect();
    let vals: Vec<f64> = xs.iter().map(|x| phi.value((2.0 * x).exp())).collect();
    let k = Slice::new(&bg, &xs, &vals).unwrap().scalar_curvature();
    let f = |u: f64| total_derivs(model, pert, u);
    for i in (20..nx - 20).step_by(60) {
        let brute = kahler_scalar(&f, &point(2, xs[i].exp(), 0.7), 1e-3);
        assert!(
            (k[i] - brute).abs() < 1e-3 * (1.0 + brute.abs()),
            "x = {}: {} vs {brute}",
            xs[i],
            k[i]
        );
    }
}

/// `|∇^{1,0}∇^{1,0} v|²` with Christoffel symbols `Γ^k_ij = g^{kl̄} ∂_i g_{jl̄}`
/// and all derivatives by central differences.
fn brute_hessian_sq(f: &dyn Fn(f64) -> (f64, f64), v: &dyn Fn(f64) -> f64, z: &[C], h: f64) -> f64 {
    let n = z.len();
    let scalar = |re: &[f64]| v(re.iter().map(|c| c * c).sum());
    let (_, pure) = complex_hessians(&scalar, z, h);
    let base: Vec<f64> = z.iter().flat_map(|w| [w.re, w.im]).collect();
    let dir = |a: usize, s: f64| {
        let mut p = base.clone();
        p[a] += s;
        common::to_complex(&p)
    };
    let dreal =
        |a: usize| (hermitian(f, &dir(a, h)) - hermitian(f, &dir(a, -h))) / C::new(2.0 * h, 0.0);
    let dv = |a: usize| {
        (scalar(&{
            let mut p = base.clone();
            p[a] += h;
            p
        }) - scalar(&{
            let mut p = base.clone();
            p[a] -= h;
            p
        })) / (2.0 * h)
    };
    // ∂_i = ½(∂x_i − i∂y_i)
    let d_i: Vec<_> = (0..n)
        .map(|i| (dreal(2 * i) - dreal(2 * i + 1) * C::new(0.0, 1.0)) * C::new(0.5, 0.0))
        .collect();
    let dv_i: Vec<C> = (0..n)
        .map(|i| C::new(0.5 * dv(2 * i), -0.5 * dv(2 * i + 1)))
        .collect();
    let g = hermitian(f, z);
    let m = g.clone().try_inverse().unwrap();
    // g^{kl̄} = M[l][k]
    let mut cov = DMatrix::from_element(n, n, C::new(0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            let mut s = pure[(i, j)];
            for k in 0..n {
                let mut gam = C::new(0.0, 0.0);
                for l in 0..n {
                    gam += m[(l, k)] * d_i[i][(j, l)];
                }
                s -= gam * dv_i[k];
            }
            cov[(i, j)] = s;
        }
    }
    let mut out = C::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    out += m[(k, i)] * m[(l, j)] * cov[(i, j)] * cov[(k, l)].conj();
                }
            }
        }
    }
    out.re
}

#[test]
fn radial_hessian_matches_covariant_differences() {
    let (model, pert) = (Model::Eh { a: 1.0 }, Pert::Inverse(0.05));
    let bg = background(model, 2);
    let phi = EndpointPotential::inverse(0.05);
    let psi = |u: f64| 0.3 / (1.0 + u) + 0.1 * (1.0 + u).ln();
    let nx = 401;
    let xs: Vec<f64> = (0..nx)
        .map(|i| -0.5 + 2.0 * i as f64 / (nx - 1) as f64)
        .collect();
    let us: Vec<f64> = xs.iter().map(|x| (2.0 * x).exp()).collect();
    let vals: Vec<f64> = us.iter().map(|u| phi.value(*u)).collect();
    let slice = Slice::new(&bg, &xs, &vals).unwrap();
    let grid = slice.hessian_sq(&us.iter().map(|u| psi(*u)).collect::<Vec<_>>());
    let f = |u: f64| total_derivs(model, pert, u);
    for i in (20..nx - 20).step_by(60) {
        let brute = brute_hessian_sq(&f, &psi, &point(2, xs[i].exp(), 1.9), 1e-4);
        assert!(
            (grid[i] - brute).abs() < 1e-2 * brute.abs(),
            "x = {}: {} vs {brute}",
            xs[i],
            grid[i]
        );
    }
}

/// `𝒢 = 4 / (H⁻¹)_{ττ̄}` for the complex Hessian `H` of `Φ(u) + φ(u, t)` in
/// `(z, τ)`, where `∂_τ∂_τ̄ φ = φ_tt/4` and `∂_i∂_τ̄ φ = φ_tu z̄_i / 2`.
fn brute_geodesic(f: &dyn Fn(f64) -> (f64, f64), z: &[C], phi_tt: f64, phi_tu: f64) -> f64 {
    let n = z.len();
    let g = hermitian(f, z);
    let mut h = DMatrix::from_element(n + 1, n + 1, C::new(0.0, 0.0));
    h.view_mut((0, 0), (n, n)).copy_from(&g);
    for i in 0..n {
        h[(i, n)] = z[i].conj() * (0.5 * phi_tu);
        h[(n, i)] = z[i] * (0.5 * phi_tu);
    }
    h[(n, n)] = C::new(0.25 * phi_tt, 0.0);
    let inv = h.try_inverse().unwrap();
    4.0 / inv[(n, n)].re
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn geodesic_operator_matches_full_hessian(
        eh in any::<bool>(),
        amp in -0.04f64..0.2,
        r in 0.8f64..3.0,
        seed in 0.0f64..6.0,
        phi_tt in 0.5f64..4.0,
        phi_tu in -0.5f64..0.5,
    ) {
        let (model, n) = if eh { (Model::Eh { a: 1.0 }, 2) } else { (Model::Flat, 3) };
        let bg = background(model, n);
        let pert = Pert::Inverse(amp);
        let phi = EndpointPotential::inverse(amp);
        let z = point(n, r, seed);
        let u = norm_sq(&z);
        let f = |u: f64| total_derivs(model, pert, u);
        let oracle = brute_geodesic(&f, &z, phi_tt, phi_tu);
        let got = geodesic_at(&bg, &phi, u, phi_tt, phi_tu).unwrap();
        prop_assert!((got - oracle).abs() <= 1e-10, "{got} vs {oracle}");
    }
}

fn smooth_path(bg: &RadialBackground, c: [f64; 4], eps: f64) -> PotentialPath {
    let g = Grid2D::new(-0.5, 1.5, 17, 11).unwrap();
    let phi = Field2D::from_fn(g, |x, t| {
        let u = (2.0 * x).exp();
        c[0] * t * (1.0 - t)
            + c[1] * t * t / (1.0 + u)
            + c[2] * (x * 3.0 + t).sin() * t * (1.0 - t) * 0.1
            + c[3] * t * u * 0.05
    });
    PotentialPath::new(
        bg.clone(),
        phi,
        EndpointPotential::zero(),
        EndpointPotential::zero(),
        eps,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5))]

    #[test]
    fn jacobian_matches_second_order_differences(
        c0 in 0.2f64..1.0,
        c1 in -0.3f64..0.3,
        c2 in -1.0f64..1.0,
        c3 in 0.0f64..1.0,
        eh in any::<bool>(),
    ) {
        let bg = if eh { RadialBackground::eguchi_hanson(1.0).unwrap() } else { RadialBackground::flat(2) };
        let base = smooth_path(&bg, [c0, c1, c2, c3], 0.1);
        let idx = InteriorIndex::new(base.grid());
        let dir: Vec<f64> = (0..idx.len()).map(|k| ((k as f64) * 0.37).sin()).collect();
        let jv = ma_jacobian(&base).unwrap().apply(&dir);
        let err = |h: f64| {
            let shifted = |s: f64| {
                let mut p = base.clone();
                let mut v = idx.gather(&p.phi);
                for (a, d) in v.iter_mut().zip(&dir) {
                    *a += s * h * d;
                }
                idx.scatter(&v, &mut p.phi);
                idx.gather(&ma_residual(&p).unwrap())
            };
            let (rp, rm) = (shifted(1.0), shifted(-1.0));
            (0..idx.len())
                .map(|k| ((rp[k] - rm[k]) / (2.0 * h) - jv[k]).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        let order = (e1 / e2).log2();
        prop_assert!((1.8..=2.2).contains(&order), "order {order} from {e1:e}, {e2:e}");
    }
}
