//! Radial ALE backgrounds and U(n)-invariant potentials.
//!
//! A U(n)-invariant Kähler potential on `C^n` (or a quotient by a finite
//! group) is a function `Φ(u)` of `u = |z|^2`. Its complex Hessian has two
//! eigenvalues: `λ_tan = Φ'(u)` with multiplicity `n - 1` and
//! `λ_rad = Φ'(u) + u Φ''(u)` in the radial direction. Everything in this
//! module is expressed through those two eigenvalues and their
//! u-derivatives, collected in a [`LambdaJet`].

use std::f64::consts::PI;
use std::fmt;
use std::ops::Add;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::registry::{check_keys, param_or, Params, Registry};

/// Eigenvalues of a radial complex Hessian and their first two u-derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LambdaJet {
    pub tan: [f64; 3],
    pub rad: [f64; 3],
}

impl LambdaJet {
    /// Builds the jet of `Φ'` and `Φ' + uΦ''` from `Φ` and its first four
    /// u-derivatives.
    pub fn from_potential_jet(u: f64, f: &[f64; 5]) -> Self {
        LambdaJet {
            tan: [f[1], f[2], f[3]],
            rad: [
                f[1] + u * f[2],
                2.0 * f[2] + u * f[3],
                3.0 * f[3] + u * f[4],
            ],
        }
    }
}

impl Add for LambdaJet {
    type Output = LambdaJet;
    fn add(self, o: LambdaJet) -> LambdaJet {
        let mut out = self;
        for k in 0..3 {
            out.tan[k] += o.tan[k];
            out.rad[k] += o.rad[k];
        }
        out
    }
}

/// A radial reference Kähler potential `F(u)`.
pub trait BackgroundModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn params(&self) -> Params;

    fn supports_dim(&self, n: usize) -> bool;

    /// `F` and its first four u-derivatives, in closed form.
    fn potential_jet(&self, u: f64) -> [f64; 5];

    /// Eigenvalue jet of the background. Models override this when the
    /// generic formula loses precision through cancellation.
    fn lambda_jet(&self, u: f64) -> LambdaJet {
        LambdaJet::from_potential_jet(u, &self.potential_jet(u))
    }
}

/// Euclidean metric, `F(u) = u`.
#[derive(Debug, Clone, Copy)]
pub struct Flat;

impl BackgroundModel for Flat {
    fn name(&self) -> &'static str {
        "flat"
    }
    fn params(&self) -> Params {
        Params::new()
    }
    fn supports_dim(&self, n: usize) -> bool {
        n >= 2
    }
    fn potential_jet(&self, u: f64) -> [f64; 5] {
        [u, 1.0, 0.0, 0.0, 0.0]
    }
    fn lambda_jet(&self, _u: f64) -> LambdaJet {
        LambdaJet {
            tan: [1.0, 0.0, 0.0],
            rad: [1.0, 0.0, 0.0],
        }
    }
}

/// Eguchi–Hanson metric on the resolution of `C^2/Z_2`:
/// `F(u) = s + a² ln u − a² ln(a² + s)` with `s = sqrt(u² + a⁴)`,
/// so that `F' = s/u` and `F' + uF'' = u/s`.
#[derive(Debug, Clone, Copy)]
pub struct EguchiHanson {
    pub a: f64,
}

impl EguchiHanson {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Eguchi-Hanson resolution parameter must be positive, got {a}"
            )));
        }
        Ok(EguchiHanson { a })
    }
}

impl BackgroundModel for EguchiHanson {
    fn name(&self) -> &'static str {
        "eguchi-hanson"
    }
    fn params(&self) -> Params {
        let mut p = Params::new();
        p.insert("a".into(), self.a);
        p
    }
    fn supports_dim(&self, n: usize) -> bool {
        n == 2
    }
    fn potential_jet(&self, u: f64) -> [f64; 5] {
        let a2 = self.a * self.a;
        let a4 = a2 * a2;
        let s = (u * u + a4).sqrt();
        let f0 = s + a2 * u.ln() - a2 * (a2 + s).ln();
        let f1 = s / u;
        let f2 = -a4 / (u * u * s);
        let f3 = a4 * (2.0 / (u * u * u * s) + 1.0 / (u * s * s * s));
        let f4 = -a4 * (6.0 / (u.powi(4) * s) + 3.0 / (u * u * s.powi(3)) + 3.0 / s.powi(5));
        [f0, f1, f2, f3, f4]
    }
    fn lambda_jet(&self, u: f64) -> LambdaJet {
        let a4 = self.a.powi(4);
        let s = (u * u + a4).sqrt();
        let s3 = s * s * s;
        LambdaJet {
            tan: [
                s / u,
                -a4 / (u * u * s),
                a4 * (2.0 / (u * u * u * s) + 1.0 / (u * s3)),
            ],
            rad: [u / s, a4 / s3, -3.0 * a4 * u / (s3 * s * s)],
        }
    }
}

/// All built-in background metrics.
pub fn background_registry() -> Registry<dyn BackgroundModel> {
    let mut reg: Registry<dyn BackgroundModel> = Registry::new("background");
    reg.register("flat", "euclidean C^n / Γ, F(u) = u", |p| {
        check_keys("flat", p, &[])?;
        Ok(Arc::new(Flat) as Arc<dyn BackgroundModel>)
    });
    reg.register(
        "eguchi-hanson",
        "Ricci-flat resolution of C^2/Z_2 with parameter `a`",
        |p| {
            check_keys("eguchi-hanson", p, &["a"])?;
            Ok(Arc::new(EguchiHanson::new(param_or(p, "a", 1.0))?) as Arc<dyn BackgroundModel>)
        },
    );
    reg
}

/// Reference ALE Kähler structure given by a radial potential.
#[derive(Clone, Debug)]
pub struct RadialBackground {
    n: usize,
    gamma_order: usize,
    model: Arc<dyn BackgroundModel>,
}

impl RadialBackground {
    pub fn new(n: usize, gamma_order: usize, model: Arc<dyn BackgroundModel>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "complex dimension must be at least 2, got {n}"
            )));
        }
        if gamma_order == 0 {
            return Err(Error::InvalidArgument("|Γ| must be positive".into()));
        }
        if !model.supports_dim(n) {
            return Err(Error::InvalidArgument(format!(
                "background `{}` is not defined in complex dimension {n}",
                model.name()
            )));
        }
        Ok(RadialBackground {
            n,
            gamma_order,
            model,
        })
    }

    pub fn flat(n: usize) -> Self {
        RadialBackground::new(n, 1, Arc::new(Flat)).expect("flat background is valid for n >= 2")
    }

    /// Eguchi–Hanson with `n = 2`, `Γ = Z_2`.
    pub fn eguchi_hanson(a: f64) -> Result<Self> {
        RadialBackground::new(2, 2, Arc::new(EguchiHanson::new(a)?))
    }

    /// Looks up `family` in [`background_registry`].
    pub fn from_registry(
        family: &str,
        n: usize,
        gamma_order: usize,
        params: &Params,
    ) -> Result<Self> {
        let model = background_registry().build(family, params)?;
        RadialBackground::new(n, gamma_order, model)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma_order(&self) -> usize {
        self.gamma_order
    }

    pub fn family(&self) -> &'static str {
        self.model.name()
    }

    pub fn params(&self) -> Params {
        self.model.params()
    }

    pub fn model(&self) -> &dyn BackgroundModel {
        self.model.as_ref()
    }

    /// `κ = πⁿ / ((n−1)! |Γ|)`, so that `∫_M f ωⁿ = κ ∫ f w(u) du`.
    pub fn kappa(&self) -> f64 {
        let fact: f64 = (1..self.n).map(|k| k as f64).product();
        PI.powi(self.n as i32) / (fact * self.gamma_order as f64)
    }

    pub fn lambda_jet(&self, u: f64) -> LambdaJet {
        self.model.lambda_jet(u)
    }

    /// `(n−1)`-fold tangential times radial eigenvalue of the background.
    pub fn det(&self, u: f64) -> f64 {
        let j = self.model.lambda_jet(u);
        j.tan[0].powi(self.n as i32 - 1) * j.rad[0]
    }

    /// Moment profile `P = uF'` and its first two x-derivatives, `x = ½ ln u`.
    pub fn moment(&self, x: f64) -> [f64; 3] {
        let u = (2.0 * x).exp();
        let j = self.model.lambda_jet(u);
        [
            u * j.tan[0],
            2.0 * u * j.rad[0],
            4.0 * u * (j.rad[0] + u * j.rad[1]),
        ]
    }

    /// `(log det, d/du, d²/du²)` of the background metric.
    pub fn log_det_jet(&self, u: f64) -> [f64; 3] {
        log_det_jet(self.n, &self.model.lambda_jet(u))
    }

    /// Ricci eigenvalues `(μ_tan, μ_rad)` of the background.
    pub fn ricci(&self, u: f64) -> (f64, f64) {
        let h = self.log_det_jet(u);
        (-h[1], -(h[1] + u * h[2]))
    }
}

pub(crate) fn log_det_jet(n: usize, j: &LambdaJet) -> [f64; 3] {
    let m = (n - 1) as f64;
    let (t0, t1, t2) = (j.tan[0], j.tan[1], j.tan[2]);
    let (r0, r1, r2) = (j.rad[0], j.rad[1], j.rad[2]);
    let h0 = m * t0.ln() + r0.ln();
    let h1 = m * t1 / t0 + r1 / r0;
    let h2 = m * (t2 / t0 - (t1 / t0).powi(2)) + r2 / r0 - (r1 / r0).powi(2);
    [h0, h1, h2]
}

/// A radial function `f(u)` with derivatives.
pub trait RadialFunction: Send + Sync {
    /// `(f, f', f'')` at `u`.
    fn d2(&self, u: f64) -> [f64; 3];

    /// `f` and its first four u-derivatives. The default differentiates
    /// `f''` on a fourth-order central micro-stencil.
    fn jet(&self, u: f64) -> [f64; 5] {
        let [f0, f1, f2] = self.d2(u);
        let h = 1e-3 * u.abs().max(1e-2);
        let g = |k: f64| self.d2(u + k * h)[2];
        let (gm2, gm1, gp1, gp2) = (g(-2.0), g(-1.0), g(1.0), g(2.0));
        let f3 = (gm2 - 8.0 * gm1 + 8.0 * gp1 - gp2) / (12.0 * h);
        let f4 = (-gm2 + 16.0 * gm1 - 30.0 * f2 + 16.0 * gp1 - gp2) / (12.0 * h * h);
        [f0, f1, f2, f3, f4]
    }
}

/// `f ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroProfile;

impl RadialFunction for ZeroProfile {
    fn d2(&self, _u: f64) -> [f64; 3] {
        [0.0; 3]
    }
    fn jet(&self, _u: f64) -> [f64; 5] {
        [0.0; 5]
    }
}

/// `f(u) = (c + u)^{-p}`; `p = 1`, `c = 1` gives `1/(1+u)`.
#[derive(Debug, Clone, Copy)]
pub struct PowerProfile {
    pub p: f64,
    pub c: f64,
}

impl RadialFunction for PowerProfile {
    fn d2(&self, u: f64) -> [f64; 3] {
        let j = self.jet(u);
        [j[0], j[1], j[2]]
    }
    fn jet(&self, u: f64) -> [f64; 5] {
        let v = self.c + u;
        let mut out = [0.0; 5];
        let mut coef = 1.0;
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = coef * v.powf(-self.p - k as f64);
            coef *= -(self.p + k as f64);
        }
        out
    }
}

/// Natural cubic spline through samples `(u_k, f_k)`.
#[derive(Debug, Clone)]
pub struct TabulatedProfile {
    u: Vec<f64>,
    f: Vec<f64>,
    m: Vec<f64>,
}

impl TabulatedProfile {
    pub fn new(u: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if u.len() != f.len() || u.len() < 4 {
            return Err(Error::InvalidArgument(
                "tabulated profile needs at least 4 (u, value) samples".into(),
            ));
        }
        if u.windows(2).any(|w| w[1] <= w[0]) || u[0] < 0.0 {
            return Err(Error::InvalidArgument(
                "tabulated u samples must be non-negative and strictly increasing".into(),
            ));
        }
        let n = u.len();
        // Tridiagonal system for second derivatives, natural end conditions.
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = u[i] - u[i - 1];
            let h1 = u[i + 1] - u[i];
            let a = h0 / 6.0;
            let b = (h0 + h1) / 3.0;
            let cc = h1 / 6.0;
            let rhs = (f[i + 1] - f[i]) / h1 - (f[i] - f[i - 1]) / h0;
            let denom = b - a * c[i - 1];
            c[i] = cc / denom;
            d[i] = (rhs - a * d[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Ok(TabulatedProfile { u, f, m })
    }

    pub fn samples(&self) -> (&[f64], &[f64]) {
        (&self.u, &self.f)
    }
}

impl RadialFunction for TabulatedProfile {
    fn d2(&self, u: f64) -> [f64; 3] {
        let n = self.u.len();
        let k = match self.u.partition_point(|&v| v <= u) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (u0, u1) = (self.u[k], self.u[k + 1]);
        let h = u1 - u0;
        let (a, b) = ((u1 - u) / h, (u - u0) / h);
        let (m0, m1) = (self.m[k], self.m[k + 1]);
        let f = a * self.f[k]
            + b * self.f[k + 1]
            + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let df = (self.f[k + 1] - self.f[k]) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0
            + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let d2f = a * m0 + b * m1;
        [f, df, d2f]
    }
}

/// All built-in endpoint profile shapes (before scaling by the amplitude).
pub fn profile_registry() -> Registry<dyn RadialFunction> {
    let mut reg: Registry<dyn RadialFunction> = Registry::new("endpoint profile");
    reg.register("zero", "identically zero", |p| {
        check_keys("zero", p, &[])?;
        Ok(Arc::new(ZeroProfile) as Arc<dyn RadialFunction>)
    });
    reg.register("inverse", "1/(1+u)", |p| {
        check_keys("inverse", p, &[])?;
        Ok(Arc::new(PowerProfile { p: 1.0, c: 1.0 }) as Arc<dyn RadialFunction>)
    });
    reg.register(
        "power",
        "(c+u)^(-p), parameters `p` (default 1) and `c` (default 1)",
        |p| {
            check_keys("power", p, &["p", "c"])?;
            let prof = PowerProfile {
                p: param_or(p, "p", 1.0),
                c: param_or(p, "c", 1.0),
            };
            if !(prof.c > 0.0 && prof.p > 0.0) {
                return Err(Error::InvalidArgument(
                    "power profile needs p > 0 and c > 0".into(),
                ));
            }
            Ok(Arc::new(prof) as Arc<dyn RadialFunction>)
        },
    );
    reg
}

/// Summary of an endpoint potential suitable for metadata files.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct EndpointSummary {
    pub family: String,
    pub amplitude: f64,
    pub params: Params,
    pub description: String,
}

/// Endpoint potential `φ(u) = A · shape(u)`.
#[derive(Clone)]
pub struct EndpointPotential {
    shape: Arc<dyn RadialFunction>,
    family: String,
    params: Params,
    amplitude: f64,
    description: String,
}

impl fmt::Debug for EndpointPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EndpointPotential")
            .field("family", &self.family)
            .field("amplitude", &self.amplitude)
            .field("description", &self.description)
            .finish()
    }
}

impl EndpointPotential {
    pub fn new(
        shape: Arc<dyn RadialFunction>,
        family: impl Into<String>,
        params: Params,
        amplitude: f64,
        description: impl Into<String>,
    ) -> Self {
        EndpointPotential {
            shape,
            family: family.into(),
            params,
            amplitude,
            description: description.into(),
        }
    }

    pub fn zero() -> Self {
        EndpointPotential::new(Arc::new(ZeroProfile), "zero", Params::new(), 0.0, "0")
    }

    /// `A / (1 + u)`.
    pub fn inverse(amplitude: f64) -> Self {
        EndpointPotential::new(
            Arc::new(PowerProfile { p: 1.0, c: 1.0 }),
            "inverse",
            Params::new(),
            amplitude,
            format!("{amplitude}/(1+u)"),
        )
    }

    pub fn from_registry(family: &str, params: &Params, amplitude: f64) -> Result<Self> {
        let shape = profile_registry().build(family, params)?;
        Ok(EndpointPotential::new(
            shape,
            family,
            params.clone(),
            amplitude,
            format!("{amplitude} * {family}"),
        ))
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn summary(&self) -> EndpointSummary {
        EndpointSummary {
            family: self.family.clone(),
            amplitude: self.amplitude,
            params: self.params.clone(),
            description: self.description.clone(),
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        self.d2(u)[0]
    }

    /// Checks `ω + dd^c φ > 0` at every sample.
    pub fn check_admissible(&self, bg: &RadialBackground, us: &[f64]) -> Result<()> {
        for &u in us {
            metric_eigenvalues(bg, self, u)?;
        }
        Ok(())
    }
}

impl RadialFunction for EndpointPotential {
    fn d2(&self, u: f64) -> [f64; 3] {
        let v = self.shape.d2(u);
        [
            self.amplitude * v[0],
            self.amplitude * v[1],
            self.amplitude * v[2],
        ]
    }
    fn jet(&self, u: f64) -> [f64; 5] {
        let v = self.shape.jet(u);
        v.map(|c| self.amplitude * c)
    }
}

/// `(F, F', F'')` of the background at `u > 0`.
pub fn eval_background(bg: &RadialBackground, u: f64) -> Result<(f64, f64, f64)> {
    if !(u > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "u must be positive, got {u}"
        )));
    }
    let j = bg.model().potential_jet(u);
    Ok((j[0], j[1], j[2]))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigenvalues {
    pub tan: f64,
    pub rad: f64,
}

fn total_jet(bg: &RadialBackground, phi: &dyn RadialFunction, u: f64) -> Result<LambdaJet> {
    if !(u >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "u must be non-negative, got {u}"
        )));
    }
    let j = bg.lambda_jet(u) + LambdaJet::from_potential_jet(u, &phi.jet(u));
    let ok = j.tan.iter().chain(j.rad.iter()).all(|v| v.is_finite());
    if !ok {
        return Err(Error::InvalidArgument(format!(
            "background `{}` is singular at u = {u}",
            bg.family()
        )));
    }
    Ok(j)
}

fn positive(j: &LambdaJet, u: f64) -> Result<()> {
    if j.tan[0] > 0.0 && j.rad[0] > 0.0 {
        Ok(())
    } else {
        Err(Error::positivity(
            format!("u = {u}"),
            format!("λ_tan = {}, λ_rad = {}", j.tan[0], j.rad[0]),
        ))
    }
}

/// Eigenvalues of the complex Hessian of `F + φ` at `u`.
pub fn metric_eigenvalues(
    bg: &RadialBackground,
    phi: &dyn RadialFunction,
    u: f64,
) -> Result<Eigenvalues> {
    let j = total_jet(bg, phi, u)?;
    positive(&j, u)?;
    Ok(Eigenvalues {
        tan: j.tan[0],
        rad: j.rad[0],
    })
}

/// Scalar curvature `K = g^{ij̄} Ric_{ij̄}` of `ω + dd^c φ`, with
/// `Ric = −∂∂̄ log det g`.
pub fn scalar_curvature(bg: &RadialBackground, phi: &dyn RadialFunction, u: f64) -> Result<f64> {
    let j = total_jet(bg, phi, u)?;
    positive(&j, u)?;
    Ok(scalar_curvature_from_jet(bg.n(), u, &j))
}

pub(crate) fn scalar_curvature_from_jet(n: usize, u: f64, j: &LambdaJet) -> f64 {
    let h = log_det_jet(n, j);
    let mu_tan = -h[1];
    let mu_rad = -(h[1] + u * h[2]);
    (n - 1) as f64 * mu_tan / j.tan[0] + mu_rad / j.rad[0]
}

/// Quadrature density `w(u) = λ_tan^{n−1} λ_rad u^{n−1}`; callers apply κ.
pub fn volume_weight(bg: &RadialBackground, phi: &dyn RadialFunction, u: f64) -> Result<f64> {
    let e = metric_eigenvalues(bg, phi, u)?;
    let m = bg.n() as i32 - 1;
    Ok(e.tan.powi(m) * e.rad * u.powi(m))
}

/// Curvature components `R(e_a, ē_a, e_b, ē_b)` of the background in a unitary
/// frame adapted to the U(n) action: radial–radial, radial–tangential,
/// tangential–tangential (same vector), tangential–tangential (orthogonal;
/// only present for `n ≥ 3`).
pub fn frame_curvatures(bg: &RadialBackground, u: f64) -> Vec<f64> {
    let j = bg.lambda_jet(u);
    let (a, a1, a2) = (j.tan[0], j.tan[1], j.tan[2]);
    let (l, l1, l2) = (j.rad[0], j.rad[1], j.rad[2]);
    let r_rr = -(l1 + u * l2) + u * l1 * l1 / l;
    let r_rt = -(a1 + u * a2) + u * a1 * a1 / a;
    let r_tt = -2.0 * a1;
    let r_ts = -a1;
    let mut out = vec![r_rr / (l * l), r_rt / (l * a), r_tt / (a * a)];
    if bg.n() >= 3 {
        out.push(r_ts / (a * a));
    }
    out
}

/// Minimum of the frame bisectional curvatures over the samples, floored at 0.
pub fn min_bisectional_estimate(bg: &RadialBackground, us: &[f64]) -> f64 {
    us.iter()
        .flat_map(|&u| frame_curvatures(bg, u))
        .fold(0.0_f64, f64::min)
}
