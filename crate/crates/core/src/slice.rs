//! Radial calculus on a single time slice `φ(·, t)`.
//!
//! Everything is expressed through the moment profile `P = uΦ_u` of the
//! total potential and its x-derivatives, so that
//! `Δ_φ v = (n−1)v_x/(2P) + v_xx/(2P_x)` and `dμ_φ = κ P^{n−1} P_x dx`.
//! The log-volume `h = log det g_φ` is split into an analytic background
//! part and a relative part `(n−1) ln(P/P_bg) + ln(P_x/P_bg,x)` which is
//! differenced on the grid; for `φ = 0` the relative part vanishes exactly.

use crate::error::{Error, Result};
use crate::geometry::RadialBackground;
use crate::grid::{diff1, diff2, trapezoid};

/// Metric data of `ω_φ` along one radial line of grid nodes.
#[derive(Clone, Debug)]
pub struct Slice {
    n: usize,
    kappa: f64,
    h: f64,
    xs: Vec<f64>,
    us: Vec<f64>,
    p: Vec<f64>,
    px: Vec<f64>,
    pxx: Vec<f64>,
    /// `(h_x, h_xx)` of `log det g_φ`.
    hx: Vec<f64>,
    hxx: Vec<f64>,
    /// Background Ricci eigenvalues `(μ_tan, μ_rad)`.
    ric_bg: Vec<(f64, f64)>,
}

impl Slice {
    /// Builds the slice from `φ` sampled at equispaced `xs`.
    pub fn new(bg: &RadialBackground, xs: &[f64], phi: &[f64]) -> Result<Slice> {
        if xs.len() != phi.len() || xs.len() < 5 {
            return Err(Error::GridMismatch(format!(
                "slice needs matching samples (≥ 5), got {} and {}",
                xs.len(),
                phi.len()
            )));
        }
        let h = xs[1] - xs[0];
        let n = bg.n();
        let m = (n - 1) as f64;
        let fx = diff1(phi, h);
        let fxx = diff2(phi, h);
        let len = xs.len();
        let mut p = Vec::with_capacity(len);
        let mut px = Vec::with_capacity(len);
        let mut rel = Vec::with_capacity(len);
        let mut hx_bg = Vec::with_capacity(len);
        let mut hxx_bg = Vec::with_capacity(len);
        let mut ric_bg = Vec::with_capacity(len);
        let mut us = Vec::with_capacity(len);
        for i in 0..len {
            let u = (2.0 * xs[i]).exp();
            let [pb, pbx, _] = bg.moment(xs[i]);
            let pi = pb + 0.5 * fx[i];
            let pxi = pbx + 0.5 * fxx[i];
            if !(pi > 0.0 && pxi > 0.0) {
                return Err(Error::positivity(
                    format!("x = {:.6}", xs[i]),
                    format!("P = {pi:e}, P_x = {pxi:e}"),
                ));
            }
            let [_, hu, huu] = bg.log_det_jet(u);
            hx_bg.push(2.0 * u * hu);
            hxx_bg.push(4.0 * u * hu + 4.0 * u * u * huu);
            ric_bg.push(bg.ricci(u));
            rel.push(m * (0.5 * fx[i] / pb).ln_1p() + (0.5 * fxx[i] / pbx).ln_1p());
            p.push(pi);
            px.push(pxi);
            us.push(u);
        }
        let rel_x = diff1(&rel, h);
        let rel_xx = diff2(&rel, h);
        let fxxx = diff1(&fxx, h);
        let pxx = (0..len)
            .map(|i| bg.moment(xs[i])[2] + 0.5 * fxxx[i])
            .collect();
        Ok(Slice {
            n,
            kappa: bg.kappa(),
            h,
            xs: xs.to_vec(),
            us,
            p,
            px,
            pxx,
            hx: hx_bg.iter().zip(&rel_x).map(|(a, b)| a + b).collect(),
            hxx: hxx_bg.iter().zip(&rel_xx).map(|(a, b)| a + b).collect(),
            ric_bg,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }
    pub fn us(&self) -> &[f64] {
        &self.us
    }
    pub fn moment(&self) -> (&[f64], &[f64]) {
        (&self.p, &self.px)
    }
    pub fn log_det_derivs(&self) -> (&[f64], &[f64]) {
        (&self.hx, &self.hxx)
    }
    pub fn lam_tan(&self, i: usize) -> f64 {
        self.p[i] / self.us[i]
    }
    pub fn lam_rad(&self, i: usize) -> f64 {
        self.px[i] / (2.0 * self.us[i])
    }

    /// Scalar curvature `−Δ_φ log det g_φ`.
    pub fn scalar_curvature(&self) -> Vec<f64> {
        let m = (self.n - 1) as f64;
        (0..self.len())
            .map(|i| -(m * self.hx[i] / (2.0 * self.p[i]) + self.hxx[i] / (2.0 * self.px[i])))
            .collect()
    }

    /// `tr_φ Ric(ω)` of the background Ricci form.
    pub fn trace_background_ricci(&self) -> Vec<f64> {
        let m = (self.n - 1) as f64;
        (0..self.len())
            .map(|i| {
                let (mt, mr) = self.ric_bg[i];
                m * mt / self.lam_tan(i) + mr / self.lam_rad(i)
            })
            .collect()
    }

    /// `Δ_φ v` from samples of `v`.
    pub fn laplacian(&self, v: &[f64]) -> Vec<f64> {
        let vx = diff1(v, self.h);
        let vxx = diff2(v, self.h);
        self.laplacian_from(&vx, &vxx)
    }

    /// `Δ_φ v` from given `(v_x, v_xx)`.
    pub fn laplacian_from(&self, vx: &[f64], vxx: &[f64]) -> Vec<f64> {
        let m = (self.n - 1) as f64;
        (0..self.len())
            .map(|i| m * vx[i] / (2.0 * self.p[i]) + vxx[i] / (2.0 * self.px[i]))
            .collect()
    }

    /// `|∂v|²_φ = v_x² / (2P_x)`.
    pub fn grad_sq(&self, v: &[f64]) -> Vec<f64> {
        let vx = diff1(v, self.h);
        (0..self.len())
            .map(|i| vx[i] * vx[i] / (2.0 * self.px[i]))
            .collect()
    }

    /// `Ric_φ(∂v, ∂̄v) = −h_xx v_x² / (4P_x²)`.
    pub fn ricci_form(&self, v: &[f64]) -> Vec<f64> {
        let vx = diff1(v, self.h);
        (0..self.len())
            .map(|i| -self.hxx[i] * vx[i] * vx[i] / (4.0 * self.px[i] * self.px[i]))
            .collect()
    }

    /// `|∇^{1,0}∇^{1,0} v|²_φ = (v_xx − v_x P_xx/P_x)² / (4P_x²)` for radial `v`.
    pub fn hessian_sq(&self, v: &[f64]) -> Vec<f64> {
        let vx = diff1(v, self.h);
        let vxx = diff2(v, self.h);
        (0..self.len())
            .map(|i| {
                let a = vxx[i] - vx[i] * self.pxx[i] / self.px[i];
                a * a / (4.0 * self.px[i] * self.px[i])
            })
            .collect()
    }

    /// Boundary term of the annulus second variation,
    /// `(κ/2)[(Q̇ h_x + Q (Δψ)_x) ψ − Q Δψ ψ_x]` between nodes `lo` and `hi`,
    /// with `Q = P^{n−1}` and `Q̇ = (n−1) P^{n−2} ψ_x / 2`.
    pub fn variation_boundary(&self, psi: &[f64], lo: usize, hi: usize) -> f64 {
        let m = (self.n - 1) as f64;
        let px = diff1(psi, self.h);
        let lap = self.laplacian(psi);
        let lap_x = diff1(&lap, self.h);
        let w = |i: usize| {
            let q = self.p[i].powi(self.n as i32 - 1);
            let q_dot = m * self.p[i].powi(self.n as i32 - 2) * px[i] / 2.0;
            (q_dot * self.hx[i] + q * lap_x[i]) * psi[i] - q * lap[i] * px[i]
        };
        0.5 * self.kappa * (w(hi) - w(lo))
    }

    /// `P^{n−1} P_x`, the x-density of `dμ_φ / κ`.
    pub fn density(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.p[i].powi(self.n as i32 - 1) * self.px[i])
            .collect()
    }

    /// `∫ f dμ_φ` over nodes `lo..=hi`, trapezoidal in `x`.
    pub fn integrate(&self, f: &[f64], lo: usize, hi: usize) -> f64 {
        let d = self.density();
        let ys: Vec<f64> = (lo..=hi).map(|i| f[i] * d[i]).collect();
        self.kappa * trapezoid(&self.xs[lo..=hi], &ys)
    }

    /// Boundary flux `(κ/2) [P^{n−1} f_x]` between nodes `lo` and `hi`,
    /// so that `∫ Δ_φ f dμ_φ = flux`.
    pub fn flux(&self, f: &[f64], lo: usize, hi: usize) -> f64 {
        let fx = diff1(f, self.h);
        let w = |i: usize| self.p[i].powi(self.n as i32 - 1) * fx[i];
        0.5 * self.kappa * (w(hi) - w(lo))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xs(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn background_slices_are_scalar_flat() {
        let x = xs(-1.0, 3.0, 81);
        for bg in [
            RadialBackground::flat(2),
            RadialBackground::flat(3),
            RadialBackground::eguchi_hanson(1.0).unwrap(),
        ] {
            let s = Slice::new(&bg, &x, &vec![0.0; x.len()]).unwrap();
            assert!(s.scalar_curvature().iter().all(|k| k.abs() < 1e-12));
        }
    }

    #[test]
    fn flat_laplacian_of_u() {
        // Δ u = n on flat space; ∫_{|z|<R} dμ = κ R^{2n}/n.
        let x = xs(-0.5, 0.5, 201);
        let bg = RadialBackground::flat(3);
        let s = Slice::new(&bg, &x, &vec![0.0; x.len()]).unwrap();
        let v: Vec<f64> = s.us().to_vec();
        let lap = s.laplacian(&v);
        for l in &lap[1..lap.len() - 1] {
            assert!((l - 3.0).abs() < 1e-3);
        }
        let ones = vec![1.0; x.len()];
        let vol = s.integrate(&ones, 0, x.len() - 1);
        let exact = bg.kappa() * (1.0f64.exp().powi(3) - (-1.0f64).exp().powi(3)) / 3.0;
        assert!((vol - exact).abs() < 1e-4 * exact);
        // divergence theorem
        let lhs = s.integrate(&lap, 1, x.len() - 2);
        let rhs = s.flux(&v, 1, x.len() - 2);
        assert!((lhs - rhs).abs() < 1e-3 * rhs.abs());
    }

    #[test]
    fn eh_trace_ricci_is_zero() {
        let x = xs(-1.0, 2.0, 31);
        let bg = RadialBackground::eguchi_hanson(1.0).unwrap();
        let s = Slice::new(&bg, &x, &vec![0.0; x.len()]).unwrap();
        assert!(s.trace_background_ricci().iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn rejects_degenerate_slice() {
        let x = xs(0.0, 1.0, 11);
        let phi: Vec<f64> = x.iter().map(|x| -2.0 * (2.0 * x).exp()).collect();
        assert!(Slice::new(&RadialBackground::flat(2), &x, &phi).is_err());
    }
}
