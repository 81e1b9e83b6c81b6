//! The K-energy along a path of potentials: its first derivative, three
//! evaluations of the second derivative, the Lichnerowicz term and the
//! integration-by-parts identity for the geodesic term.
//!
//! Integrals run over the columns `2..=N_x−3`, where every quantity and its
//! first derivative come from central stencils. The divergence terms that
//! would vanish on the whole manifold are evaluated explicitly as boundary
//! terms of that annulus, so that comparisons between routes can be made
//! flux-corrected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{d_dt, trapezoid, Field2D, Grid2D};
use crate::ma::{geodesic_operator, node_states, PotentialPath};
use crate::slice::Slice;

/// Data of one time row needed by every energy quantity.
struct Row {
    slice: Slice,
    /// `∂_tφ` at the row.
    phi_t: Vec<f64>,
    k: Vec<f64>,
    lo: usize,
    hi: usize,
}

fn row(p: &PotentialPath, phi_t: &Field2D, j: usize) -> Result<Row> {
    row_in(p, phi_t, j, 2, p.grid().nx() - 3)
}

fn row_in(p: &PotentialPath, phi_t: &Field2D, j: usize, lo: usize, hi: usize) -> Result<Row> {
    let g = *p.grid();
    let slice = Slice::new(&p.bg, &g.xs(), &p.phi.time_slice(j))?;
    let k = slice.scalar_curvature();
    Ok(Row {
        slice,
        phi_t: phi_t.time_slice(j),
        k,
        lo,
        hi,
    })
}

fn dk_of(r: &Row) -> f64 {
    let f: Vec<f64> = r.k.iter().zip(&r.phi_t).map(|(k, v)| k * v).collect();
    -r.slice.integrate(&f, r.lo, r.hi)
}

/// `dK/dt = −∫ K_φ ∂_tφ dμ_φ` at time row `j`.
pub fn k_energy_derivative(p: &PotentialPath, j: usize) -> Result<f64> {
    let phi_t = d_dt(&p.phi);
    Ok(dk_of(&row(p, &phi_t, j)?))
}

/// Pieces of `∫ |𝒟φ′|² dμ_φ`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Lichnerowicz {
    /// `∫ (Δ_φ φ′)² dμ_φ`.
    pub laplacian_sq: f64,
    /// `∫ Ric_φ(∂φ′, ∂̄φ′) dμ_φ`.
    pub ricci: f64,
    /// `laplacian_sq − ricci`.
    pub bochner: f64,
    /// `∫ |𝒟φ′|² dμ_φ` from the explicit radial Hessian.
    pub direct: f64,
    /// `bochner − direct`: the boundary term of the Bochner identity.
    pub flux: f64,
}

fn lichnerowicz_of(r: &Row) -> Lichnerowicz {
    let lap = r.slice.laplacian(&r.phi_t);
    let lap_sq: Vec<f64> = lap.iter().map(|v| v * v).collect();
    let laplacian_sq = r.slice.integrate(&lap_sq, r.lo, r.hi);
    let ricci = r.slice.integrate(&r.slice.ricci_form(&r.phi_t), r.lo, r.hi);
    let direct = r.slice.integrate(&r.slice.hessian_sq(&r.phi_t), r.lo, r.hi);
    let bochner = laplacian_sq - ricci;
    Lichnerowicz {
        laplacian_sq,
        ricci,
        bochner,
        direct,
        flux: bochner - direct,
    }
}

/// `∫ |𝒟φ′|² dμ_φ` at row `j`, Bochner route with the direct route alongside.
pub fn lichnerowicz_integral(p: &PotentialPath, j: usize) -> Result<Lichnerowicz> {
    let phi_t = d_dt(&p.phi);
    Ok(lichnerowicz_of(&row(p, &phi_t, j)?))
}

fn term_g_of(r: &Row, gop: &[f64]) -> f64 {
    let f: Vec<f64> = gop.iter().zip(&r.k).map(|(g, k)| g * k).collect();
    -r.slice.integrate(&f, r.lo, r.hi)
}

/// `(∫|𝒟φ′|², −∫ 𝒢 K_φ)` at row `j`; their sum is `d²K/dt²`.
pub fn d2k_decomposed(p: &PotentialPath, j: usize) -> Result<(f64, f64)> {
    let phi_t = d_dt(&p.phi);
    let gop = geodesic_operator(p)?;
    let r = row(p, &phi_t, j)?;
    Ok((
        lichnerowicz_of(&r).bochner,
        term_g_of(&r, &gop.time_slice(j)),
    ))
}

/// Both sides of `−∫𝒢K_φ = ∫|∂𝒢|²/𝒢 − ∫𝒢 tr_φRic(ω) − flux`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IbpCheck {
    pub lhs: f64,
    /// `∫ |∂𝒢|²_φ / 𝒢 dμ_φ`.
    pub gradient_term: f64,
    /// `∫ 𝒢 tr_φ Ric(ω) dμ_φ`.
    pub ricci_term: f64,
    /// `∫ Δ_φ 𝒢 dμ_φ` as a boundary flux of the annulus.
    pub flux: f64,
    /// `gradient_term − ricci_term − flux`.
    pub rhs: f64,
    pub residual: f64,
    /// Largest `|log 𝒢 + log(ω_φⁿ/ωⁿ) − log ε|` over interior nodes of the row.
    pub log_identity_error: f64,
}

fn ibp_of(p: &PotentialPath, r: &Row, gop: &[f64], j: usize) -> Result<IbpCheck> {
    let g = *p.grid();
    if !(p.eps > 0.0) {
        return Err(Error::NonPositiveG("the identity needs ε > 0".into()));
    }
    for i in r.lo..=r.hi {
        if !(gop[i] > 0.0) {
            return Err(Error::NonPositiveG(format!(
                "x = {:.6}, t = {:.6}: 𝒢 = {:e}",
                g.x(i),
                g.t(j),
                gop[i]
            )));
        }
    }
    let lhs = term_g_of(r, gop);
    let grad = r.slice.grad_sq(gop);
    let f: Vec<f64> = grad.iter().zip(gop).map(|(a, b)| a / b).collect();
    let gradient_term = r.slice.integrate(&f, r.lo, r.hi);
    let tr = r.slice.trace_background_ricci();
    let f: Vec<f64> = tr.iter().zip(gop).map(|(a, b)| a * b).collect();
    let ricci_term = r.slice.integrate(&f, r.lo, r.hi);
    let flux = r.slice.flux(gop, r.lo, r.hi);
    let rhs = gradient_term - ricci_term - flux;
    let states = node_states(p);
    let mut log_err = 0.0_f64;
    if j > 0 && j + 1 < g.nt() {
        for i in 1..g.nx() - 1 {
            let s = &states[g.idx(i, j)];
            let e = gop[i].ln() + s.volume_ratio(p.bg.n()).ln() - p.eps.ln();
            log_err = log_err.max(e.abs());
        }
    }
    Ok(IbpCheck {
        lhs,
        gradient_term,
        ricci_term,
        flux,
        rhs,
        residual: (lhs - rhs).abs(),
        log_identity_error: log_err,
    })
}

/// The integration-by-parts identity at row `j`.
pub fn ibp_identity_check(p: &PotentialPath, j: usize) -> Result<IbpCheck> {
    let phi_t = d_dt(&p.phi);
    let gop = geodesic_operator(p)?;
    let r = row(p, &phi_t, j)?;
    ibp_of(p, &r, &gop.time_slice(j), j)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub dk_dt: f64,
    /// Central difference of `dK/dt` in `t`.
    pub d2k_fd: f64,
    /// Truncation estimate `|fd_Δt − fd_2Δt| / 3` of `d2k_fd`, taken from
    /// the nearest row where the wide stencil fits.
    pub fd_error: f64,
    /// Spatial truncation estimate `max |route_h − route_2h| / 3` over the
    /// corrected routes, on the annulus shared by both grids; zero when the
    /// coarse grid is unavailable.
    pub space_error: f64,
    pub term_d: f64,
    pub term_g: f64,
    /// `term_d + term_g`.
    pub d2k_decomp: f64,
    /// `term_d + gradient_term − ricci_term`: the geodesic term rewritten by
    /// parts, with the boundary flux dropped as on the whole manifold.
    pub d2k_ibp: f64,
    /// Boundary term of the second variation on the annulus, so that
    /// `d²K/dt² = term_d + term_g + boundary` there.
    pub boundary: f64,
    /// `∫|𝒟φ′|² + ∫|∂𝒢|²/𝒢 − ∫𝒢 tr_φRic(ω)` with the direct Hessian: the
    /// whole-manifold second variation, every boundary term dropped.
    pub d2k_manifold: f64,
    pub lichnerowicz: Lichnerowicz,
    pub ibp: IbpCheck,
}

impl EnergySample {
    /// Largest boundary flux reported at this sample.
    pub fn flux(&self) -> f64 {
        self.boundary.abs().max(self.ibp.flux.abs())
    }

    /// The three routes with boundary terms restored:
    /// finite difference, decomposition plus boundary, identity route plus
    /// both boundary terms.
    pub fn corrected_routes(&self) -> [f64; 3] {
        [
            self.d2k_fd,
            self.d2k_decomp + self.boundary,
            self.d2k_ibp - self.ibp.flux + self.boundary,
        ]
    }
}

/// All energy quantities of one converged solution.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EnergyScan {
    pub eps: f64,
    pub samples: Vec<EnergySample>,
    /// `K(t_j) − K(0)` by trapezoidal integration of `dK/dt` over all rows.
    pub k_profile: Vec<f64>,
    /// `max_j (|term_d| + |term_g|)`.
    pub scale: f64,
    /// Largest identity residual over all samples.
    pub noise_floor: f64,
    /// `d²K/dt² ≥ −CONVEX_TOL·scale` for the energy of the annulus, taken
    /// from the finite-difference route.
    pub convex: bool,
    /// The same bound for `d2k_manifold`.
    pub convex_manifold: bool,
    /// Largest relative disagreement among the three flux-corrected routes
    /// over samples above ten times their own noise, which is the identity
    /// residual plus the temporal and spatial truncation estimates.
    pub max_route_spread: f64,
    pub routes_agree: bool,
    /// Largest boundary flux relative to `max(|term_d|, |term_g|)`.
    pub max_flux_ratio: f64,
    /// `max_flux_ratio ≤ FLUX_TOL`.
    pub flux_small: bool,
    pub max_log_identity_error: f64,
    /// Size below which the second-variation quantities are rounding noise.
    pub roundoff_floor: f64,
}

/// Multiple of machine epsilon in the rounding floor.
pub const ROUNDOFF_FACTOR: f64 = 1e3;

/// Relative tolerance of the convexity verdict.
pub const CONVEX_TOL: f64 = 1e-6;
/// Largest boundary flux, relative to the dominant term, for which the
/// annulus stands in for the whole manifold.
pub const FLUX_TOL: f64 = 0.01;
/// Allowed relative disagreement between the three routes.
pub const ROUTE_TOL: f64 = 0.05;

/// Samples at every interior time row over the columns `lo..=hi`, with the
/// `K` profile.
fn samples_on(p: &PotentialPath, lo: usize, hi: usize) -> Result<(Vec<EnergySample>, Vec<f64>)> {
    let g = *p.grid();
    let phi_t = d_dt(&p.phi);
    let gop = geodesic_operator(p)?;
    let rows: Vec<Row> = (0..g.nt())
        .map(|j| row_in(p, &phi_t, j, lo, hi))
        .collect::<Result<_>>()?;
    let dk: Vec<f64> = rows.iter().map(dk_of).collect();
    let ts = g.ts();
    let mut k_profile = vec![0.0];
    for j in 1..g.nt() {
        k_profile.push(trapezoid(&ts[..=j], &dk[..=j]));
    }
    let nt = g.nt();
    let fd_err = |j: usize| {
        let j = j.clamp(2.min(nt / 2), (nt - 3).max(nt / 2));
        if j < 2 || j + 2 >= nt {
            return 0.0;
        }
        let fd = (dk[j + 1] - dk[j - 1]) / (ts[j + 1] - ts[j - 1]);
        let wide = (dk[j + 2] - dk[j - 2]) / (ts[j + 2] - ts[j - 2]);
        (fd - wide).abs() / 3.0
    };
    let mut samples = Vec::new();
    for j in 1..nt - 1 {
        let r = &rows[j];
        let gs = gop.time_slice(j);
        let lich = lichnerowicz_of(r);
        let term_g = term_g_of(r, &gs);
        let ibp = ibp_of(p, r, &gs, j)?;
        samples.push(EnergySample {
            t: ts[j],
            dk_dt: dk[j],
            d2k_fd: (dk[j + 1] - dk[j - 1]) / (ts[j + 1] - ts[j - 1]),
            fd_error: fd_err(j),
            space_error: 0.0,
            term_d: lich.bochner,
            term_g,
            d2k_decomp: lich.bochner + term_g,
            d2k_ibp: lich.bochner + ibp.gradient_term - ibp.ricci_term,
            boundary: r.slice.variation_boundary(&r.phi_t, r.lo, r.hi),
            d2k_manifold: lich.direct + ibp.gradient_term - ibp.ricci_term,
            lichnerowicz: lich,
            ibp,
        });
    }
    Ok((samples, k_profile))
}

/// Keeps every other column, so the coarse grid has spacing `2h`.
fn coarsened(p: &PotentialPath) -> Result<PotentialPath> {
    let g = *p.grid();
    let nc = g.nx().div_ceil(2);
    let cg = Grid2D::new(g.x_min(), g.x_max(), nc, g.nt())?;
    let mut phi = Field2D::zeros(cg);
    for i in 0..nc {
        for j in 0..g.nt() {
            phi.set(i, j, p.phi.at(2 * i, j));
        }
    }
    PotentialPath::new(p.bg.clone(), phi, p.phi0.clone(), p.phi1.clone(), p.eps)
}

/// Per-row spatial truncation estimates, when `N_x` is odd and the coarse
/// annulus is long enough to evaluate.
fn space_errors(p: &PotentialPath) -> Option<Vec<f64>> {
    let nx = p.grid().nx();
    if nx.is_multiple_of(2) || nx < 21 {
        return None;
    }
    let (fine, _) = samples_on(p, 4, nx - 5).ok()?;
    let c = coarsened(p).ok()?;
    let (coarse, _) = samples_on(&c, 2, c.grid().nx() - 3).ok()?;
    Some(
        fine.iter()
            .zip(&coarse)
            .map(|(f, c)| {
                let (a, b) = (f.corrected_routes(), c.corrected_routes());
                (0..3)
                    .map(|k| (a[k] - b[k]).abs() / 3.0)
                    .fold(0.0, f64::max)
            })
            .collect(),
    )
}

/// `ROUNDOFF_FACTOR·ε_mach` times the largest `∫ (|∂_tφ|/(λ_rad u h²))² dμ`
/// over the rows: the Hessian energy of a velocity of this size that
/// changes by its full value in one grid step.
fn roundoff_floor(p: &PotentialPath, lo: usize, hi: usize) -> Result<f64> {
    let g = *p.grid();
    let phi_t = d_dt(&p.phi);
    let h2 = g.hx() * g.hx();
    let mut d = 0.0_f64;
    for j in 0..g.nt() {
        let r = row_in(p, &phi_t, j, lo, hi)?;
        let v = r.phi_t.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let us = r.slice.us();
        let f: Vec<f64> = (0..g.nx())
            .map(|i| (v / (r.slice.lam_rad(i) * us[i] * h2)).powi(2))
            .collect();
        d = d.max(r.slice.integrate(&f, lo, hi));
    }
    Ok(ROUNDOFF_FACTOR * f64::EPSILON * d)
}

/// Energy quantities at every interior time row of `p`.
pub fn energy_scan(p: &PotentialPath) -> Result<EnergyScan> {
    let (mut samples, k_profile) = samples_on(p, 2, p.grid().nx() - 3)?;
    if let Some(errs) = space_errors(p) {
        for (s, e) in samples.iter_mut().zip(errs) {
            s.space_error = e;
        }
    }
    let scale = samples
        .iter()
        .map(|s| s.term_d.abs() + s.term_g.abs())
        .fold(f64::MIN_POSITIVE, f64::max);
    let noise_floor = samples.iter().map(|s| s.ibp.residual).fold(0.0, f64::max);
    let floor = roundoff_floor(p, 2, p.grid().nx() - 3)?;
    let convex = samples
        .iter()
        .all(|s| s.d2k_fd >= -CONVEX_TOL * scale - floor);
    let convex_manifold = samples
        .iter()
        .all(|s| s.d2k_manifold >= -CONVEX_TOL * scale - floor);
    let mut spread = 0.0_f64;
    for s in &samples {
        let v = s.corrected_routes();
        let big = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if big > floor && big > 10.0 * (s.ibp.residual.abs() + s.fd_error + s.space_error) {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            spread = spread.max((hi - lo) / big);
        }
    }
    let max_flux_ratio = samples
        .iter()
        .filter(|s| s.flux().max(s.term_d.abs()).max(s.term_g.abs()) > floor)
        .map(|s| s.flux() / s.term_d.abs().max(s.term_g.abs()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let max_log = samples
        .iter()
        .map(|s| s.ibp.log_identity_error)
        .fold(0.0, f64::max);
    Ok(EnergyScan {
        eps: p.eps,
        samples,
        k_profile,
        scale,
        noise_floor,
        convex,
        convex_manifold,
        max_route_spread: spread,
        routes_agree: spread <= ROUTE_TOL,
        max_flux_ratio,
        flux_small: max_flux_ratio <= FLUX_TOL,
        max_log_identity_error: max_log,
        roundoff_floor: floor,
    })
}

/// Energy scans of a sequence of solutions with an overall verdict.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EnergyReport {
    pub scans: Vec<EnergyScan>,
    pub convex: bool,
    pub convex_manifold: bool,
    pub routes_agree: bool,
    pub flux_small: bool,
    /// All four verdicts hold.
    pub pass: bool,
}

pub fn convexity_scan<'a>(
    paths: impl IntoIterator<Item = &'a PotentialPath>,
) -> Result<EnergyReport> {
    let scans: Vec<EnergyScan> = paths.into_iter().map(energy_scan).collect::<Result<_>>()?;
    let all = |f: fn(&EnergyScan) -> bool| scans.iter().all(f);
    let (convex, convex_manifold) = (all(|s| s.convex), all(|s| s.convex_manifold));
    let (routes_agree, flux_small) = (all(|s| s.routes_agree), all(|s| s.flux_small));
    Ok(EnergyReport {
        convex,
        convex_manifold,
        routes_agree,
        flux_small,
        pass: convex && convex_manifold && routes_agree && flux_small,
        scans,
    })
}

impl EnergyScan {
    /// Columns `t, dK/dt, d2K_fd, d2K_decomp, d2K_ibp, d2K_manifold, flux`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,dK_dt,d2K_fd,d2K_decomp,d2K_ibp,d2K_manifold,flux\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                s.t,
                s.dk_dt,
                s.d2k_fd,
                s.d2k_decomp,
                s.d2k_ibp,
                s.d2k_manifold,
                s.flux()
            ));
        }
        out
    }
}
