//! A-posteriori checks of a converged path: decay exponents, uniform size
//! bounds, curvature decay of the time slices and Aubin's inequality on the
//! total space `M × Σ`.
//!
//! Decay is fitted on `log |f|` against `x = log r`. Spatial quantities are
//! reduced to radial profiles by taking the supremum over the interior time
//! rows, so that the prescribed endpoint data does not enter the fits.
//! Potentials are measured relative to the edge data of the flat model,
//! `ε t(t−1)/2` for parabolic side data, which is what the path tends to at
//! large radius.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RadialBackground;
use crate::grid::{d2_dt2, d_dt, Field2D};
use crate::ma::{central_derivs, NodeState, PotentialPath, SideData};
use crate::slice::Slice;
use crate::solver::background_laplacian;

/// Allowed distance of a fitted exponent from its target.
pub const DECAY_TOL: f64 = 0.3;
/// Largest increase of `log |f|` against the trend before a fit is rejected.
pub const MONOTONE_TOL: f64 = 1e-3;
/// Smallest number of samples in a fit window.
pub const MIN_FIT_POINTS: usize = 10;
/// Relative tolerance of the Aubin margin.
pub const AUBIN_TOL: f64 = 1e-4;
/// Slices with `sup r²|K|` below this are treated as identically flat.
pub const FLAT_TOL: f64 = 1e-10;

/// Node range `lo..=hi` of a fit.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct FitWindow {
    pub lo: usize,
    pub hi: usize,
}

impl FitWindow {
    /// Outer 30% of the range, without the 5 outermost nodes.
    pub fn outer(nx: usize) -> Result<FitWindow> {
        let lo = (0.7 * (nx - 1) as f64).ceil() as usize;
        let hi = nx.saturating_sub(6);
        FitWindow::new(lo, hi, nx)
    }

    pub fn new(lo: usize, hi: usize, nx: usize) -> Result<FitWindow> {
        if hi >= nx || hi < lo || hi - lo + 1 < MIN_FIT_POINTS {
            return Err(Error::DegenerateFit(format!(
                "window {lo}..={hi} on {nx} nodes needs at least {MIN_FIT_POINTS} points"
            )));
        }
        Ok(FitWindow { lo, hi })
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Least-squares power law `|f| ≈ C r^slope`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    /// RMS deviation of `log |f|` from the fitted line.
    pub residual: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub points: usize,
}

/// Fits the slope of `log |f|` against `x = log r` over `w`.
pub fn fit_decay(xs: &[f64], f: &[f64], w: FitWindow) -> Result<DecayFit> {
    if xs.len() != f.len() || w.hi >= xs.len() {
        return Err(Error::GridMismatch(format!(
            "{} abscissae, {} values, window ends at {}",
            xs.len(),
            f.len(),
            w.hi
        )));
    }
    let x = &xs[w.lo..=w.hi];
    let mut y = Vec::with_capacity(w.len());
    for (k, v) in f[w.lo..=w.hi].iter().enumerate() {
        if !(v.abs() > 0.0) || !v.is_finite() {
            return Err(Error::DegenerateFit(format!(
                "f = {v:e} at x = {:.6}",
                x[k]
            )));
        }
        y.push(v.abs().ln());
    }
    let (ymin, ymax) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    if ymax - ymin < 1e-9 {
        return Err(Error::DegenerateFit("|f| is constant on the window".into()));
    }
    let trend = (y[y.len() - 1] - y[0]).signum();
    for k in 1..y.len() {
        if (y[k] - y[k - 1]) * trend < -MONOTONE_TOL {
            return Err(Error::DegenerateFit(format!(
                "|f| is not monotone near x = {:.6}",
                x[k]
            )));
        }
    }
    let m = x.len() as f64;
    let xm = x.iter().sum::<f64>() / m;
    let ym = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let sxx: f64 = x.iter().map(|a| (a - xm) * (a - xm)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - ym - slope * (a - xm)).powi(2))
        .sum();
    Ok(DecayFit {
        slope,
        residual: (rss / m).sqrt(),
        x_lo: x[0],
        x_hi: x[x.len() - 1],
        points: x.len(),
    })
}

/// How a fitted exponent is compared with its target.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DecayRule {
    /// `|slope − target| ≤ DECAY_TOL`.
    Matches,
    /// `slope ≤ target + DECAY_TOL`: the quantity is `O(r^target)`.
    AtMost,
}

impl DecayRule {
    pub fn holds(self, slope: f64, target: f64) -> bool {
        match self {
            DecayRule::Matches => (slope - target).abs() <= DECAY_TOL,
            DecayRule::AtMost => slope <= target + DECAY_TOL,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// No power law to fit; the reason is recorded alongside.
    DegenerateFit,
}

/// One fitted quantity of a [`DecayReport`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DecayEntry {
    pub quantity: String,
    pub fit: Option<DecayFit>,
    pub degenerate_reason: Option<String>,
    pub rule: DecayRule,
    /// Candidate targets; two when the exponent depends on the reading of
    /// the dimension `m` (`m = n` first, then `m = n + 1`).
    pub targets: Vec<f64>,
    /// Which targets the fit is consistent with.
    pub consistent: Vec<bool>,
    pub verdict: Verdict,
    /// `(x, log |f|)` over the whole radial profile, for plotting.
    #[serde(skip)]
    pub profile: Vec<(f64, f64)>,
}

impl DecayEntry {
    fn new(
        quantity: &str,
        xs: &[f64],
        f: &[f64],
        w: Option<FitWindow>,
        rule: DecayRule,
        targets: Vec<f64>,
    ) -> Self {
        let profile = xs
            .iter()
            .zip(f)
            .filter(|(_, v)| v.abs() > 0.0 && v.is_finite())
            .map(|(x, v)| (*x, v.abs().ln()))
            .collect();
        let fitted = match w {
            Some(w) => fit_decay(xs, f, w),
            None => Err(Error::DegenerateFit(
                "grid too coarse for a fit window".into(),
            )),
        };
        let (fit, reason) = match fitted {
            Ok(fit) => (Some(fit), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let consistent: Vec<bool> = match &fit {
            Some(fit) => targets.iter().map(|t| rule.holds(fit.slope, *t)).collect(),
            None => vec![false; targets.len()],
        };
        let verdict = match (&fit, consistent.iter().any(|c| *c)) {
            (None, _) => Verdict::DegenerateFit,
            (Some(_), true) => Verdict::Pass,
            (Some(_), false) => Verdict::Fail,
        };
        DecayEntry {
            quantity: quantity.into(),
            fit,
            degenerate_reason: reason,
            rule,
            targets,
            consistent,
            verdict,
            profile,
        }
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    /// Columns `x, log_abs`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,log_abs\n");
        for (x, y) in &self.profile {
            out.push_str(&format!("{x:.16e},{y:.16e}\n"));
        }
        out
    }
}

/// Fitted decay exponents of one solution.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DecayReport {
    pub eps: f64,
    /// `None` when the grid is too coarse for a fit window.
    pub window: Option<FitWindow>,
    pub entries: Vec<DecayEntry>,
    /// No entry fails; degenerate fits do not count as failures.
    pub pass: bool,
}

impl DecayReport {
    pub fn entry(&self, quantity: &str) -> Option<&DecayEntry> {
        self.entries.iter().find(|e| e.quantity == quantity)
    }
}

/// `sup |f(x_i, t_j)|` over interior rows `j`, for every column.
fn radial_sup(f: &Field2D) -> Vec<f64> {
    let g = f.grid();
    (0..g.nx())
        .map(|i| {
            let col = f.space_column(i);
            col[1..col.len() - 1]
                .iter()
                .fold(0.0_f64, |m, v| m.max(v.abs()))
        })
        .collect()
}

/// `φ` minus the flat-model edge data with zero endpoints.
pub fn relative_potential(p: &PotentialPath, side: SideData) -> Field2D {
    let g = *p.grid();
    let mut out = p.phi.clone();
    for i in 0..g.nx() {
        for j in 0..g.nt() {
            let t = g.t(j);
            let base = side.flat_acceleration(p.eps) * t * (t - 1.0) / 2.0;
            out.set(i, j, p.phi.at(i, j) - base);
        }
    }
    out
}

fn dimension_targets(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    vec![f(n as f64), f(n as f64 + 1.0)]
}

/// Decay fits of the potential, its velocity, the pure Hessian of the
/// velocity and the gradient of the volume ratio.
pub fn decay_report(p: &PotentialPath, side: SideData, w: FitWindow) -> Result<DecayReport> {
    decay_report_in(p, side, Some(w))
}

fn decay_report_in(p: &PotentialPath, side: SideData, w: Option<FitWindow>) -> Result<DecayReport> {
    let g = *p.grid();
    let n = p.bg.n();
    let xs = g.xs();
    let rel = relative_potential(p, side);
    let vel = d_dt(&rel);
    let mut hess = vec![0.0_f64; g.nx()];
    let mut vol_grad = vec![0.0_f64; g.nx()];
    for j in 1..g.nt() - 1 {
        let s = Slice::new(&p.bg, &xs, &p.phi.time_slice(j))?;
        for (m, v) in hess.iter_mut().zip(s.hessian_sq(&vel.time_slice(j))) {
            *m = m.max(v.sqrt());
        }
        let (pp, px) = s.moment();
        let ratio: Vec<f64> = (0..g.nx())
            .map(|i| {
                let [pb, pbx, _] = p.bg.moment(xs[i]);
                (pp[i] / pb).powi(n as i32 - 1) * px[i] / pbx
            })
            .collect();
        let dr = crate::grid::diff1(&ratio, g.hx());
        for i in 0..g.nx() {
            vol_grad[i] = vol_grad[i].max(dr[i].abs() / (2.0 * px[i]).sqrt());
        }
    }
    let decay = 2.0 - 2.0 * n as f64;
    let entries = vec![
        DecayEntry::new(
            "phi",
            &xs,
            &radial_sup(&rel),
            w,
            DecayRule::Matches,
            vec![decay],
        ),
        DecayEntry::new(
            "phi_t",
            &xs,
            &radial_sup(&vel),
            w,
            DecayRule::Matches,
            vec![decay],
        ),
        DecayEntry::new(
            "hessian_phi_t",
            &xs,
            &hess,
            w,
            DecayRule::AtMost,
            dimension_targets(n, |m| 1.0 - 2.0 * m),
        ),
        DecayEntry::new(
            "volume_ratio_gradient",
            &xs,
            &vol_grad,
            w,
            DecayRule::AtMost,
            dimension_targets(n, |m| -2.0 * m - 1.0),
        ),
    ];
    let pass = entries.iter().all(|e| e.verdict != Verdict::Fail);
    Ok(DecayReport {
        eps: p.eps,
        window: w,
        entries,
        pass,
    })
}

/// Uniform size bounds of one solution together with its decay fits.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundReport {
    pub eps: f64,
    /// `sup |Δ_ω φ|` over columns away from the spatial edges.
    pub sup_laplacian: f64,
    pub sup_phi: f64,
    pub sup_phi_t: f64,
    pub sup_phi_tt: f64,
    pub decay: DecayReport,
}

impl BoundReport {
    pub fn is_finite(&self) -> bool {
        [
            self.sup_laplacian,
            self.sup_phi,
            self.sup_phi_t,
            self.sup_phi_tt,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

pub fn bound_suite(p: &PotentialPath, side: SideData) -> Result<BoundReport> {
    let g = *p.grid();
    let lap = background_laplacian(&p.bg, &p.phi);
    let mut sup_lap = 0.0_f64;
    for i in 1..g.nx() - 1 {
        for v in lap.space_column(i) {
            sup_lap = sup_lap.max(v.abs());
        }
    }
    Ok(BoundReport {
        eps: p.eps,
        sup_laplacian: sup_lap,
        sup_phi: p.phi.sup_abs(),
        sup_phi_t: d_dt(&p.phi).sup_abs(),
        sup_phi_tt: d2_dt2(&p.phi).sup_abs(),
        decay: decay_report_in(p, side, FitWindow::outer(g.nx()).ok())?,
    })
}

/// Holomorphic bisectional curvatures of the background in its eigenframe:
/// radial–radial, radial–tangential, tangential–tangential in one complex
/// line and, for `n ≥ 3`, between two tangential lines.
pub fn bisectional_curvatures(bg: &RadialBackground, u: f64) -> Vec<f64> {
    let j = bg.lambda_jet(u);
    let [a, a1, _] = j.tan;
    let [b, b1, b2] = j.rad;
    let rr = (u * b1 * b1 - b * (u * b2 + b1)) / (b * b * b);
    let rt = -(b1 * a - b * a1) / (a * a * b);
    let tt = -2.0 * a1 / (a * a);
    let mut out = vec![rr, rt, tt];
    if bg.n() >= 3 {
        out.push(tt / 2.0);
    }
    out
}

/// Margin of Aubin's inequality at the worst node.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AubinReport {
    pub eps: f64,
    /// `max(n+1, 1 + |min bisectional curvature|)`.
    pub b: f64,
    pub min_bisectional: f64,
    /// `min (RHS − LHS)` over the checked nodes.
    pub worst_margin: f64,
    /// `min (RHS − LHS) / local scale`.
    pub worst_relative: f64,
    pub worst_x: f64,
    pub worst_t: f64,
    pub nodes: usize,
    pub pass: bool,
}

/// Total-space quantities at one node, relative to `Ω = ω + dτ∧dτ̄`.
struct TotalSpace {
    /// `tr_{Ω_φ} Ω`.
    trace_inv: f64,
    /// `tr_Ω Ω_φ = n + 1 + Δ̃φ̃`.
    trace: f64,
}

fn total_space(n: usize, bg: &RadialBackground, s: &NodeState) -> Result<(TotalSpace, f64)> {
    let j = bg.lambda_jet(s.u);
    let (at, ar) = (j.tan[0], j.rad[0]);
    let det = s.lam_rad * s.phi_tt - s.grad_sq;
    if !(s.positive() && det > 0.0) {
        return Err(Error::positivity(
            format!("u = {:.6}", s.u),
            format!(
                "λ_tan = {:e}, λ_rad = {:e}, 2×2 determinant = {det:e}",
                s.lam_tan, s.lam_rad
            ),
        ));
    }
    let m = (n - 1) as f64;
    Ok((
        TotalSpace {
            trace_inv: m * at / s.lam_tan + (s.phi_tt * ar + s.lam_rad) / det,
            trace: m * s.lam_tan / at + s.lam_rad / ar + s.phi_tt,
        },
        det,
    ))
}

/// Checks `tr_{Ω_φ}Ω − B ≤ Δ̃_φ(tr_Ω Ω_φ − (B+1) φ̃)` with `φ̃` the potential
/// of `Ω_φ` relative to `Ω`, so that `Δ̃_φ φ̃ = n + 1 − tr_{Ω_φ}Ω`. Nodes are
/// those where `tr_Ω Ω_φ` has a central stencil: `2..=N_x−3` by `2..=N_t−3`.
pub fn aubin_check(p: &PotentialPath) -> Result<AubinReport> {
    let g = *p.grid();
    if g.nx() < 5 || g.nt() < 5 {
        return Err(Error::GridTooSmall(format!(
            "Aubin check needs 5×5 nodes, got {}×{}",
            g.nx(),
            g.nt()
        )));
    }
    let n = p.bg.n();
    let mut kmin = 0.0_f64;
    for i in 0..g.nx() {
        for k in bisectional_curvatures(&p.bg, g.u(i)) {
            kmin = kmin.min(k);
        }
    }
    let b = (n as f64 + 1.0).max(1.0 + kmin.abs());
    let state = |i: usize, j: usize| NodeState::new(&p.bg, g.x(i), &central_derivs(&p.phi, i, j));
    let mut trace = Field2D::zeros(g);
    for i in 1..g.nx() - 1 {
        for j in 1..g.nt() - 1 {
            trace.set(i, j, total_space(n, &p.bg, &state(i, j))?.0.trace);
        }
    }
    let m = (n - 1) as f64;
    let mut worst = (f64::INFINITY, f64::INFINITY, 0.0, 0.0);
    let mut nodes = 0;
    for i in 2..g.nx() - 2 {
        for j in 2..g.nt() - 2 {
            let s = state(i, j);
            let (ts, det) = total_space(n, &p.bg, &s)?;
            let d = central_derivs(&trace, i, j);
            let phi = central_derivs(&p.phi, i, j);
            let u = s.u;
            let lap_s = m * d.x / (2.0 * u * s.lam_tan)
                + (s.phi_tt * d.xx / (4.0 * u) - phi.tx * d.tx / (2.0 * u) + s.lam_rad * d.tt)
                    / det;
            let margin = lap_s + b * (ts.trace_inv - n as f64) - (n as f64 + 1.0);
            let scale = lap_s.abs() + b * ts.trace_inv + n as f64 + 1.0;
            let rel = margin / scale;
            if rel < worst.1 {
                worst = (margin, rel, g.x(i), g.t(j));
            }
            nodes += 1;
        }
    }
    Ok(AubinReport {
        eps: p.eps,
        b,
        min_bisectional: kmin,
        worst_margin: worst.0,
        worst_relative: worst.1,
        worst_x: worst.2,
        worst_t: worst.3,
        nodes,
        pass: worst.1 >= -AUBIN_TOL,
    })
}

/// Curvature decay of one time slice.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CurvatureDecay {
    pub t: f64,
    /// `sup |K|` over the fit window.
    pub sup_scalar: f64,
    /// `sup r²|K|` over the fit window.
    pub sup_scaled: f64,
    /// `sup_scaled` is below [`FLAT_TOL`]; no fit is made.
    pub identically_flat: bool,
    /// Scalar curvature and the two Ricci eigenvalues of `ω_φ`.
    pub entries: Vec<DecayEntry>,
    pub pass: bool,
}

pub fn curvature_decay(p: &PotentialPath, j: usize, w: FitWindow) -> Result<CurvatureDecay> {
    let g = *p.grid();
    if j >= g.nt() {
        return Err(Error::InvalidArgument(format!(
            "time row {j} outside 0..{}",
            g.nt()
        )));
    }
    let xs = g.xs();
    let s = Slice::new(&p.bg, &xs, &p.phi.time_slice(j))?;
    let k = s.scalar_curvature();
    let (hx, hxx) = s.log_det_derivs();
    let n = p.bg.n();
    let us = s.us();
    let ric_tan: Vec<f64> = (0..g.nx())
        .map(|i| -hx[i] / (2.0 * us[i]) / s.lam_tan(i))
        .collect();
    let ric_rad: Vec<f64> = (0..g.nx())
        .map(|i| -hxx[i] / (4.0 * us[i]) / s.lam_rad(i))
        .collect();
    let sup = k[w.lo..=w.hi].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scaled = (w.lo..=w.hi).fold(0.0_f64, |m, i| m.max(us[i] * k[i].abs()));
    let flat = scaled <= FLAT_TOL;
    let targets = dimension_targets(n, |m| -2.0 * m - 2.0);
    let entries = if flat {
        Vec::new()
    } else {
        vec![
            DecayEntry::new(
                "scalar_curvature",
                &xs,
                &k,
                Some(w),
                DecayRule::AtMost,
                targets.clone(),
            ),
            DecayEntry::new(
                "ricci_tangential",
                &xs,
                &ric_tan,
                Some(w),
                DecayRule::AtMost,
                targets.clone(),
            ),
            DecayEntry::new(
                "ricci_radial",
                &xs,
                &ric_rad,
                Some(w),
                DecayRule::AtMost,
                targets,
            ),
        ]
    };
    let pass = flat || entries[0].verdict == Verdict::Pass;
    Ok(CurvatureDecay {
        t: g.t(j),
        sup_scalar: sup,
        sup_scaled: scaled,
        identically_flat: flat,
        entries,
        pass,
    })
}
