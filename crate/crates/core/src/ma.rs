//! The regularized geodesic Monge–Ampère operator under `U(n) × S¹` symmetry.
//!
//! With `x = log r`, `u = e^{2x}` and `P = u Φ_u` the moment profile of the
//! total potential `Φ = F + φ`, the slice eigenvalues are
//! `λ_tan = P/u`, `λ_rad = P_x / (2u)`, and the squared gradient of `φ_t` is
//! `u (∂_u φ_t)² / λ_rad` with `u (∂_u φ_t)² = φ_tx² / (4u)`.
//! All u-derivatives are converted to x-derivatives here, not by callers.

use crate::error::{Error, Result};
use crate::geometry::{EndpointPotential, RadialBackground, RadialFunction};
use crate::grid::{d2_dt2, d2_dx2, d2_dxdt, d_dx, Field2D, Grid2D};
use crate::linalg::SparseLinearMap;

/// A path of potentials `φ(x, t)` with fixed endpoints and regularization `ε`.
#[derive(Clone, Debug)]
pub struct PotentialPath {
    pub phi: Field2D,
    pub phi0: EndpointPotential,
    pub phi1: EndpointPotential,
    pub eps: f64,
    pub bg: RadialBackground,
}

impl PotentialPath {
    /// Wraps `phi`, overwriting the `t = 0` and `t = 1` rows with endpoint data.
    pub fn new(
        bg: RadialBackground,
        mut phi: Field2D,
        phi0: EndpointPotential,
        phi1: EndpointPotential,
        eps: f64,
    ) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ε must be non-negative, got {eps}"
            )));
        }
        let g = *phi.grid();
        for i in 0..g.nx() {
            let u = g.u(i);
            phi.set(i, 0, phi0.value(u));
            phi.set(i, g.nt() - 1, phi1.value(u));
        }
        Ok(PotentialPath {
            phi,
            phi0,
            phi1,
            eps,
            bg,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        self.phi.grid()
    }

    /// Whether the endpoint rows hold exactly the endpoint data.
    pub fn endpoints_exact(&self) -> bool {
        let g = self.grid();
        (0..g.nx()).all(|i| {
            let u = g.u(i);
            self.phi.at(i, 0) == self.phi0.value(u)
                && self.phi.at(i, g.nt() - 1) == self.phi1.value(u)
        })
    }

    /// Sets the spatial edge columns to the given side data.
    pub fn apply_side_data(&mut self, side: SideData) {
        let g = *self.grid();
        for i in [0, g.nx() - 1] {
            for j in 1..g.nt() - 1 {
                let v = side.value(&self.bg, &self.phi0, &self.phi1, g.x(i), g.t(j), self.eps);
                self.phi.set(i, j, v);
            }
        }
    }

    /// Copy with the time axis reversed and endpoints swapped.
    pub fn reversed(&self) -> PotentialPath {
        let g = *self.grid();
        let nt = g.nt();
        let phi = Field2D::from_fn(g, |_, _| 0.0);
        let mut phi = phi;
        for i in 0..g.nx() {
            for j in 0..nt {
                phi.set(i, j, self.phi.at(i, nt - 1 - j));
            }
        }
        PotentialPath {
            phi,
            phi0: self.phi1.clone(),
            phi1: self.phi0.clone(),
            eps: self.eps,
            bg: self.bg.clone(),
        }
    }
}

/// Dirichlet data on the spatial edges `x = x_min, x_max`: the parabola
/// `(1−t)φ₀ + tφ₁ + c t(t−1)/2` with an acceleration `c` per column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideData {
    /// `c = 0`.
    Linear,
    /// `c = ε`, which is exact for equal endpoints on the flat model.
    Parabolic,
    /// `c` solves the regularized equation at `t = ½` for the spatial
    /// derivatives of the linear interpolation,
    /// `c = (ε det_bg / λ_tan^{n−1} + (∂_xφ₁ − ∂_xφ₀)²/(4u)) / λ_rad`.
    #[default]
    Compatible,
}

impl SideData {
    /// The acceleration `c` at column `x`.
    pub fn acceleration(
        self,
        bg: &RadialBackground,
        phi0: &EndpointPotential,
        phi1: &EndpointPotential,
        x: f64,
        eps: f64,
    ) -> f64 {
        match self {
            SideData::Linear => 0.0,
            SideData::Parabolic => eps,
            SideData::Compatible => {
                let u = (2.0 * x).exp();
                let xd = |f: &EndpointPotential| {
                    let [_, fu, fuu] = f.d2(u);
                    (2.0 * u * fu, 4.0 * u * fu + 4.0 * u * u * fuu)
                };
                let ((a_x, a_xx), (b_x, b_xx)) = (xd(phi0), xd(phi1));
                let d = NodeDerivs {
                    x: 0.5 * (a_x + b_x),
                    xx: 0.5 * (a_xx + b_xx),
                    tt: 0.0,
                    tx: b_x - a_x,
                };
                let s = NodeState::new(bg, x, &d);
                if !s.positive() {
                    return eps;
                }
                (eps * s.det_bg / s.lam_tan.powi(bg.n() as i32 - 1) + s.grad_sq) / s.lam_rad
            }
        }
    }

    /// Edge value at `(x, t)`.
    pub fn value(
        self,
        bg: &RadialBackground,
        phi0: &EndpointPotential,
        phi1: &EndpointPotential,
        x: f64,
        t: f64,
        eps: f64,
    ) -> f64 {
        let u = (2.0 * x).exp();
        let c = self.acceleration(bg, phi0, phi1, x, eps);
        (1.0 - t) * phi0.value(u) + t * phi1.value(u) + c * t * (t - 1.0) / 2.0
    }

    /// Acceleration far out, where the background is flat and the endpoints
    /// have decayed: `ε` unless the data is linear.
    pub fn flat_acceleration(self, eps: f64) -> f64 {
        match self {
            SideData::Linear => 0.0,
            SideData::Parabolic | SideData::Compatible => eps,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SideData::Linear => "linear",
            SideData::Parabolic => "parabolic",
            SideData::Compatible => "compatible",
        }
    }
}

impl std::str::FromStr for SideData {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(SideData::Linear),
            "parabolic" => Ok(SideData::Parabolic),
            "compatible" => Ok(SideData::Compatible),
            other => Err(Error::UnknownStrategy {
                kind: "side data",
                name: other.into(),
                available: "compatible, linear, parabolic".into(),
            }),
        }
    }
}

/// Unknown numbering over interior nodes, `t` fastest.
#[derive(Clone, Copy, Debug)]
pub struct InteriorIndex {
    nx: usize,
    nt: usize,
}

impl InteriorIndex {
    pub fn new(g: &Grid2D) -> Self {
        InteriorIndex {
            nx: g.nx(),
            nt: g.nt(),
        }
    }
    pub fn len(&self) -> usize {
        (self.nx - 2) * (self.nt - 2)
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Index of interior node `(i, j)`, or `None` on the boundary.
    #[inline]
    pub fn of(&self, i: usize, j: usize) -> Option<usize> {
        if i == 0 || j == 0 || i + 1 >= self.nx || j + 1 >= self.nt {
            None
        } else {
            Some((i - 1) * (self.nt - 2) + (j - 1))
        }
    }
    pub fn gather(&self, f: &Field2D) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for i in 1..self.nx - 1 {
            for j in 1..self.nt - 1 {
                out.push(f.at(i, j));
            }
        }
        out
    }
    pub fn scatter(&self, v: &[f64], f: &mut Field2D) {
        let mut k = 0;
        for i in 1..self.nx - 1 {
            for j in 1..self.nt - 1 {
                f.set(i, j, v[k]);
                k += 1;
            }
        }
    }
}

/// Derivatives of `φ` at one node in `(x, t)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct NodeDerivs {
    pub x: f64,
    pub xx: f64,
    pub tt: f64,
    pub tx: f64,
}

/// Central stencils at interior node `(i, j)`.
pub fn central_derivs(f: &Field2D, i: usize, j: usize) -> NodeDerivs {
    let g = f.grid();
    let (h, k) = (g.hx(), g.ht());
    NodeDerivs {
        x: (f.at(i + 1, j) - f.at(i - 1, j)) / (2.0 * h),
        xx: (f.at(i + 1, j) - 2.0 * f.at(i, j) + f.at(i - 1, j)) / (h * h),
        // written so that t → 1 − t maps tt to itself and tx to −tx bitwise
        tt: (f.at(i, j + 1) + f.at(i, j - 1) - 2.0 * f.at(i, j)) / (k * k),
        tx: ((f.at(i + 1, j + 1) - f.at(i - 1, j + 1)) - (f.at(i + 1, j - 1) - f.at(i - 1, j - 1)))
            / (4.0 * h * k),
    }
}

/// Pointwise quantities of the radial reduction.
#[derive(Clone, Copy, Debug)]
pub struct NodeState {
    pub u: f64,
    pub lam_tan: f64,
    pub lam_rad: f64,
    /// `u (∂_u φ_t)²`.
    pub grad_sq: f64,
    pub phi_tt: f64,
    pub det_bg: f64,
}

impl NodeState {
    pub fn new(bg: &RadialBackground, x: f64, d: &NodeDerivs) -> Self {
        let u = (2.0 * x).exp();
        let [p, px, _] = bg.moment(x);
        NodeState {
            u,
            lam_tan: (p + 0.5 * d.x) / u,
            lam_rad: (px + 0.5 * d.xx) / (2.0 * u),
            grad_sq: d.tx * d.tx / (4.0 * u),
            phi_tt: d.tt,
            det_bg: bg.det(u),
        }
    }

    pub fn positive(&self) -> bool {
        self.lam_tan > 0.0 && self.lam_rad > 0.0
    }

    /// `ω_φⁿ / ωⁿ`.
    pub fn volume_ratio(&self, n: usize) -> f64 {
        self.lam_tan.powi(n as i32 - 1) * self.lam_rad / self.det_bg
    }

    /// `𝒢 = φ_tt − u (∂_u φ_t)² / λ_rad`.
    pub fn geodesic(&self) -> f64 {
        self.phi_tt - self.grad_sq / self.lam_rad
    }

    /// `λ_tan^{n−1}(λ_rad φ_tt − u(∂_uφ_t)²) − ε det_bg`.
    pub fn residual(&self, n: usize, eps: f64) -> f64 {
        self.lam_tan.powi(n as i32 - 1) * (self.lam_rad * self.phi_tt - self.grad_sq)
            - eps * self.det_bg
    }
}

fn positivity_error(g: &Grid2D, i: usize, j: usize, s: &NodeState) -> Error {
    Error::positivity(
        format!("node ({i}, {j}), x = {:.6}, t = {:.6}", g.x(i), g.t(j)),
        format!("λ_tan = {:e}, λ_rad = {:e}", s.lam_tan, s.lam_rad),
    )
}

/// Per-node states on the whole grid, using one-sided stencils on the edges.
pub fn node_states(p: &PotentialPath) -> Vec<NodeState> {
    let g = *p.grid();
    let fx = d_dx(&p.phi);
    let fxx = d2_dx2(&p.phi);
    let ftt = d2_dt2(&p.phi);
    let ftx = d2_dxdt(&p.phi);
    let mut out = Vec::with_capacity(g.len());
    for i in 0..g.nx() {
        for j in 0..g.nt() {
            let d = NodeDerivs {
                x: fx.at(i, j),
                xx: fxx.at(i, j),
                tt: ftt.at(i, j),
                tx: ftx.at(i, j),
            };
            out.push(NodeState::new(&p.bg, g.x(i), &d));
        }
    }
    out
}

/// `𝒢(φ)` on the grid. Interior nodes use central stencils and must have
/// positive eigenvalues; edge values use one-sided stencils and are unchecked.
pub fn geodesic_operator(p: &PotentialPath) -> Result<Field2D> {
    let g = *p.grid();
    let states = node_states(p);
    let idx = InteriorIndex::new(&g);
    let mut out = Field2D::zeros(g);
    for i in 0..g.nx() {
        for j in 0..g.nt() {
            let s = &states[g.idx(i, j)];
            if idx.of(i, j).is_some() && !s.positive() {
                return Err(positivity_error(&g, i, j, s));
            }
            out.set(i, j, s.geodesic());
        }
    }
    Ok(out)
}

/// `R_ε(φ)` at interior nodes (zero on the boundary).
pub fn ma_residual(p: &PotentialPath) -> Result<Field2D> {
    let g = *p.grid();
    let n = p.bg.n();
    let mut out = Field2D::zeros(g);
    for i in 1..g.nx() - 1 {
        let x = g.x(i);
        for j in 1..g.nt() - 1 {
            let s = NodeState::new(&p.bg, x, &central_derivs(&p.phi, i, j));
            if !s.positive() {
                return Err(positivity_error(&g, i, j, &s));
            }
            out.set(i, j, s.residual(n, p.eps));
        }
    }
    Ok(out)
}

/// Exact derivative of [`ma_residual`] with respect to the interior values.
pub fn ma_jacobian(p: &PotentialPath) -> Result<SparseLinearMap> {
    let g = *p.grid();
    let n = p.bg.n();
    let m = (n - 1) as i32;
    let idx = InteriorIndex::new(&g);
    let (h, k) = (g.hx(), g.ht());
    let mut jac = SparseLinearMap::new(idx.len());
    for i in 1..g.nx() - 1 {
        let x = g.x(i);
        for j in 1..g.nt() - 1 {
            let d = central_derivs(&p.phi, i, j);
            let s = NodeState::new(&p.bg, x, &d);
            if !s.positive() {
                return Err(positivity_error(&g, i, j, &s));
            }
            let row = idx.of(i, j).expect("interior node");
            let lt_m1 = if m >= 1 { s.lam_tan.powi(m - 1) } else { 0.0 };
            let lt_m = s.lam_tan.powi(m);
            let inner = s.lam_rad * s.phi_tt - s.grad_sq;
            // ∂R/∂φ_x, ∂R/∂φ_xx, ∂R/∂φ_tt, ∂R/∂φ_tx
            let c_x = m as f64 * lt_m1 * inner / s.u * 0.5;
            let c_xx = lt_m * s.phi_tt / (2.0 * s.u) * 0.5;
            let c_tt = lt_m * s.lam_rad;
            let c_tx = -lt_m * d.tx / (2.0 * s.u);
            let mut put = |ii: usize, jj: usize, v: f64| {
                if let Some(col) = idx.of(ii, jj) {
                    jac.add(row, col, v);
                }
            };
            put(i + 1, j, c_x / (2.0 * h) + c_xx / (h * h));
            put(i - 1, j, -c_x / (2.0 * h) + c_xx / (h * h));
            put(i, j, -2.0 * c_xx / (h * h) - 2.0 * c_tt / (k * k));
            put(i, j + 1, c_tt / (k * k));
            put(i, j - 1, c_tt / (k * k));
            let q = c_tx / (4.0 * h * k);
            put(i + 1, j + 1, q);
            put(i - 1, j - 1, q);
            put(i + 1, j - 1, -q);
            put(i - 1, j + 1, -q);
        }
    }
    Ok(jac)
}

/// `min(λ_tan, λ_rad, 𝒢)` over interior nodes; negative means the
/// linearization has lost ellipticity.
pub fn ellipticity_margin(p: &PotentialPath) -> f64 {
    let g = *p.grid();
    let mut m = f64::INFINITY;
    for i in 1..g.nx() - 1 {
        let x = g.x(i);
        for j in 1..g.nt() - 1 {
            let s = NodeState::new(&p.bg, x, &central_derivs(&p.phi, i, j));
            let local = if s.positive() {
                s.lam_tan.min(s.lam_rad).min(s.geodesic())
            } else {
                s.lam_tan.min(s.lam_rad)
            };
            m = m.min(local);
        }
    }
    m
}

/// `𝒢` from u-derivatives at a single point: `φ_tt − u φ_tu² / λ_rad`.
pub fn geodesic_at(
    bg: &RadialBackground,
    phi: &dyn RadialFunction,
    u: f64,
    phi_tt: f64,
    phi_tu: f64,
) -> Result<f64> {
    let e = crate::geometry::metric_eigenvalues(bg, phi, u)?;
    Ok(phi_tt - u * phi_tu * phi_tu / e.rad)
}
