//! Upper and lower barriers enclosing the regularized geodesic.
//!
//! The upper barrier is the linear interpolation `L = (1−t)φ₀ + tφ₁`, which
//! dominates every path that is convex in `t` with the same endpoints. The
//! lower barrier is `ψ = L − C ρ(x) t(1−t)` for a spatial profile `ρ`; it is
//! accepted once it is a discrete sub-solution of the regularized equation
//! and lies below the side data, and `C` is found by doubling.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{EndpointPotential, RadialBackground};
use crate::grid::{Field2D, Grid2D};
use crate::ma::{central_derivs, NodeState, PotentialPath, SideData};
use crate::registry::{check_keys, Params, Registry};

/// Enclosure tolerance for `ψ ≤ φ ≤ L`.
pub const ENCLOSURE_TOL: f64 = 1e-8;

/// Largest barrier constant tried by [`choose_c`].
pub const MAX_C: f64 = (1u64 << 30) as f64;

/// Spatial profile `ρ(x) > 0` of the lower barrier, with x-derivatives.
pub trait BarrierProfile: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;
    /// `(ρ, ρ_x, ρ_xx)`.
    fn jet(&self, x: f64) -> [f64; 3];
}

/// `ρ = r^{3−4n}`.
#[derive(Debug, Clone, Copy)]
pub struct Decaying {
    pub exponent: f64,
}

impl Decaying {
    pub fn for_dim(n: usize) -> Self {
        Decaying {
            exponent: 3.0 - 4.0 * n as f64,
        }
    }
}

impl BarrierProfile for Decaying {
    fn name(&self) -> &'static str {
        "decaying"
    }
    fn jet(&self, x: f64) -> [f64; 3] {
        let k = self.exponent;
        let r = (k * x).exp();
        [r, k * r, k * k * r]
    }
}

/// `ρ = 1`.
#[derive(Debug, Clone, Copy)]
pub struct Uniform;

impl BarrierProfile for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }
    fn jet(&self, _x: f64) -> [f64; 3] {
        [1.0, 0.0, 0.0]
    }
}

/// Profiles by name. `decaying` needs the complex dimension `n`.
pub fn profile_registry() -> Registry<dyn BarrierProfile> {
    let mut reg: Registry<dyn BarrierProfile> = Registry::new("barrier profile");
    reg.register("decaying", "ρ = r^(3−4n); parameter n", |p: &Params| {
        check_keys("decaying", p, &["n"])?;
        let n = p.get("n").copied().unwrap_or(2.0);
        if n < 2.0 || n.fract() != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "decaying profile needs integer n ≥ 2, got {n}"
            )));
        }
        Ok(Arc::new(Decaying::for_dim(n as usize)) as Arc<dyn BarrierProfile>)
    });
    reg.register("uniform", "ρ = 1", |p: &Params| {
        check_keys("uniform", p, &[])?;
        Ok(Arc::new(Uniform) as Arc<dyn BarrierProfile>)
    });
    reg
}

/// Looks up a profile, supplying the dimension where it is needed.
pub fn build_profile(name: &str, n: usize) -> Result<Arc<dyn BarrierProfile>> {
    let mut params = Params::new();
    if name == "decaying" {
        params.insert("n".into(), n as f64);
    }
    profile_registry().build(name, &params)
}

/// `L(x, t) = (1−t)φ₀ + tφ₁` on the grid.
pub fn upper_bound(grid: &Grid2D, phi0: &EndpointPotential, phi1: &EndpointPotential) -> Field2D {
    let mut f = Field2D::zeros(*grid);
    for i in 0..grid.nx() {
        let u = grid.u(i);
        let (a, b) = (phi0.value(u), phi1.value(u));
        for j in 0..grid.nt() {
            let t = grid.t(j);
            f.set(i, j, (1.0 - t) * a + t * b);
        }
    }
    f
}

/// `ψ = L − C ρ(x) t(1−t)` on the grid.
pub fn lower_barrier(
    grid: &Grid2D,
    phi0: &EndpointPotential,
    phi1: &EndpointPotential,
    profile: &dyn BarrierProfile,
    c: f64,
) -> Field2D {
    let mut f = upper_bound(grid, phi0, phi1);
    for i in 0..grid.nx() {
        let rho = profile.jet(grid.x(i))[0];
        for j in 0..grid.nt() {
            let t = grid.t(j);
            let v = f.at(i, j) - c * rho * t * (1.0 - t);
            f.set(i, j, v);
        }
    }
    f
}

/// Worst normalized sub-solution defect of `ψ`: the minimum over interior
/// nodes of `R_ε(ψ)/det_bg` (central stencils, as in the discrete equation)
/// and over edge nodes of `side − ψ`. Non-negative means `ψ` is an admissible
/// lower barrier for the discrete comparison principle.
#[allow(clippy::too_many_arguments)]
pub fn subsolution_defect(
    bg: &RadialBackground,
    grid: &Grid2D,
    phi0: &EndpointPotential,
    phi1: &EndpointPotential,
    profile: &dyn BarrierProfile,
    c: f64,
    eps: f64,
    side: SideData,
) -> f64 {
    let n = bg.n();
    let psi = lower_barrier(grid, phi0, phi1, profile, c);
    let mut worst = f64::INFINITY;
    for i in 0..grid.nx() {
        let x = grid.x(i);
        let edge = i == 0 || i + 1 == grid.nx();
        for j in 1..grid.nt() - 1 {
            if edge {
                let s = side.value(bg, phi0, phi1, x, grid.t(j), eps);
                worst = worst.min(s - psi.at(i, j));
                continue;
            }
            let st = NodeState::new(bg, x, &central_derivs(&psi, i, j));
            let defect = if st.positive() {
                st.residual(n, eps) / st.det_bg
            } else {
                st.lam_tan.min(st.lam_rad) - 1.0
            };
            worst = worst.min(defect);
        }
    }
    worst
}

/// Smallest `C = 2^k`, `k = 0..30`, whose barrier has non-negative defect.
#[allow(clippy::too_many_arguments)]
pub fn choose_c(
    bg: &RadialBackground,
    grid: &Grid2D,
    phi0: &EndpointPotential,
    phi1: &EndpointPotential,
    profile: &dyn BarrierProfile,
    eps: f64,
    side: SideData,
) -> Result<f64> {
    let mut c = 1.0;
    let mut best = f64::NEG_INFINITY;
    while c <= MAX_C {
        let d = subsolution_defect(bg, grid, phi0, phi1, profile, c, eps, side);
        if d >= 0.0 {
            return Ok(c);
        }
        best = best.max(d);
        c *= 2.0;
    }
    Err(Error::FailsAtMaxC {
        max_c: MAX_C,
        worst: best,
    })
}

/// Outcome of checking `ψ ≤ φ ≤ L` on every node.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BarrierReport {
    pub profile: String,
    #[serde(rename = "C")]
    pub c: f64,
    pub subsolution_defect: f64,
    pub min_lower_margin: f64,
    pub min_upper_margin: f64,
    pub pass: bool,
}

/// Checks the enclosure for a computed path with barrier constant `c`.
pub fn verify_enclosure(
    path: &PotentialPath,
    profile: &dyn BarrierProfile,
    c: f64,
    side: SideData,
) -> BarrierReport {
    let grid = *path.grid();
    let upper = upper_bound(&grid, &path.phi0, &path.phi1);
    let lower = lower_barrier(&grid, &path.phi0, &path.phi1, profile, c);
    let mut lo = f64::INFINITY;
    let mut hi = f64::INFINITY;
    for k in 0..grid.len() {
        let v = path.phi.values()[k];
        lo = lo.min(v - lower.values()[k]);
        hi = hi.min(upper.values()[k] - v);
    }
    let defect = subsolution_defect(
        &path.bg, &grid, &path.phi0, &path.phi1, profile, c, path.eps, side,
    );
    BarrierReport {
        profile: profile.name().into(),
        c,
        subsolution_defect: defect,
        min_lower_margin: lo,
        min_upper_margin: hi,
        pass: lo >= -ENCLOSURE_TOL && hi >= -ENCLOSURE_TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (
        RadialBackground,
        Grid2D,
        EndpointPotential,
        EndpointPotential,
    ) {
        (
            RadialBackground::eguchi_hanson(1.0).unwrap(),
            Grid2D::new(-1.0, 2.0, 31, 11).unwrap(),
            EndpointPotential::zero(),
            EndpointPotential::inverse(0.05),
        )
    }

    #[test]
    fn uniform_barrier_found_and_monotone() {
        let (bg, g, a, b) = setup();
        for eps in [1.0, 0.1, 1e-3] {
            let c = choose_c(&bg, &g, &a, &b, &Uniform, eps, SideData::Parabolic).unwrap();
            for k in 0..4 {
                let cc = c * 2f64.powi(k);
                assert!(
                    subsolution_defect(&bg, &g, &a, &b, &Uniform, cc, eps, SideData::Parabolic)
                        >= 0.0
                );
            }
        }
    }

    #[test]
    fn decaying_barrier_fails_on_long_annulus() {
        let (bg, _, a, b) = setup();
        let g = Grid2D::new(-1.0, 4.0, 51, 11).unwrap();
        let d = Decaying::for_dim(2);
        assert!(matches!(
            choose_c(&bg, &g, &a, &b, &d, 0.1, SideData::Parabolic),
            Err(Error::FailsAtMaxC { .. })
        ));
    }

    #[test]
    fn barriers_ordered() {
        let (_, g, a, b) = setup();
        let up = upper_bound(&g, &a, &b);
        let lo = lower_barrier(&g, &a, &b, &Decaying::for_dim(2), 3.0);
        for k in 0..g.len() {
            assert!(lo.values()[k] <= up.values()[k]);
        }
    }

    #[test]
    fn registry_builds_profiles() {
        assert_eq!(
            build_profile("decaying", 3).unwrap().jet(1.0)[0],
            (-9.0f64).exp()
        );
        assert_eq!(build_profile("uniform", 2).unwrap().name(), "uniform");
        assert!(build_profile("steep", 2).is_err());
    }
}
