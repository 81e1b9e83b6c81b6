//! Damped Newton iteration for the regularized equation, continuation in
//! `ε`, and solves on nested annuli.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{EndpointPotential, RadialBackground};
use crate::grid::{d2_dt2, d_dt, diff1, diff2, Field2D, Grid2D};
use crate::linalg::{solver_registry, LinearSolver};
use crate::ma::{
    central_derivs, ellipticity_margin, ma_jacobian, ma_residual, InteriorIndex, NodeState,
    PotentialPath, SideData,
};

/// Relative backward-error target for each Newton linear solve.
pub const LINEAR_TOL: f64 = 1e-12;

/// Halvings allowed in one backtracking line search.
pub const MAX_HALVINGS: usize = 30;

/// `1, 10^{−1/2}, …, 10^{−4}`.
pub fn default_schedule() -> Vec<f64> {
    (0..=8).map(|k| 10f64.powf(-(k as f64) / 2.0)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Target for the residual sup-norm, scaled by `max(1, ε sup det_bg)`.
    pub tol_newton: f64,
    pub max_newton_iters: usize,
    /// Extra residual-lowering steps after convergence.
    pub polish_iters: usize,
    /// Backtracking factor in `(0, 1)`.
    pub damping: f64,
    /// Accepted steps keep the ellipticity margin above this fraction of its
    /// previous value.
    pub safeguard_fraction: f64,
    pub eps_schedule: Vec<f64>,
    pub exhaustion_ts: Vec<f64>,
    pub side_data: SideData,
    pub linear_solver: String,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol_newton: 1e-10,
            max_newton_iters: 50,
            polish_iters: 2,
            damping: 0.5,
            safeguard_fraction: 0.1,
            eps_schedule: default_schedule(),
            exhaustion_ts: Vec::new(),
            side_data: SideData::Compatible,
            linear_solver: "banded-lu".into(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.tol_newton > 0.0) {
            return bad(format!(
                "tol_newton must be positive, got {}",
                self.tol_newton
            ));
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters must be positive".into());
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return bad(format!("damping must lie in (0, 1), got {}", self.damping));
        }
        if !(self.safeguard_fraction >= 0.0 && self.safeguard_fraction < 1.0) {
            return bad(format!(
                "safeguard_fraction must lie in [0, 1), got {}",
                self.safeguard_fraction
            ));
        }
        if self.eps_schedule.is_empty() {
            return bad("eps_schedule is empty".into());
        }
        if self
            .eps_schedule
            .iter()
            .any(|e| !(*e > 0.0 && e.is_finite()))
        {
            return bad("eps_schedule entries must be positive".into());
        }
        if self.eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return bad("eps_schedule must be strictly decreasing".into());
        }
        if self.exhaustion_ts.windows(2).any(|w| w[1] <= w[0]) {
            return bad("exhaustion_ts must be strictly increasing".into());
        }
        solver_registry().build(&self.linear_solver, &Default::default())?;
        Ok(())
    }

    pub fn linear_solver(&self) -> Result<std::sync::Arc<dyn LinearSolver>> {
        solver_registry().build(&self.linear_solver, &Default::default())
    }
}

/// Converged path with solver diagnostics.
#[derive(Clone, Debug)]
pub struct GeodesicSolution {
    pub path: PotentialPath,
    pub side_data: SideData,
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub final_margin: f64,
    /// Newton steps needed to reach the residual target.
    pub iterations: usize,
    /// Extra steps taken after the target was met.
    pub polish_steps: usize,
    pub wall_time: f64,
}

impl GeodesicSolution {
    pub fn eps(&self) -> f64 {
        self.path.eps
    }
}

/// Residual target `tol · max(1, ε sup det_bg)` on the grid.
pub fn residual_target(p: &PotentialPath, tol: f64) -> f64 {
    let g = p.grid();
    let sup_det = (0..g.nx()).map(|i| p.bg.det(g.u(i))).fold(0.0, f64::max);
    tol * (p.eps * sup_det).max(1.0)
}

fn interior_sup(f: &Field2D) -> f64 {
    let g = f.grid();
    let mut m = 0.0_f64;
    for i in 1..g.nx() - 1 {
        for j in 1..g.nt() - 1 {
            m = m.max(f.at(i, j).abs());
        }
    }
    m
}

/// Convexification coefficient of the side data, the smaller of the two
/// edges: an edge column carries `(1−t)φ₀ + tφ₁ − c_edge t(1−t)`.
fn edge_coefficient(
    bg: &RadialBackground,
    grid: &Grid2D,
    phi0: &EndpointPotential,
    phi1: &EndpointPotential,
    side: SideData,
    eps: f64,
) -> f64 {
    let a = side.acceleration(bg, phi0, phi1, grid.x_min(), eps);
    let b = side.acceleration(bg, phi0, phi1, grid.x_max(), eps);
    0.5 * a.min(b)
}

/// `(1−t)φ₀ + tφ₁ − c t(1−t)`, written so that swapping equal endpoints and
/// reversing time gives bit-identical values.
fn convexified(
    grid: &Grid2D,
    phi0: &EndpointPotential,
    phi1: &EndpointPotential,
    c: impl Fn(usize) -> f64,
) -> Field2D {
    let nt = grid.nt();
    let mut f = Field2D::zeros(*grid);
    for i in 0..grid.nx() {
        let u = grid.u(i);
        let c = c(i);
        let (a, b) = (phi0.value(u), phi1.value(u));
        for j in 0..nt {
            let (t, s) = (grid.t(j), grid.t(nt - 1 - j));
            f.set(i, j, s * a + t * b - c * (t * s));
        }
    }
    f
}

/// Smallest `𝒢` over interior nodes, or `Err` with a description when a
/// metric eigenvalue is not positive.
fn min_geodesic(p: &PotentialPath) -> std::result::Result<f64, String> {
    let g = *p.grid();
    let mut worst = f64::INFINITY;
    for i in 1..g.nx() - 1 {
        for j in 1..g.nt() - 1 {
            let s = NodeState::new(&p.bg, g.x(i), &central_derivs(&p.phi, i, j));
            if !s.positive() {
                return Err(format!(
                    "metric eigenvalues not positive at x = {:.6}, t = {:.6} (λ_tan = {:e}, λ_rad = {:e})",
                    g.x(i),
                    g.t(j),
                    s.lam_tan,
                    s.lam_rad
                ));
            }
            worst = worst.min(s.geodesic());
        }
    }
    Ok(worst)
}

/// Convexified interpolation `(1−t)φ₀ + tφ₁ − c₀ t(1−t)` with the side data
/// on the spatial edges.
///
/// The first candidate takes `c₀(x)` as half the compatible edge
/// acceleration of every column, which is smooth in `x` and meets
/// compatible side data without a jump. The remaining candidates are
/// constants: the side-data coefficient times `2^k`, or `2^k` with `k ≥ −20`
/// when that coefficient is zero. The search stops at the first candidate
/// with `𝒢 ≥ 2ε` (`𝒢 > 0` when `ε = 0`) at every interior node, and
/// otherwise returns the admissible candidate with the largest `min 𝒢` once
/// larger constants stop helping. Larger constants can hurt because the
/// jump to the fixed edge data steepens `φ_t` across the first interior
/// column.
pub fn initial_guess(
    bg: &RadialBackground,
    grid: &Grid2D,
    phi0: &EndpointPotential,
    phi1: &EndpointPotential,
    eps: f64,
    side: SideData,
) -> Result<PotentialPath> {
    let goal = 2.0 * eps;
    let mut best: Option<(f64, PotentialPath)> = None;
    let mut first_error = None;
    let candidate = |c: &dyn Fn(usize) -> f64| -> Result<PotentialPath> {
        let mut p = PotentialPath::new(
            bg.clone(),
            convexified(grid, phi0, phi1, c),
            phi0.clone(),
            phi1.clone(),
            eps,
        )?;
        p.apply_side_data(side);
        Ok(p)
    };
    let local = |i: usize| 0.5 * SideData::Compatible.acceleration(bg, phi0, phi1, grid.x(i), eps);
    let p = candidate(&local)?;
    match min_geodesic(&p) {
        Ok(m) if (eps > 0.0 && m >= goal) || (eps == 0.0 && m > 0.0) => return Ok(p),
        Ok(m) => best = Some((m, p)),
        Err(e) => first_error = Some(e),
    }
    let c_edge = edge_coefficient(bg, grid, phi0, phi1, side, eps);
    let mut c = if c_edge > 0.0 { c_edge } else { 2f64.powi(-20) };
    let mut improved = false;
    for _ in 0..80 {
        let p = candidate(&|_| c)?;
        match min_geodesic(&p) {
            Ok(m) => {
                let done = if eps > 0.0 { m >= goal } else { m > 0.0 };
                if done {
                    return Ok(p);
                }
                match &best {
                    Some((bm, _)) if m <= *bm => {
                        if improved {
                            break;
                        }
                    }
                    _ => {
                        best = Some((m, p));
                        improved = true;
                    }
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
                if improved {
                    break;
                }
            }
        }
        c *= 2.0;
    }
    match best {
        Some((m, p)) if m > 0.0 => Ok(p),
        Some((m, _)) => Err(Error::InitFailure(format!(
            "no convexification gives 𝒢 > 0 (best {m:e})"
        ))),
        None => Err(Error::InitFailure(
            first_error.unwrap_or_else(|| "no admissible candidate".into()),
        )),
    }
}

/// One damped Newton step: the largest `damping^k`, `k ≤ 30`, whose trial
/// point keeps the margin safeguard and lowers the residual sup-norm.
fn newton_step(
    p: &PotentialPath,
    r: &Field2D,
    rnorm: f64,
    margin: f64,
    solver: &dyn LinearSolver,
    cfg: &SolveConfig,
) -> Result<Option<(PotentialPath, Field2D, f64, f64)>> {
    let idx = InteriorIndex::new(p.grid());
    let jac = ma_jacobian(p)?;
    let rhs: Vec<f64> = idx.gather(r).into_iter().map(|v| -v).collect();
    let delta = solver.solve(&jac, &rhs, LINEAR_TOL)?;
    let base = idx.gather(&p.phi);
    let mut step = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let mut trial = p.clone();
        let v: Vec<f64> = base.iter().zip(&delta).map(|(b, d)| b + step * d).collect();
        idx.scatter(&v, &mut trial.phi);
        let m = ellipticity_margin(&trial);
        if m > 0.0 && m >= cfg.safeguard_fraction * margin {
            if let Ok(rt) = ma_residual(&trial) {
                let n = interior_sup(&rt);
                if n < rnorm {
                    return Ok(Some((trial, rt, n, m)));
                }
            }
        }
        step *= cfg.damping;
    }
    Ok(None)
}

/// Damped Newton iteration from `p0`; boundary rows and edge columns are
/// never modified. After the residual target is met, up to
/// `cfg.polish_iters` further steps are taken while they still lower the
/// residual, so that the residual relative to `ε` keeps shrinking at small `ε`.
pub fn newton_solve(
    p0: PotentialPath,
    side: SideData,
    cfg: &SolveConfig,
) -> Result<GeodesicSolution> {
    let start = Instant::now();
    let solver = cfg.linear_solver()?;
    let mut p = p0;
    let target = residual_target(&p, cfg.tol_newton);
    let mut margin = ellipticity_margin(&p);
    let mut r = ma_residual(&p)?;
    let mut rnorm = interior_sup(&r);
    if !(margin > 0.0) {
        return Err(Error::MarginCollapse {
            iter: 0,
            margin,
            residual: rnorm,
        });
    }
    let mut history = vec![rnorm];
    let mut iters = 0;
    while rnorm > target {
        if iters == cfg.max_newton_iters {
            return Err(Error::MaxIters {
                iters,
                residual: rnorm,
            });
        }
        match newton_step(&p, &r, rnorm, margin, solver.as_ref(), cfg)? {
            Some((trial, rt, n, m)) => {
                p = trial;
                r = rt;
                rnorm = n;
                margin = m;
            }
            None => {
                return Err(Error::MarginCollapse {
                    iter: iters + 1,
                    margin,
                    residual: rnorm,
                })
            }
        }
        iters += 1;
        history.push(rnorm);
    }
    let mut polish = 0;
    while polish < cfg.polish_iters && rnorm > 0.0 {
        match newton_step(&p, &r, rnorm, margin, solver.as_ref(), cfg) {
            Ok(Some((trial, rt, n, m))) => {
                p = trial;
                r = rt;
                rnorm = n;
                margin = m;
                polish += 1;
                history.push(rnorm);
            }
            _ => break,
        }
    }
    Ok(GeodesicSolution {
        path: p,
        side_data: side,
        residual_history: history,
        final_residual: rnorm,
        final_margin: margin,
        iterations: iters,
        polish_steps: polish,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// `Δ_ω f` of the background metric, slice by slice.
pub fn background_laplacian(bg: &RadialBackground, f: &Field2D) -> Field2D {
    let g = *f.grid();
    let n = bg.n() as f64;
    let mut out = Field2D::zeros(g);
    for j in 0..g.nt() {
        let s = f.time_slice(j);
        let fx = diff1(&s, g.hx());
        let fxx = diff2(&s, g.hx());
        for i in 0..g.nx() {
            let [p, px, _] = bg.moment(g.x(i));
            out.set(i, j, (n - 1.0) * fx[i] / (2.0 * p) + fxx[i] / (2.0 * px));
        }
    }
    out
}

/// Size statistics of one converged solution.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EpsStats {
    pub eps: f64,
    pub iterations: usize,
    pub residual: f64,
    pub margin: f64,
    /// `sup |Δ_ω φ|` over columns away from the spatial edges.
    pub sup_laplacian: f64,
    pub sup_phi: f64,
    pub sup_phi_t: f64,
    pub sup_phi_tt: f64,
    /// `sup |φ_ε − φ_{previous ε}|`; absent for the first level.
    pub cauchy_step: Option<f64>,
}

pub fn eps_stats(sol: &GeodesicSolution, previous: Option<&GeodesicSolution>) -> EpsStats {
    let phi = &sol.path.phi;
    let g = *phi.grid();
    let lap = background_laplacian(&sol.path.bg, phi);
    let mut sup_lap = 0.0_f64;
    for i in 1..g.nx() - 1 {
        for j in 0..g.nt() {
            sup_lap = sup_lap.max(lap.at(i, j).abs());
        }
    }
    let cauchy = previous.and_then(|q| {
        phi.zip_with(&q.path.phi, |a, b| a - b)
            .ok()
            .map(|d| d.sup_abs())
    });
    EpsStats {
        eps: sol.eps(),
        iterations: sol.iterations,
        residual: sol.final_residual,
        margin: sol.final_margin,
        sup_laplacian: sup_lap,
        sup_phi: phi.sup_abs(),
        sup_phi_t: d_dt(phi).sup_abs(),
        sup_phi_tt: d2_dt2(phi).sup_abs(),
        cauchy_step: cauchy,
    }
}

/// `L + (ε/ε_prev)(φ_prev − L)` with `L` the linear interpolation. The
/// spatial eigenvalues are convex combinations of those of `L` and `φ_prev`,
/// and the parabolic side data is matched exactly.
pub fn warm_start(prev: &GeodesicSolution, eps: f64, side: SideData) -> PotentialPath {
    let mut p = prev.path.clone();
    let r = if prev.eps() > 0.0 {
        eps / prev.eps()
    } else {
        1.0
    };
    let lin = crate::barriers::upper_bound(p.grid(), &p.phi0, &p.phi1);
    for (v, l) in p.phi.values_mut().iter_mut().zip(lin.values()) {
        *v = l + r * (*v - l);
    }
    p.eps = eps;
    let exact = PotentialPath::new(p.bg.clone(), p.phi, p.phi0, p.phi1, eps).expect("ε validated");
    let mut p = exact;
    p.apply_side_data(side);
    p
}

/// Nested step refinements allowed between two schedule levels.
pub const MAX_REFINEMENTS: usize = 6;

/// Solves at `eps` warm-started from `prev`. When the warm start is not
/// admissible or Newton fails, the level `√(ε_prev ε)` is solved first.
pub fn continue_to(
    prev: &GeodesicSolution,
    eps: f64,
    cfg: &SolveConfig,
    depth: usize,
) -> Result<GeodesicSolution> {
    let p = warm_start(prev, eps, cfg.side_data);
    let attempt = if ellipticity_margin(&p) > 0.0 {
        newton_solve(p, cfg.side_data, cfg)
    } else {
        Err(Error::MarginCollapse {
            iter: 0,
            margin: ellipticity_margin(&p),
            residual: f64::NAN,
        })
    };
    match attempt {
        Ok(sol) => Ok(sol),
        Err(e) if depth == 0 => Err(e),
        Err(Error::MarginCollapse { .. })
        | Err(Error::MaxIters { .. })
        | Err(Error::PositivityViolation { .. }) => {
            let mid = (prev.eps() * eps).sqrt();
            let between = continue_to(prev, mid, cfg, depth - 1)?;
            let mut sol = continue_to(&between, eps, cfg, depth - 1)?;
            sol.iterations += between.iterations;
            Ok(sol)
        }
        Err(e) => Err(e),
    }
}

/// Solutions along the `ε` schedule; stops at the first failure.
#[derive(Debug)]
pub struct ContinuationRun {
    pub solutions: Vec<GeodesicSolution>,
    pub stats: Vec<EpsStats>,
    pub failure: Option<(f64, Error)>,
}

impl ContinuationRun {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Warm-started Newton solves along `schedule`.
pub fn continuation_solve(
    bg: &RadialBackground,
    grid: &Grid2D,
    phi0: &EndpointPotential,
    phi1: &EndpointPotential,
    schedule: &[f64],
    cfg: &SolveConfig,
) -> ContinuationRun {
    let mut run = ContinuationRun {
        solutions: Vec::new(),
        stats: Vec::new(),
        failure: None,
    };
    for &eps in schedule {
        let solved = match run.solutions.last() {
            None => initial_guess(bg, grid, phi0, phi1, eps, cfg.side_data)
                .and_then(|p| newton_solve(p, cfg.side_data, cfg)),
            Some(prev) => continue_to(prev, eps, cfg, MAX_REFINEMENTS),
        };
        match solved {
            Ok(sol) => {
                run.stats.push(eps_stats(&sol, run.solutions.last()));
                run.solutions.push(sol);
            }
            Err(e) => {
                run.failure = Some((eps, e));
                break;
            }
        }
    }
    run
}

/// The schedule entries above `eps`, followed by `eps` itself.
pub fn schedule_down_to(schedule: &[f64], eps: f64) -> Vec<f64> {
    let mut s: Vec<f64> = schedule
        .iter()
        .copied()
        .filter(|e| *e > eps * (1.0 + 1e-12))
        .collect();
    s.push(eps);
    s
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExhaustionLevel {
    pub x_max: f64,
    pub nx: usize,
    pub sup_phi: f64,
    pub iterations: usize,
    pub residual: f64,
    /// `sup_t |(1−t)φ₀ + tφ₁|` at `x = x_max`: the size of the data imposed
    /// at the artificial edge.
    pub edge_data: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExhaustionDrift {
    pub from_x_max: f64,
    pub to_x_max: f64,
    /// `sup |φ_T − φ_T'|` on the nodes shared by both grids.
    pub drift: f64,
    /// Edge data size at the smaller domain.
    pub predicted: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExhaustionReport {
    pub eps: f64,
    pub levels: Vec<ExhaustionLevel>,
    pub drifts: Vec<ExhaustionDrift>,
    /// Whether drifts decrease as the domain grows.
    pub drift_monotone: bool,
    /// Whether `sup |φ|` per domain is non-decreasing.
    pub sup_phi_monotone: bool,
}

/// Solves at level `eps` on grids with the spacing of `grid` and
/// `x_max ∈ ts`, then compares consecutive solutions on shared nodes.
pub fn exhaustion_study(
    bg: &RadialBackground,
    grid: &Grid2D,
    phi0: &EndpointPotential,
    phi1: &EndpointPotential,
    eps: f64,
    ts: &[f64],
    cfg: &SolveConfig,
) -> Result<ExhaustionReport> {
    if ts.is_empty() || ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "exhaustion x_max values must be increasing".into(),
        ));
    }
    let schedule = schedule_down_to(&cfg.eps_schedule, eps);
    let mut sols: Vec<GeodesicSolution> = Vec::new();
    let mut levels = Vec::new();
    for &t in ts {
        let g = grid.with_x_max(t)?;
        let mut run = continuation_solve(bg, &g, phi0, phi1, &schedule, cfg);
        if let Some((_, e)) = run.failure.take() {
            return Err(e);
        }
        let sol = run.solutions.pop().expect("non-empty schedule");
        let u = g.u(g.nx() - 1);
        let (a, b) = (phi0.value(u), phi1.value(u));
        let edge = g
            .ts()
            .iter()
            .map(|t| ((1.0 - t) * a + t * b).abs())
            .fold(0.0, f64::max);
        levels.push(ExhaustionLevel {
            x_max: t,
            nx: g.nx(),
            sup_phi: sol.path.phi.sup_abs(),
            iterations: sol.iterations,
            residual: sol.final_residual,
            edge_data: edge,
        });
        sols.push(sol);
    }
    let mut drifts = Vec::new();
    for k in 1..sols.len() {
        let (a, b) = (&sols[k - 1].path.phi, &sols[k].path.phi);
        let ga = *a.grid();
        let mut d = 0.0_f64;
        for i in 0..ga.nx() {
            for j in 0..ga.nt() {
                d = d.max((a.at(i, j) - b.at(i, j)).abs());
            }
        }
        let predicted = levels[k - 1].edge_data;
        drifts.push(ExhaustionDrift {
            from_x_max: levels[k - 1].x_max,
            to_x_max: levels[k].x_max,
            drift: d,
            predicted,
            ratio: if predicted > 0.0 { d / predicted } else { 0.0 },
        });
    }
    Ok(ExhaustionReport {
        eps,
        drift_monotone: drifts.windows(2).all(|w| w[1].drift <= w[0].drift),
        sup_phi_monotone: levels
            .windows(2)
            .all(|w| w[1].sup_phi >= w[0].sup_phi * (1.0 - 1e-12)),
        levels,
        drifts,
    })
}
