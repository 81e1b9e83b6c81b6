//! The five subcommands. Each returns `Ok(())` on success; failures carry
//! their exit code through [`CliError`].

use std::path::{Path, PathBuf};

use alegeo_core::analysis::{
    aubin_check, bound_suite, curvature_decay, BoundReport, CurvatureDecay, FitWindow, Verdict,
};
use alegeo_core::barriers::{build_profile, choose_c, verify_enclosure, BarrierReport};
use alegeo_core::energy::{convexity_scan, ibp_identity_check, EnergyReport, ROUNDOFF_FACTOR};
use alegeo_core::ma::{ma_residual, PotentialPath};
use alegeo_core::solver::{
    continuation_solve, exhaustion_study, residual_target, ExhaustionReport,
};
use serde::{Deserialize, Serialize};

use crate::config::{Resolved, RunConfig};
use crate::error::{CliError, CliResult};
use crate::store::{read_index, read_levels, write_json, write_run, write_text, RunIndex};

/// Largest allowed `max/min` of `sup|Δ_ω φ|` over the ε schedule.
pub const LAPLACIAN_RATIO_MAX: f64 = 2.0;
/// Largest allowed error of the pointwise log identity.
pub const LOG_IDENTITY_TOL: f64 = 1e-8;
/// Largest allowed exhaustion drift relative to the predicted drift.
pub const DRIFT_FACTOR: f64 = 10.0;

/// Console reporting, silenced by `--quiet`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Console {
    pub quiet: bool,
}

impl Console {
    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

/// Runs the continuation and writes the run directory.
pub fn cmd_solve(cfg: &RunConfig, out: Console) -> CliResult<RunIndex> {
    let r = cfg.resolve()?;
    let dir = cfg.out_dir();
    out.say(format!(
        "solving on {} × {} grid, x ∈ [{}, {}], {} ε levels",
        r.grid.nx(),
        r.grid.nt(),
        r.grid.x_min(),
        r.grid.x_max(),
        cfg.solve.eps_schedule.len()
    ));
    let run = continuation_solve(
        &r.bg,
        &r.grid,
        &r.phi0,
        &r.phi1,
        &cfg.solve.eps_schedule,
        &cfg.solve,
    );
    let failure = run
        .failure
        .as_ref()
        .map(|(eps, e)| format!("ε = {eps:e}: {e}"));
    let index = write_run(&dir, cfg, &run.solutions, &run.stats, failure.clone())?;
    for s in &run.stats {
        out.say(format!(
            "ε = {:<9.3e} iters {:>2}  residual {:.2e}  sup|Δφ| {:.4e}  sup|φ_tt| {:.4e}",
            s.eps, s.iterations, s.residual, s.sup_laplacian, s.sup_phi_tt
        ));
    }
    out.say(format!("wrote {}", dir.join("run.json").display()));
    match failure {
        Some(f) => Err(CliError::Solver(f)),
        None => Ok(index),
    }
}

/// Loads the stored run when it was produced by the same config, and solves
/// otherwise.
fn solutions_for(cfg: &RunConfig, out: Console) -> CliResult<(Resolved, Vec<PotentialPath>)> {
    let r = cfg.resolve()?;
    let dir = cfg.out_dir();
    let stored = read_index(&dir)
        .ok()
        .filter(|i| i.completed && same_config(&i.config, cfg));
    let index = match stored {
        Some(i) => {
            out.say(format!("reusing solutions in {}", dir.display()));
            i
        }
        None => cmd_solve(cfg, out)?,
    };
    let paths = read_levels(&dir, &index, &r)?
        .into_iter()
        .map(|l| l.path)
        .collect();
    Ok((r, paths))
}

fn same_config(a: &RunConfig, b: &RunConfig) -> bool {
    let v = |c: &RunConfig| serde_json::to_value(c).ok();
    a.base_dir == b.base_dir && v(a) == v(b)
}

/// Per-level outcome of `verify`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LevelCheck {
    pub eps: f64,
    pub file: String,
    pub residual: f64,
    pub residual_target: f64,
    pub residual_ok: bool,
    /// Endpoint rows and spatial edges hold the prescribed data.
    pub boundary_ok: bool,
    pub barrier: Option<BarrierReport>,
    pub barrier_error: Option<String>,
    pub log_identity_error: f64,
    pub log_identity_ok: bool,
    pub aubin_worst_relative: f64,
    pub aubin_ok: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VerifyReport {
    pub dir: PathBuf,
    pub levels: Vec<LevelCheck>,
    /// `max/min` of `sup|Δ_ω φ|` over levels.
    pub laplacian_ratio: f64,
    pub uniform_laplacian: bool,
    pub energy: Option<EnergyVerdict>,
    pub energy_error: Option<String>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EnergyVerdict {
    pub convex: bool,
    pub convex_manifold: bool,
    pub routes_agree: bool,
    pub flux_small: bool,
    pub max_route_spread: f64,
    pub max_flux_ratio: f64,
    pub pass: bool,
}

impl From<&EnergyReport> for EnergyVerdict {
    fn from(r: &EnergyReport) -> Self {
        EnergyVerdict {
            convex: r.convex,
            convex_manifold: r.convex_manifold,
            routes_agree: r.routes_agree,
            flux_small: r.flux_small,
            max_route_spread: r
                .scans
                .iter()
                .map(|s| s.max_route_spread)
                .fold(0.0, f64::max),
            max_flux_ratio: r.scans.iter().map(|s| s.max_flux_ratio).fold(0.0, f64::max),
            pass: r.pass,
        }
    }
}

fn boundary_ok(p: &PotentialPath, side: alegeo_core::ma::SideData) -> bool {
    let g = *p.grid();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
    let rows = p.endpoints_exact();
    let edges = [0, g.nx() - 1].iter().all(|&i| {
        (1..g.nt() - 1).all(|j| {
            close(
                p.phi.at(i, j),
                side.value(&p.bg, &p.phi0, &p.phi1, g.x(i), g.t(j), p.eps),
            )
        })
    });
    rows && edges
}

fn check_level(p: &PotentialPath, file: &str, cfg: &RunConfig) -> LevelCheck {
    let side = cfg.solve.side_data;
    let residual = ma_residual(p).map(|r| r.sup_abs()).unwrap_or(f64::INFINITY);
    let target = residual_target(p, cfg.solve.tol_newton);
    let (barrier, barrier_error) = match build_profile(&cfg.verify.barrier_profile, p.bg.n())
        .and_then(|prof| {
            choose_c(
                &p.bg,
                p.grid(),
                &p.phi0,
                &p.phi1,
                prof.as_ref(),
                p.eps,
                side,
            )
            .map(|c| (prof, c))
        }) {
        Ok((prof, c)) => (Some(verify_enclosure(p, prof.as_ref(), c, side)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let nt = p.grid().nt();
    let log_err = (1..nt - 1)
        .map(|j| {
            ibp_identity_check(p, j)
                .map(|c| c.log_identity_error)
                .unwrap_or(f64::INFINITY)
        })
        .fold(0.0, f64::max);
    let aubin = aubin_check(p).ok();
    let residual_ok = residual <= target;
    let boundary = boundary_ok(p, side);
    let barrier_pass = barrier.as_ref().is_some_and(|b| b.pass);
    let log_ok = log_err <= LOG_IDENTITY_TOL;
    let aubin_ok = aubin.as_ref().is_some_and(|a| a.pass);
    LevelCheck {
        eps: p.eps,
        file: file.into(),
        residual,
        residual_target: target,
        residual_ok,
        boundary_ok: boundary,
        barrier,
        barrier_error,
        log_identity_error: log_err,
        log_identity_ok: log_ok,
        aubin_worst_relative: aubin
            .as_ref()
            .map_or(f64::NEG_INFINITY, |a| a.worst_relative),
        aubin_ok,
        pass: residual_ok && boundary && barrier_pass && log_ok && aubin_ok,
    }
}

/// Re-reads a run directory and checks every invariant.
pub fn cmd_verify(dir: &Path, out: Console) -> CliResult<VerifyReport> {
    let index = read_index(dir)?;
    let cfg = &index.config;
    let r = cfg.resolve()?;
    let levels = read_levels(dir, &index, &r)?;
    if levels.is_empty() {
        return Err(CliError::Config(format!(
            "{}: run has no solutions",
            dir.display()
        )));
    }
    let checks: Vec<LevelCheck> = index
        .levels
        .iter()
        .zip(&levels)
        .map(|(e, l)| check_level(&l.path, &e.csv, cfg))
        .collect();
    let laps: Vec<f64> = levels
        .iter()
        .map(|l| {
            bound_suite(&l.path, cfg.solve.side_data)
                .map(|b| b.sup_laplacian)
                .unwrap_or(f64::NAN)
        })
        .collect();
    // Laplacians at rounding level compare as equal
    let h = r.grid.hx();
    let sup_phi = levels
        .iter()
        .fold(0.0_f64, |m, l| m.max(l.path.phi.sup_abs()));
    let floor = ROUNDOFF_FACTOR * f64::EPSILON * sup_phi.max(1.0) / (h * h);
    let (lo, hi) = laps
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(a, b), v| (a.min(*v), b.max(*v)));
    let ratio = hi.max(floor) / lo.max(floor);
    let uniform = laps.iter().all(|v| v.is_finite()) && ratio <= LAPLACIAN_RATIO_MAX;
    let (energy, energy_error) = match convexity_scan(levels.iter().map(|l| &l.path)) {
        Ok(rep) => (Some(EnergyVerdict::from(&rep)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let energy_pass = energy.as_ref().is_some_and(|e| e.pass);
    let pass = checks.iter().all(|c| c.pass) && uniform && energy_pass;
    let report = VerifyReport {
        dir: dir.to_path_buf(),
        levels: checks,
        laplacian_ratio: ratio,
        uniform_laplacian: uniform,
        energy,
        energy_error,
        pass,
    };
    write_json(&dir.join("verify.json"), &report)?;
    for c in &report.levels {
        out.say(format!(
            "ε = {:<9.3e} residual {} boundary {} barrier {} log-identity {} aubin {}",
            c.eps,
            mark(c.residual_ok),
            mark(c.boundary_ok),
            mark(c.barrier.as_ref().is_some_and(|b| b.pass)),
            mark(c.log_identity_ok),
            mark(c.aubin_ok)
        ));
    }
    out.say(format!(
        "uniform Laplacian: {} (ratio {:.4})",
        mark(uniform),
        ratio
    ));
    if let Some(e) = &report.energy {
        out.say(format!(
            "energy: convex {} manifold form {} routes {} flux {}",
            mark(e.convex),
            mark(e.convex_manifold),
            mark(e.routes_agree),
            mark(e.flux_small)
        ));
    }
    if pass {
        Ok(report)
    } else {
        Err(CliError::Verification(format!(
            "see {}",
            dir.join("verify.json").display()
        )))
    }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

/// Energy scans of every level.
pub fn cmd_energy(cfg: &RunConfig, out: Console) -> CliResult<EnergyReport> {
    let (_, paths) = solutions_for(cfg, out)?;
    let dir = cfg.out_dir();
    let rep = convexity_scan(paths.iter()).map_err(|e| CliError::Solver(e.to_string()))?;
    for (k, s) in rep.scans.iter().enumerate() {
        write_text(&dir.join(format!("energy/eps_{k:02}.csv")), &s.to_csv())?;
        out.say(format!(
            "ε = {:<9.3e} min d²K {:.4e}  spread {:.3}  flux ratio {:.3e}",
            s.eps,
            s.samples
                .iter()
                .map(|x| x.d2k_fd)
                .fold(f64::INFINITY, f64::min),
            s.max_route_spread,
            s.max_flux_ratio
        ));
    }
    write_json(&dir.join("energy.json"), &rep)?;
    let v = EnergyVerdict::from(&rep);
    out.say(format!(
        "convex {} manifold form {} routes {} flux {}",
        mark(v.convex),
        mark(v.convex_manifold),
        mark(v.routes_agree),
        mark(v.flux_small)
    ));
    if rep.pass {
        Ok(rep)
    } else {
        Err(CliError::Verification(
            "K-energy verdict failed, see energy.json".into(),
        ))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DecayOutput {
    pub bounds: BoundReport,
    pub curvature: CurvatureDecay,
    pub pass: bool,
}

/// Bounds, decay fits and curvature decay at one level.
pub fn cmd_decay(cfg: &RunConfig, out: Console) -> CliResult<DecayOutput> {
    let (r, paths) = solutions_for(cfg, out)?;
    let dir = cfg.out_dir();
    let p = match cfg.decay.eps {
        Some(e) => paths
            .iter()
            .find(|p| (p.eps - e).abs() <= 1e-12 * e)
            .ok_or_else(|| CliError::Config(format!("ε = {e} is not a solved level")))?,
        None => paths.last().expect("a completed run has levels"),
    };
    let bounds =
        bound_suite(p, cfg.solve.side_data).map_err(|e| CliError::Solver(e.to_string()))?;
    let window = FitWindow::outer(r.grid.nx())
        .map_err(|e| CliError::Config(format!("decay needs a finer grid: {e}")))?;
    let curvature =
        curvature_decay(p, r.grid.nt() / 2, window).map_err(|e| CliError::Solver(e.to_string()))?;
    for e in bounds.decay.entries.iter().chain(&curvature.entries) {
        write_text(&dir.join(format!("decay/{}.csv", e.quantity)), &e.to_csv())?;
        let slope = e.slope().map_or("-".to_string(), |s| format!("{s:.4}"));
        out.say(format!(
            "{:<24} slope {:>8}  {:?}",
            e.quantity, slope, e.verdict
        ));
    }
    let failed = |v: &Verdict| *v == Verdict::Fail;
    let pass = !bounds.decay.entries.iter().any(|e| failed(&e.verdict)) && curvature.pass;
    let output = DecayOutput {
        bounds,
        curvature,
        pass,
    };
    write_json(&dir.join("decay.json"), &output)?;
    if pass {
        Ok(output)
    } else {
        Err(CliError::Verification(
            "a decay fit failed, see decay.json".into(),
        ))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExhaustOutput {
    pub report: ExhaustionReport,
    pub drift_factor: f64,
    pub pass: bool,
}

/// Nested-domain study at one level.
pub fn cmd_exhaust(cfg: &RunConfig, out: Console) -> CliResult<ExhaustOutput> {
    let r = cfg.resolve()?;
    // `[exhaust] ts`, then `solve.exhaustion_ts`, then the configured domain
    let ts = [&cfg.exhaust.ts, &cfg.solve.exhaustion_ts]
        .into_iter()
        .find(|ts| !ts.is_empty())
        .cloned()
        .unwrap_or_else(|| vec![r.grid.x_max()]);
    let report = exhaustion_study(
        &r.bg,
        &r.grid,
        &r.phi0,
        &r.phi1,
        cfg.exhaust.eps,
        &ts,
        &cfg.solve,
    )
    .map_err(|e| match e {
        alegeo_core::error::Error::InvalidArgument(m) => CliError::Config(m),
        e => CliError::Solver(e.to_string()),
    })?;
    for d in &report.drifts {
        out.say(format!(
            "x_max {} → {}: drift {:.3e}  predicted {:.3e}",
            d.from_x_max, d.to_x_max, d.drift, d.predicted
        ));
    }
    let pass = report.drift_monotone
        && report
            .drifts
            .iter()
            .all(|d| d.drift <= DRIFT_FACTOR * d.predicted);
    let output = ExhaustOutput {
        report,
        drift_factor: DRIFT_FACTOR,
        pass,
    };
    write_json(&cfg.out_dir().join("exhaust.json"), &output)?;
    if pass {
        Ok(output)
    } else {
        Err(CliError::Verification(
            "exhaustion drift check failed, see exhaust.json".into(),
        ))
    }
}
