use alegeo_core::analysis::{
    aubin_check, bound_suite, curvature_decay, fit_decay, FitWindow, Verdict,
};
use alegeo_core::error::Error;
use alegeo_core::geometry::{EndpointPotential, RadialBackground};
use alegeo_core::grid::{Field2D, Grid2D};
use alegeo_core::ma::{PotentialPath, SideData};
use alegeo_core::solver::{continuation_solve, initial_guess, newton_solve, SolveConfig};
use proptest::prelude::*;

fn xs(nx: usize) -> Vec<f64> {
    Grid2D::new(0.0, 4.0, nx, 5).unwrap().xs()
}

#[test]
fn two_term_decay_fits_leading_power() {
    let x = xs(201);
    let f: Vec<f64> = x
        .iter()
        .map(|x| (-2.0 * x).exp() + (-4.0 * x).exp())
        .collect();
    let fit = fit_decay(&x, &f, FitWindow::outer(201).unwrap()).unwrap();
    assert!(fit.slope > -2.05 && fit.slope < -1.95, "{}", fit.slope);
}

proptest! {
    #[test]
    fn pure_powers_are_recovered(p in -8.0f64..-0.5, a in 1e-3f64..10.0, neg in any::<bool>()) {
        let x = xs(101);
        let s = if neg { -a } else { a };
        let f: Vec<f64> = x.iter().map(|x| s * (p * x).exp()).collect();
        let fit = fit_decay(&x, &f, FitWindow::outer(101).unwrap()).unwrap();
        prop_assert!((fit.slope - p).abs() <= 1e-9);
        prop_assert!(fit.residual <= 1e-9);
    }
}

#[test]
fn vanishing_profile_is_degenerate() {
    let x = xs(101);
    let r = fit_decay(&x, &vec![0.0; 101], FitWindow::outer(101).unwrap());
    assert!(matches!(r, Err(Error::DegenerateFit(_))));
}

fn flat_parabola(eps: f64, n: usize) -> PotentialPath {
    let g = Grid2D::new(-1.0, 2.0, 61, 17).unwrap();
    let z = EndpointPotential::zero();
    let c = SolveConfig {
        side_data: SideData::Parabolic,
        ..SolveConfig::default()
    };
    let p = initial_guess(&RadialBackground::flat(n), &g, &z, &z, eps, c.side_data).unwrap();
    newton_solve(p, c.side_data, &c).unwrap().path
}

#[test]
fn constant_solution_bounds_are_trivial() {
    let eps = 0.25;
    let p = flat_parabola(eps, 2);
    let b = bound_suite(&p, SideData::Parabolic).unwrap();
    assert!((b.sup_phi_tt - eps).abs() <= 1e-8);
    assert!(b.sup_laplacian <= 1e-8);
    assert!(b.is_finite());
    for e in &b.decay.entries {
        assert_eq!(e.verdict, Verdict::DegenerateFit, "{}", e.quantity);
    }
}

#[test]
fn coarse_grid_bounds_have_degenerate_fits() {
    let g = Grid2D::new(-1.0, 1.0, 21, 9).unwrap();
    let phi = Field2D::from_fn(g, |_, t| 0.25 * t * (t - 1.0));
    let z = EndpointPotential::zero();
    let mut p =
        PotentialPath::new(RadialBackground::flat(2), phi.clone(), z.clone(), z, 0.5).unwrap();
    p.phi = phi;
    let b = bound_suite(&p, SideData::Parabolic).unwrap();
    assert!(b.is_finite());
    assert!(b.decay.window.is_none());
    assert!(b
        .decay
        .entries
        .iter()
        .all(|e| e.verdict == Verdict::DegenerateFit));
}

#[test]
fn flat_analytic_aubin_margin() {
    for (eps, n) in [(0.5, 2), (0.1, 2), (0.1, 3)] {
        let p = flat_parabola(eps, n);
        let r = aubin_check(&p).unwrap();
        let expected = (n + 1) as f64 * (1.0 / eps - 1.0);
        assert_eq!(r.b, (n + 1) as f64);
        assert!(
            (r.worst_margin - expected).abs() <= 1e-10 * expected.max(1.0),
            "{} vs {expected}",
            r.worst_margin
        );
        assert!(r.pass);
    }
}

#[test]
fn static_path_has_zero_margin() {
    let g = Grid2D::new(-1.0, 2.0, 41, 9).unwrap();
    let phi = Field2D::from_fn(g, |_, t| t * t / 2.0);
    let z = EndpointPotential::zero();
    let mut p =
        PotentialPath::new(RadialBackground::flat(2), phi.clone(), z.clone(), z, 1.0).unwrap();
    p.phi = phi;
    let r = aubin_check(&p).unwrap();
    assert!(r.worst_margin.abs() <= 1e-10);
    assert!(r.pass);
}

#[test]
fn bound_suite_is_invariant_under_time_reversal() {
    let g = Grid2D::new(0.0, 4.0, 81, 17).unwrap();
    let bg = RadialBackground::eguchi_hanson(1.0).unwrap();
    let (a, b) = (EndpointPotential::zero(), EndpointPotential::inverse(0.05));
    let run = continuation_solve(&bg, &g, &a, &b, &[1.0, 0.01], &SolveConfig::default());
    let p = run.solutions.last().unwrap().path.clone();
    let side = SideData::Compatible;
    let (f, r) = (
        bound_suite(&p, side).unwrap(),
        bound_suite(&p.reversed(), side).unwrap(),
    );
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(1.0);
    assert!(close(f.sup_laplacian, r.sup_laplacian));
    assert!(close(f.sup_phi, r.sup_phi));
    assert!(close(f.sup_phi_t, r.sup_phi_t));
    assert!(close(f.sup_phi_tt, r.sup_phi_tt));
    for (x, y) in f.decay.entries.iter().zip(&r.decay.entries) {
        match (x.slope(), y.slope()) {
            (Some(s), Some(t)) => assert!((s - t).abs() <= 1e-9, "{}", x.quantity),
            (None, None) => {}
            _ => panic!("{} differs in degeneracy", x.quantity),
        }
    }
}

fn static_slice(bg: RadialBackground, amp: f64) -> PotentialPath {
    let g = Grid2D::new(0.0, 4.0, 201, 5).unwrap();
    let phi = EndpointPotential::inverse(amp);
    let f = Field2D::from_fn(g, |x, _| phi.value((2.0 * x).exp()));
    PotentialPath::new(bg, f, phi.clone(), phi, 0.1).unwrap()
}

#[test]
fn eh_background_is_identically_flat() {
    let p = static_slice(RadialBackground::eguchi_hanson(1.0).unwrap(), 0.0);
    let c = curvature_decay(&p, 2, FitWindow::outer(201).unwrap()).unwrap();
    assert!(c.identically_flat);
    assert!(c.pass);
}

#[test]
fn perturbed_flat_curvature_decays_and_scales() {
    let w = FitWindow::outer(201).unwrap();
    let big = curvature_decay(&static_slice(RadialBackground::flat(2), 0.05), 2, w).unwrap();
    let small = curvature_decay(&static_slice(RadialBackground::flat(2), 0.025), 2, w).unwrap();
    assert!(!big.identically_flat);
    assert!(big.pass);
    let slope = big.entries[0].slope().unwrap();
    assert!(slope < -6.0, "{slope}");
    let ratio = big.sup_scalar / small.sup_scalar;
    assert!((ratio - 2.0).abs() <= 0.04, "{ratio}");
}
