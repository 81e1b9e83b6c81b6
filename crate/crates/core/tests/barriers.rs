use alegeo_core::barriers::{build_profile, choose_c, upper_bound, verify_enclosure, Uniform};
use alegeo_core::error::Error;
use alegeo_core::geometry::{EndpointPotential, RadialBackground};
use alegeo_core::grid::Grid2D;
use alegeo_core::ma::SideData;
use alegeo_core::solver::{continuation_solve, SolveConfig};

#[test]
fn upper_bound_interpolates_endpoints() {
    let g = Grid2D::new(0.0, 1.0, 11, 5).unwrap();
    let (a, b) = (
        EndpointPotential::inverse(0.2),
        EndpointPotential::inverse(-0.1),
    );
    let l = upper_bound(&g, &a, &b);
    for i in 0..g.nx() {
        let u = g.u(i);
        for j in 0..g.nt() {
            let t = g.t(j);
            assert!((l.at(i, j) - ((1.0 - t) * a.value(u) + t * b.value(u))).abs() < 1e-15);
        }
    }
}

#[test]
fn flat_parabola_barrier_constant() {
    // ψ = −C t(1−t) is a sub-solution iff 2C ≥ ε
    let g = Grid2D::new(-1.0, 1.0, 21, 9).unwrap();
    let bg = RadialBackground::flat(2);
    let z = EndpointPotential::zero();
    for (eps, c) in [(0.5, 1.0), (2.0, 1.0), (3.0, 2.0), (7.0, 4.0)] {
        assert_eq!(
            choose_c(&bg, &g, &z, &z, &Uniform, eps, SideData::Parabolic).unwrap(),
            c
        );
    }
}

#[test]
fn decaying_profile_fails_on_long_annulus() {
    let g = Grid2D::new(0.0, 4.0, 81, 9).unwrap();
    let bg = RadialBackground::eguchi_hanson(1.0).unwrap();
    let profile = build_profile("decaying", 2).unwrap();
    let r = choose_c(
        &bg,
        &g,
        &EndpointPotential::zero(),
        &EndpointPotential::inverse(0.05),
        profile.as_ref(),
        0.1,
        SideData::Compatible,
    );
    assert!(matches!(r, Err(Error::FailsAtMaxC { .. })));
}

#[test]
fn solved_path_is_enclosed_and_perturbation_is_caught() {
    let g = Grid2D::new(0.0, 4.0, 81, 17).unwrap();
    let bg = RadialBackground::eguchi_hanson(1.0).unwrap();
    let (a, b) = (EndpointPotential::zero(), EndpointPotential::inverse(0.05));
    let cfg = SolveConfig::default();
    let run = continuation_solve(&bg, &g, &a, &b, &[1.0, 0.1, 0.01], &cfg);
    assert!(run.completed());
    for s in &run.solutions {
        let c = choose_c(&bg, &g, &a, &b, &Uniform, s.eps(), cfg.side_data).unwrap();
        let rep = verify_enclosure(&s.path, &Uniform, c, cfg.side_data);
        assert!(rep.pass, "{rep:?}");
        let mut bad = s.path.clone();
        let k = g.idx(40, 8);
        bad.phi.values_mut()[k] += 1.0;
        assert!(!verify_enclosure(&bad, &Uniform, c, cfg.side_data).pass);
    }
}
