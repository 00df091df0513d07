use rcs_core::optimizer::{solve, verify_global_coverage};
use rcs_core::performance::{coverage_probability, sev};
use rcs_core::sphere::{ch_radius, default_knots, standard_radius};
use rcs_core::{OptimizationProblem, QuadratureConfig, RadiusFunction, RcsSpec};

#[test]
fn p3_solution_is_feasible_and_small() {
    let problem = OptimizationProblem::new(3, 0.05).unwrap();
    let res = solve(&problem).unwrap();
    let d = res.radius.d();

    let values = res.radius.spline().unwrap().values();
    assert_eq!(*values.last().unwrap(), d);
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
    assert!(values.iter().all(|&v| v >= problem.value_floor && v <= d));

    assert!(res.sev_at_zero <= 0.79435 + 0.02, "{}", res.sev_at_zero);
    assert!(res.global_min_coverage >= 0.95 - 1e-4);
    assert!(res.sev_at_zero < sev_of_casella_hwang(3));

    // recomputed from a rebuilt radius function
    let knots = res.radius.spline().unwrap().knots().to_vec();
    let rebuilt = RadiusFunction::hermite(3, d, knots, values.to_vec()).unwrap();
    let spec = RcsSpec::new(0.05, rebuilt).unwrap();
    let cfg = QuadratureConfig::default();
    assert!((sev(&spec, 0.0, &cfg).unwrap() - res.sev_at_zero).abs() < 1e-8);
    for &g in &res.gamma_grid {
        let cp = coverage_probability(&spec, g, &cfg).unwrap();
        assert!(cp >= 0.95 - 2.0 * problem.coverage_slack, "gamma {g}: {cp}");
    }

    let again = solve(&problem).unwrap();
    assert!((again.sev_at_zero - res.sev_at_zero).abs() < 1e-6);
}

fn sev_of_casella_hwang(p: u32) -> f64 {
    let d = standard_radius(p, 0.05).unwrap();
    let spec = RcsSpec::new(0.05, RadiusFunction::casella_hwang(p, d).unwrap()).unwrap();
    sev(&spec, 0.0, &QuadratureConfig::default()).unwrap()
}

#[test]
fn sweep_of_reference_radii() {
    let cfg = QuadratureConfig::default();
    let d = standard_radius(3, 0.05).unwrap();
    let ch = RadiusFunction::casella_hwang(3, d).unwrap();
    let sweep = verify_global_coverage(&ch, 0.05, 0.05, 70.0, &cfg).unwrap();
    assert!((sweep.min_cp - 0.94594).abs() < 5e-4, "{}", sweep.min_cp);
    assert!(sweep.argmin_gamma > 0.0 && sweep.argmin_gamma < 70.0);

    let d7 = standard_radius(7, 0.05).unwrap();
    let ch7 = RadiusFunction::casella_hwang(7, d7).unwrap();
    let sweep = verify_global_coverage(&ch7, 0.05, 0.05, 70.0, &cfg).unwrap();
    assert!((sweep.min_cp - 0.95).abs() < 5e-4, "{}", sweep.min_cp);
    assert!(sweep.asymptote_gap < 2e-3);

    let flat = RadiusFunction::hermite_flat(3, d, default_knots(3, d, 10.0).unwrap()).unwrap();
    let sweep = verify_global_coverage(&flat, 0.05, 0.05, 70.0, &cfg).unwrap();
    assert!(sweep.min_cp >= 0.95 - 1e-3);
}

#[test]
fn custom_knots_are_respected() {
    let mut problem = OptimizationProblem::new(5, 0.05).unwrap();
    let d = standard_radius(5, 0.05).unwrap();
    problem.knots = vec![0.0, 1.0, 2.0, 4.0, 10.0];
    problem.gamma_grid = (0..=20).map(|g| 1.5 * g as f64).collect();
    let res = solve(&problem).unwrap();
    assert_eq!(res.radius.spline().unwrap().knots(), &problem.knots[..]);
    assert!(res.global_min_coverage >= 0.95 - 1e-4);
    assert!(res.radius.eval(0.0) < ch_radius(0.0, 5, d).unwrap());
}
