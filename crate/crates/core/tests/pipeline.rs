mod common;

use qsb_core::bound::{bound_general, bound_theorem, optimize_s, zeta_upper, Family, MassBoundReport, Reparameterization};
use qsb_core::extension::{default_rep, evolve, extract_mass, verify_monotonicity, ExtensionConfig};
use qsb_core::fillin::lambda_lower_from_metric;
use qsb_core::path::{build_path_table, build_path_table_with, Interpolation};
use qsb_core::{BoundaryData, ConformalMetric, QsbError, ScalarField};

use common::*;

#[test]
fn doubling_path_nodes_changes_bounds_little() {
    let b = perturbed(8, 0.1, 0.0);
    let coarse = build_path_table(b.metric(), 17, 1e-8).unwrap();
    let fine = build_path_table(b.metric(), 33, 1e-8).unwrap();
    let (z1, z2) = (zeta_upper(&coarse).unwrap(), zeta_upper(&fine).unwrap());
    assert!((z1 - z2).abs() < 1e-6, "{z1} {z2}");
    let rep = Reparameterization::affine_density(1.5, vec![1.0, 0.5, 2.0]).unwrap();
    let (g1, g2) = (bound_general(&coarse, &rep, &b).unwrap(), bound_general(&fine, &rep, &b).unwrap());
    assert!((g1 - g2).abs() < 1e-6, "{g1} {g2}");
}

#[test]
fn monotone_cubic_interpolation_agrees_roughly() {
    let b = perturbed(8, 0.1, 0.0);
    let cheb = build_path_table(b.metric(), 33, 1e-8).unwrap();
    let pchip = build_path_table_with(b.metric(), 33, 1e-8, Interpolation::MonotoneCubic).unwrap();
    let (z1, z2) = (zeta_upper(&cheb).unwrap(), zeta_upper(&pchip).unwrap());
    assert!((z1 - z2).abs() < 1e-3 * z1, "{z1} {z2}");
}

#[test]
fn optimizer_tends_to_half_r_as_cal_h_vanishes() {
    let b = round(8, 1.0, 1e-6);
    let table = build_path_table(b.metric(), 17, 1e-8).unwrap();
    for fam in [Family::OdeSqrt, Family::AffineDensity, Family::PiecewiseLinear] {
        let opt = optimize_s(&table, &b, fam, 100).unwrap();
        assert!((opt.bound - 0.5).abs() < 1e-6, "{}: {}", fam.name(), opt.bound);
    }

    let b = perturbed(8, 0.1, 0.0);
    let table = build_path_table(b.metric(), 17, 1e-8).unwrap();
    let opt = optimize_s(&table, &b, Family::AffineDensity, 200).unwrap();
    assert!(opt.bound <= opt.bound_theorem && opt.bound <= opt.bound_half_r);
}

#[test]
fn report_invariants_and_keys() {
    let b = perturbed(8, 0.1, 0.3);
    let table = build_path_table(b.metric(), 17, 1e-8).unwrap();
    let (rep, _) = MassBoundReport::compute(&b, &table, Family::PiecewiseLinear, 100).unwrap();
    assert!(rep.bound_best <= rep.bound_theorem + 1e-12);
    assert!(rep.bound_best <= rep.bound_half_r + 1e-12);
    let json = serde_json::to_value(&rep).unwrap();
    let keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    let mut expected = vec![
        "r_gamma", "area", "kappa", "zeta_upper", "calH", "bound_theorem", "bound_half_r", "bound_best",
        "best_family", "best_params", "extension_mass", "tolerances",
    ];
    let mut got = keys.clone();
    expected.sort();
    got.sort();
    assert_eq!(got, expected);
    let back: MassBoundReport = serde_json::from_value(json).unwrap();
    assert_eq!(back.bound_best.to_bits(), rep.bound_best.to_bits());
}

#[test]
fn extension_initial_cal_h_matches_boundary() {
    let b = perturbed(8, 0.2, 0.3);
    let table = build_path_table(b.metric(), 17, 1e-8).unwrap();
    let th = bound_theorem(&table, &b).unwrap();
    let res = evolve(&ExtensionConfig::new(b.clone(), default_rep(&th))).unwrap();
    assert!((res.samples[0].cal_h - b.cal_h()).abs() < 1e-10);
    assert!(res.samples.iter().all(|x| x.cal_h > 0.0 && x.min_v > 0.0));

    // Exterior mass is conserved: two tail windows agree.
    let (s, h) = (res.s(), res.cal_h());
    let late = extract_mass(&s, &h, (500.0, 1000.0)).unwrap();
    let early = extract_mass(&s, &h, (250.0, 500.0)).unwrap();
    assert!((late.mass - early.mass).abs() < 1e-4, "{} {}", late.mass, early.mass);
    assert!((late.mass - late.m_q).abs() < 1e-4);
}

#[test]
fn extension_mass_is_resolution_independent() {
    let run = |l: usize, h_max: f64, tol: f64| {
        let b = perturbed(l, 0.1, 0.3);
        let table = build_path_table(b.metric(), 17, 1e-8).unwrap();
        let th = bound_theorem(&table, &b).unwrap();
        let mut cfg = ExtensionConfig::new(b, default_rep(&th));
        cfg.h_max = h_max;
        cfg.tol = tol;
        evolve(&cfg).unwrap().mass_fit().unwrap().mass
    };
    let base = run(8, 0.02, 1e-10);
    let fine_grid = run(16, 0.02, 1e-10);
    let fine_steps = run(8, 0.01, 1e-11);
    assert!((base - fine_grid).abs() < 1e-5, "{base} {fine_grid}");
    assert!((base - fine_steps).abs() < 1e-5, "{base} {fine_steps}");
}

#[test]
fn extension_scaling_gives_length_mass() {
    let b = perturbed(8, 0.1, 0.0);
    let table = build_path_table(b.metric(), 17, 1e-8).unwrap();
    let th = bound_theorem(&table, &b).unwrap();
    let m1 = evolve(&ExtensionConfig::new(b.clone(), default_rep(&th))).unwrap().mass_fit().unwrap().mass;
    let m3 = evolve(&ExtensionConfig::new(b.scaled(3.0), default_rep(&th))).unwrap().mass_fit().unwrap().mass;
    assert!((m3 - 3.0 * m1).abs() < 1e-12);
}

#[test]
fn euclidean_monotonicity_saturates() {
    let b = round(8, 1.0, 2.0);
    let res = evolve(&ExtensionConfig::new(b, Reparameterization::affine(1.0).unwrap())).unwrap();
    let rep = verify_monotonicity(&res);
    assert!(rep.worst_residual >= -1e-8);
    assert!(rep.worst_residual <= 1e-8);
}

#[test]
fn fillin_agrees_with_general_formula() {
    let g = grid(8);
    let m = ConformalMetric::new(phi_y22(&g, 0.05), 1.7).unwrap();
    let from_metric = lambda_lower_from_metric(&m).unwrap();
    let min_k = m.gauss_curvature().min();
    let direct = m.r().powi(2) * min_k.sqrt();
    assert!((from_metric.lambda_lower - direct).abs() < 1e-10);
}

#[test]
fn nonpositive_mean_curvature_is_rejected() {
    let g = grid(4);
    let h = ScalarField::from_fn(g.clone(), |t, _| t.cos());
    assert!(matches!(
        BoundaryData::new(ConformalMetric::round(g, 1.0), h),
        Err(QsbError::ContractViolation(_))
    ));
}
