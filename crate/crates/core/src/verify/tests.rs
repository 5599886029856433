use std::sync::Arc;

use super::*;
use crate::geometry::{build_metric_family, FactorProfile, MetricFamily, PullbackMap, ReferenceManifold};
use crate::noise::canonical_embedding;
use crate::operators::{
    GeneralParabolicForm, McfSphereForm, MovingSurfaceForm, NonlinearitySpec, PLaplaceForm, ParabolicCoefficients,
    VhField, WithNonlinearity,
};
use crate::scenarios::{pure_noise, static_heat, unit_mode};
use crate::solver::{Scheme, SolverConfig};
use crate::spectral::FourierBasis;

fn static_metric(k: usize, f0: f64) -> MetricFamily {
    build_metric_family(ReferenceManifold::circle(k).unwrap(), FactorProfile::Constant(f0), 1.0).unwrap()
}

fn heat(k: usize) -> MovingSurfaceForm {
    MovingSurfaceForm::new(static_metric(k, 1.0), VhField::Zero, Some(0.0)).unwrap()
}

fn mcf(k: usize) -> McfSphereForm {
    McfSphereForm::new(2, FourierBasis::new(k, 8 * k + 1).unwrap(), 0.2).unwrap()
}

fn plap(k: usize) -> PLaplaceForm {
    PLaplaceForm::new(&static_metric(k, 1.0), 4.0).unwrap()
}

#[test]
fn heat_meets_its_constants() {
    let form = heat(8);
    let probes = ProbeSet::random(&form, 200, 1);
    let r = certify(&form, &ProofConstants::heat_static(None), &probes, "heat").unwrap();
    assert!(r.passed(), "{}", r.to_kv());
    assert!(r.monotonicity.estimate <= 1e-12);
    // high modes push ‖Av‖_{V*}/‖v‖_V towards but not past 1
    assert!(r.boundedness.estimate > 0.5 && r.boundedness.estimate <= 1.0 + 1e-12);
}

#[test]
fn mcf_sphere_meets_its_constants() {
    let form = mcf(8);
    let pc = ProofConstants::mcf_sphere(2, 0.2, None).unwrap();
    assert!((pc.c - 40.0).abs() < 1e-9 && (pc.c3 - 40.0).abs() < 1e-9);
    let a2 = 0.2f64.sqrt();
    assert!((pc.c1 - 2.0 * (20.0 / a2 + 0.2)).abs() < 1e-9);
    assert!((pc.c2 - 2.0 * a2 / 5.0).abs() < 1e-12);
    let probes = ProbeSet::random(&form, 300, 2);
    let r = certify(&form, &pc, &probes, "mcf").unwrap();
    assert!(r.passed(), "{}", r.to_kv());
    assert!(r.monotonicity.estimate <= 40.0);
}

#[test]
fn nested_samples_give_monotone_estimates() {
    let form = mcf(6);
    let small = ProbeSet::random(&form, 50, 9);
    let big = ProbeSet::random(&form, 400, 9);
    assert_eq!(small.probes[..], big.probes[..50]);
    let s = check_weak_monotonicity(&form, &small, 40.0).unwrap().estimate;
    let b = check_weak_monotonicity(&form, &big, 40.0).unwrap().estimate;
    assert!(s <= b);
}

#[test]
fn too_strong_coercivity_is_caught() {
    let form = heat(8);
    let probes = ProbeSet::random(&form, 100, 3);
    assert!(check_coercivity(&form, &probes, 2.0, 2.0, 2.0, 0.0).unwrap().passed);
    assert!(!check_coercivity(&form, &probes, 2.0, 2.5, 2.0, 0.0).unwrap().passed);
    assert!(!check_coercivity(&form, &probes, 1.0, 2.0, 2.0, 0.0).unwrap().passed);
}

#[test]
fn too_small_monotonicity_constant_is_caught() {
    let form = mcf(6);
    let probes = ProbeSet::random(&form, 200, 4);
    assert!(!check_weak_monotonicity(&form, &probes, 5.0).unwrap().passed);
}

#[test]
fn linear_pairing_is_affine() {
    let form = heat(6);
    let probes = ProbeSet::random(&form, 20, 5);
    let h = check_hemicontinuity(&form, &probes).unwrap();
    assert!(h.passed && h.affine_deviation < 1e-12);
}

#[test]
fn p_laplace_meets_its_constants() {
    let form = plap(8);
    let pc = ProofConstants::p_laplace(&form, None);
    assert!((pc.c2 - 0.75).abs() < 1e-12 && pc.alpha == 4.0);
    let probes = ProbeSet::random(&form, 200, 6).with_direction(&triangle_wave(form.basis()), &[0.0, 0.5]);
    assert!(probes.probes.iter().all(|p| p.u[0] == 0.0));
    let r = certify(&form, &pc, &probes, "plaplace").unwrap();
    assert!(r.passed(), "{}", r.to_kv());
    assert!(r.hemicontinuity.allowed_gap > 0.0);
}

#[test]
fn coarse_hemicontinuity_jump_is_lipschitz() {
    let form = plap(6);
    let probes = ProbeSet::random(&form, 50, 7);
    let h = check_hemicontinuity_step(&form, &probes, 1e-2).unwrap();
    assert!(h.passed, "{h:?}");
}

#[test]
fn moving_surface_with_cosine_field() {
    let metric = build_metric_family(ReferenceManifold::circle(6).unwrap(), FactorProfile::Mcf { n: 2 }, 0.2).unwrap();
    let form = MovingSurfaceForm::new(metric, VhField::Cosine { mean: -1.0, amp: 0.5 }, None).unwrap();
    let pc = ProofConstants::moving_surface(&form, None);
    let probes = ProbeSet::random(&form, 200, 8);
    let r = certify(&form, &pc, &probes, "moving").unwrap();
    assert!(r.passed(), "{}", r.to_kv());
}

#[test]
fn general_parabolic_with_nonlinearity() {
    let metric = build_metric_family(ReferenceManifold::circle(6).unwrap(), FactorProfile::Mcf { n: 2 }, 0.2).unwrap();
    let coef = ParabolicCoefficients { a_mean: 1.0, a_cos: 0.4, b: 0.7, b_cos: 0.0, c_mean: 0.3, c_cos: -0.2 };
    let base = GeneralParabolicForm::new(coef, PullbackMap::new(metric.clone())).unwrap();
    let nm = canonical_embedding(5).unwrap();
    let pc = ProofConstants::general_parabolic(&base, Some(&nm));
    assert_eq!(pc.f, nm.hs_norm_sq());
    let nl = NonlinearitySpec::Tanh(0.8);
    let shifted = pc.clone().with_nonlinearity(&nl, &metric);
    assert_eq!(shifted.c, pc.c);
    assert!(shifted.c1 > pc.c1 && shifted.c3 > pc.c3);
    let form = WithNonlinearity::new(Arc::new(base), nl).unwrap();
    let probes = ProbeSet::random(&form, 150, 10);
    let r = certify(&form, &shifted, &probes, "general").unwrap();
    assert!(r.passed(), "{}", r.to_kv());
}

#[test]
fn report_layout() {
    let form = heat(4);
    let probes = ProbeSet::random(&form, 10, 11);
    let r = certify(&form, &ProofConstants::heat_static(None), &probes, "x").unwrap();
    let kv = r.to_kv();
    for key in ["seed=11", "samples=10", "c_monotone=", "c1=2", "c3=", "pass=true"] {
        assert!(kv.contains(key), "{key} missing");
    }
    assert!(kv.lines().all(|l| l.split_once('=').is_some()));
    let csv = r.ratios_csv(&probes);
    assert!(csv.starts_with("sample,t,h1_gap,h2_ratio,h3_violation,h4_ratio\n"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn poincare_constants() {
    assert!((estimate_poincare(&static_metric(8, 1.0)).unwrap() - 1.0).abs() < 1e-10);
    assert!((estimate_poincare(&static_metric(8, 4.0)).unwrap() - 2.0).abs() < 1e-10);
    let moving = build_metric_family(ReferenceManifold::circle(4).unwrap(), FactorProfile::Mcf { n: 2 }, 0.2).unwrap();
    assert!(estimate_poincare(&moving).is_err());
}

#[test]
fn lp_poincare_closed_form() {
    assert!((lp_poincare_constant(2.0, 1.0) - 1.0).abs() < 1e-12);
    assert!((lp_poincare_constant(4.0, 1.0) - 4.0 / 3.0).abs() < 1e-12);
    assert!((lp_poincare_constant(4.0, 4.0) - 64.0 / 3.0).abs() < 1e-10);
}

#[test]
fn lp_poincare_ascent_approaches_closed_form() {
    let form = plap(16);
    let est = estimate_lp_poincare(&form, 1, 3000).unwrap();
    let exact = 4.0 / 3.0;
    assert!(est <= exact * (1.0 + 1e-9), "{est}");
    assert!(est >= 0.99 * exact, "{est}");
    let tri = triangle_wave(form.basis());
    let (a, b) = form.lp_parts(&tri);
    let target = std::f64::consts::PI.powi(4) / 80.0;
    assert!((a / b - target).abs() < 0.02 * target, "{}", a / b);
    assert!(a / b < est);
}

#[test]
fn deterministic_moment_is_the_initial_norm() {
    let sc = static_heat(4, 0.5, 1.0, None, unit_mode(9, 3, 2.0)).unwrap();
    let m = estimate_sup_moment(&sc, &SolverConfig::new(1e-2, Scheme::SemiImplicit), 5).unwrap();
    assert!((m.mean - 4.0).abs() < 1e-12 && m.std_error == 0.0);
}

#[test]
fn pure_noise_moment_is_parallel_deterministic() {
    let sc = pure_noise(3, 1.0, Some(canonical_embedding(4).unwrap())).unwrap();
    let cfg = SolverConfig::new(1e-2, Scheme::SemiImplicit);
    let a = estimate_sup_moment(&sc, &cfg, 64).unwrap();
    let b = estimate_sup_moment(&sc, &cfg, 64).unwrap();
    assert_eq!(a, b);
    // E sup ≥ E‖W(1)‖² = Σσ²
    assert!(a.mean + a.half_width > canonical_embedding(4).unwrap().hs_norm_sq());
}

#[test]
fn euler_on_pure_noise_is_exact() {
    let sc = pure_noise(3, 1.0, Some(canonical_embedding(4).unwrap())).unwrap();
    let cfg = SolverConfig::new(1e-3, Scheme::SemiImplicit);
    let r = estimate_strong_order(&sc, &cfg, &[1e-1, 5e-2, 1e-2], 8).unwrap();
    assert!(r.exact && r.slope.is_none());
}

#[test]
fn deterministic_heat_has_order_one() {
    let sc = static_heat(4, 1.0, 1.0, None, unit_mode(9, 1, 1.0)).unwrap();
    let cfg = SolverConfig::new(1e-5, Scheme::SemiImplicit);
    let r = estimate_strong_order(&sc, &cfg, &[1e-2, 5e-3, 2.5e-3], 1).unwrap();
    let s = r.slope.unwrap();
    assert!((s - 1.0).abs() < 0.1, "{s}");
    assert!(!r.exact);
    assert!(r.to_csv().starts_with("dt,error\n"));
}

#[test]
fn non_nested_grids_are_rejected() {
    let sc = static_heat(2, 1.0, 1.0, None, unit_mode(5, 1, 1.0)).unwrap();
    let cfg = SolverConfig::new(1e-3, Scheme::SemiImplicit);
    assert!(estimate_strong_order(&sc, &cfg, &[1e-1, 3e-2], 1).is_err());
    assert!(estimate_strong_order(&sc, &cfg, &[1e-2, 1e-1], 1).is_err());
}
