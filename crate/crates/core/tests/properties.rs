use evospde::config::{parse_config, ScenarioConfig};
use evospde::geometry::{
    build_metric_family, level_set_components, norm_equivalence_constants, FactorProfile, LevelSetField, PullbackMap,
    ReferenceManifold,
};
use evospde::noise::{canonical_embedding, NoiseModel, NoiseStream};
use evospde::operators::{PLaplaceForm, WeakForm};
use evospde::scenarios::{mcf_circle, static_heat};
use evospde::solver::{solve_path, Scheme, SolverConfig};
use evospde::spectral::{dot, norm_sq, FourierBasis};
use evospde::verify::{check_weak_monotonicity, ProbeSet};
use proptest::prelude::*;

fn coeffs(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pullback_adjoint_identity(u in coeffs(9), w in coeffs(9), t in 0.0f64..0.2) {
        let mf = build_metric_family(ReferenceManifold::circle(4).unwrap(), FactorProfile::Mcf { n: 2 }, 0.2).unwrap();
        let map = PullbackMap::new(mf);
        let fu = map.forward(t, &u).unwrap();
        let lhs = map.h_t_inner(t, &fu, &w).unwrap();
        let rhs = dot(&u, &map.adjoint(t, &w).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn norm_equivalence_holds(u in coeffs(9), t in 0.0f64..0.2) {
        let mf = build_metric_family(ReferenceManifold::circle(4).unwrap(), FactorProfile::Mcf { n: 2 }, 0.2).unwrap();
        let (a2, b2) = norm_equivalence_constants(&mf);
        let h = norm_sq(&u);
        let g = mf.h_gt_norm_sq(&u, t).unwrap();
        prop_assert!(a2 * h <= g + 1e-12 && g <= b2 * h + 1e-12);
    }

    #[test]
    fn p_laplace_is_monotone(u in coeffs(9), v in coeffs(9), p in 2.1f64..6.0) {
        let mf = build_metric_family(ReferenceManifold::circle(4).unwrap(), FactorProfile::Constant(1.0), 1.0).unwrap();
        let form = PLaplaceForm::new(&mf, p).unwrap();
        let (mut u, mut v) = (u, v);
        u[0] = 0.0;
        v[0] = 0.0;
        let d: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        let au = form.action(0.0, &u).unwrap();
        let av = form.action(0.0, &v).unwrap();
        let pair: f64 = au.iter().zip(&av).zip(&d).map(|((a, b), x)| (a - b) * x).sum();
        prop_assert!(pair <= 1e-9 * (1.0 + norm_sq(&au) + norm_sq(&av)));
    }

    #[test]
    fn increments_do_not_depend_on_read_order(seed in any::<u64>(), replica in 0u64..1000, step in 0u64..10_000) {
        let s = NoiseStream::new(seed, replica);
        let mut a = vec![0.0; 4];
        let mut b = vec![0.0; 4];
        s.normals_at(step, &mut a);
        s.normals_at(step + 1, &mut b);
        let mut c = vec![0.0; 4];
        s.normals_at(step, &mut c);
        prop_assert_eq!(&a, &c);
        prop_assert_ne!(a, b);
    }

    #[test]
    fn hs_norm_is_sum_of_squares(sigma in prop::collection::vec(0.0f64..3.0, 1..20)) {
        let nm = NoiseModel::new(sigma.clone()).unwrap();
        let s: f64 = sigma.iter().map(|x| x * x).sum();
        prop_assert!((nm.hs_norm_sq() - s).abs() <= 1e-12 * (1.0 + s));
    }

    #[test]
    fn linear_solve_is_homogeneous(amp in -3.0f64..3.0, j in 0usize..9) {
        let mut init = vec![0.0; 9];
        init[j] = 1.0;
        let cfg = SolverConfig::new(1e-3, Scheme::SemiImplicit);
        let base = solve_path(&mcf_circle(2, 0.1, 4, None, init.clone()).unwrap(), &cfg, 0).unwrap();
        let scaled: Vec<f64> = init.iter().map(|x| x * amp).collect();
        let other = solve_path(&mcf_circle(2, 0.1, 4, None, scaled).unwrap(), &cfg, 0).unwrap();
        for (a, b) in base.final_state().iter().zip(other.final_state()) {
            prop_assert!((a * amp - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn heat_energy_never_grows_without_noise(init in coeffs(9)) {
        let sc = static_heat(4, 0.5, 1.0, None, init.clone()).unwrap();
        let tr = solve_path(&sc, &SolverConfig::new(1e-2, Scheme::SemiImplicit), 0).unwrap();
        for w in tr.h0_norm_sq.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn probe_sets_are_nested(n in 1usize..50, extra in 1usize..50, seed in any::<u64>()) {
        let basis = FourierBasis::new(3, 25).unwrap();
        let form = evospde::operators::McfSphereForm::new(2, basis, 0.2).unwrap();
        let small = ProbeSet::random(&form, n, seed);
        let big = ProbeSet::random(&form, n + extra, seed);
        prop_assert_eq!(&small.probes[..], &big.probes[..n]);
        let a = check_weak_monotonicity(&form, &small, 40.0).unwrap().estimate;
        let b = check_weak_monotonicity(&form, &big, 40.0).unwrap().estimate;
        prop_assert!(a <= b);
    }

    #[test]
    fn canonical_config_round_trips(
        modes in 1usize..12,
        dt_exp in 2i32..5,
        seed in 0u64..(i64::MAX as u64),
        replicas in 1usize..10_000,
        gamma in 0.01f64..5.0,
        a_mean in 1.0f64..3.0,
        a_cos in -0.9f64..0.9,
        c_mean in -2.0f64..2.0,
        tanh in any::<bool>(),
    ) {
        let nl = if tanh { "tanh" } else { "linear" };
        let text = format!(
            "[manifold]\nmodes = {modes}\n[operator]\nkind = \"general\"\na_mean = {a_mean:?}\na_cos = {a_cos:?}\nc_mean = {c_mean:?}\n\
             [nonlinearity]\nkind = \"{nl}\"\ngamma = {gamma:?}\n[solver]\ndt = 1e-{dt_exp}\n[run]\nseed = {seed}\nreplicas = {replicas}\n"
        );
        let a: ScenarioConfig = parse_config(&text).unwrap();
        let b = parse_config(&a.to_toml()).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.digest(), b.digest());
    }
}

#[test]
fn level_set_points_sit_on_the_level() {
    let field = LevelSetField::new(1.5, 1.5, 128, 128).unwrap();
    for c in [0.3, 0.45, 0.6] {
        let ls = level_set_components(&field, c).unwrap();
        let (dx, _) = field.spacing();
        for line in &ls.polylines {
            for &(x, y) in line {
                let v = evospde::geometry::levelset::double_well(x, y);
                // linear interpolation along a cell edge: error O(h²) of the second derivative
                assert!((v - c).abs() < 20.0 * dx * dx, "c={c}: f({x},{y}) = {v}");
            }
        }
    }
}

#[test]
fn canonical_noise_is_bounded_by_basel() {
    let mut prev = 0.0;
    for j in [1, 10, 100, 1000] {
        let h = canonical_embedding(j).unwrap().hs_norm_sq();
        assert!(h > prev && h <= std::f64::consts::PI.powi(2) / 6.0);
        prev = h;
    }
}
