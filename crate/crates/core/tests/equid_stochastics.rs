use nilmix::equidistribution::{box_average, dichotomy_probe, unstable_average, BoxMap, Dichotomy, UnstableChart};
use nilmix::estimate::{Estimate, McConfig};
use nilmix::nilmanifold::{Nilmanifold, Point};
use nilmix::observables::{Observable, Phase};
use nilmix::spectral::Automorphism;
use nilmix::stochastics::{
    character_product_integral, clt_experiment, coboundary_make, correlation, green_kubo, multi_correlation, CltConfig,
    OrbitEngine, WindowRule,
};
use nilmix::NilpotentAlgebra;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn z_gap(a: Estimate, b: Estimate) -> f64 {
    (a.mean - b.mean).abs() / a.se.hypot(b.se)
}

#[test]
fn box_average_ignores_coordinate_order() {
    let m = Nilmanifold::heisenberg();
    let f = Observable::bump(&m, &Point::new(&[0.3, 0.6, 0.4]).unwrap(), 0.4, 3).unwrap();
    let bx = BoxMap::new(vec![0.1, 0.2, 0.0], vec![vec![1.0, 0.3, 0.0], vec![0.2, 1.0, 0.5], vec![0.0, 0.0, 1.0]], vec![1.5, 0.7, 2.0])
        .unwrap();
    let g = Point::new(&[0.25, 0.5, 0.75]).unwrap();
    let u = [0.05, -0.1, 0.2];
    let mc = McConfig::new(31, 4);
    let base = box_average(&f, &bx, &u, &g, 200_000, &mc, 1).unwrap();
    for (i, perm) in [[1, 0, 2], [2, 1, 0], [1, 2, 0]].iter().enumerate() {
        let p = box_average(&f, &bx.permuted(perm).unwrap(), &u, &g, 200_000, &mc, 2 + i as u64).unwrap();
        assert!(z_gap(base, p) <= 3.0, "{perm:?}: {base:?} vs {p:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dichotomy_outcomes_are_self_consistent(
        w1 in prop::collection::vec(-1.0f64..1.0, 3),
        w2 in prop::collection::vec(-1.0f64..1.0, 3),
        t1 in 0.5f64..60.0,
        t2 in 0.5f64..60.0,
        two in any::<bool>(),
        delta in 0.12f64..0.45,
    ) {
        let (dirs, sides) = if two { (vec![w1, w2], vec![t1, t2]) } else { (vec![w1], vec![t1]) };
        let Ok(bx) = BoxMap::new(vec![0.0; 3], dirs, sides) else { return Ok(()) };
        let report = dichotomy_probe(&bx, delta, 1.0, 1.0, 1.0, 2).unwrap();
        let zmax = report.search_bound;
        match &report.outcome {
            Dichotomy::Obstruction { z } => prop_assert!(report.admits(z), "{z:?} breaks its own bounds"),
            Dichotomy::Equidistributed => {
                for a in -zmax..=zmax {
                    for b in -zmax..=zmax {
                        prop_assert!(!report.admits(&[a, b]), "missed ({a}, {b})");
                    }
                }
            }
        }
    }
}

#[test]
fn unstable_chart_at_time_zero_matches_the_linear_box() {
    let cat = Automorphism::cat_map();
    let m = cat.manifold().clone();
    let chart = UnstableChart::new(&cat, vec![2.0]).unwrap();
    let bx = chart.linear_box().unwrap();
    let mc = McConfig::new(5, 4);
    let g = Point::new(&[0.1, 0.2]).unwrap();
    let fs = [
        Observable::character(&m, &[1, 1], Phase::Cos).unwrap(),
        Observable::bump(&m, &Point::new(&[0.4, 0.4]).unwrap(), 0.3, 3).unwrap(),
    ];
    for (i, f) in fs.iter().enumerate() {
        let a = unstable_average(f, &chart, &[0.0, 0.0], &g, 0, 100_000, &mc, 10 + i as u64).unwrap();
        let b = box_average(f, &bx, &[0.0, 0.0], &g, 100_000, &mc, 20 + i as u64).unwrap();
        // a one-dimensional stratified estimate of a smooth integrand has a tiny SE
        assert!((a.mean - b.mean).abs() <= 3.0 * a.se.hypot(b.se) + 1e-9, "{a:?} vs {b:?}");
    }
}

#[test]
fn unstable_chart_preserves_volume() {
    let alg = NilpotentAlgebra::free_two_step_rank3();
    let m = Nilmanifold::new(alg, 1.0).unwrap();
    let half = nilmix::scalar::ratio(1, 2);
    let i = |n: i64| nilmix::scalar::ratio(n, 1);
    let rows = vec![
        vec![i(0), i(0), i(1), i(0), i(0), i(0)],
        vec![i(1), i(0), i(-6), i(0), i(0), i(0)],
        vec![i(0), i(1), i(5), i(0), i(0), i(0)],
        vec![i(0), i(0), i(0), i(0), i(-1), i(0)],
        vec![i(0), i(0), half, i(0), i(0), i(-1)],
        vec![i(0), i(0), i(0), i(1), i(5), i(6)],
    ];
    let aut = Automorphism::validate(&m, nilmix::linalg::QMatrix::from_rows(rows)).unwrap();
    let chart = UnstableChart::new(&aut, vec![1.0; 3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let b: Vec<f64> = (0..chart.dim()).map(|_| rng.random_range(0.0..1.0)).collect();
        let j = chart.jacobian_det(&b, 1e-4);
        assert!((j - 1.0).abs() < 1e-6, "jacobian {j} at {b:?}");
    }
}

#[test]
fn orbit_powers_compose() {
    let engine = OrbitEngine::new(&Automorphism::heisenberg_cat(), 64);
    let m = engine.automorphism().manifold().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let x = m.haar_sample(&mut rng);
        assert_eq!(engine.apply(0, &x).unwrap(), x);
        let n = rng.random_range(-8i64..=8);
        let k = rng.random_range(-8i64..=8);
        let a = engine.apply(n, &engine.apply(k, &x).unwrap()).unwrap();
        let b = engine.apply(n + k, &x).unwrap();
        let gap = m.local_distance(&a, &b);
        assert!(gap <= 1e-9, "n={n} k={k}: {gap}");
    }
    assert!(engine.apply(65, &m.haar_sample(&mut rng)).is_err());
}

#[test]
fn automorphism_preserves_expectations() {
    let engine = OrbitEngine::new(&Automorphism::heisenberg_cat(), 64);
    let m = engine.automorphism().manifold().clone();
    let f = Observable::bump(&m, &Point::new(&[0.7, 0.2, 0.5]).unwrap(), 0.35, 3).unwrap();
    let mc = McConfig::new(12, 4);
    let base = mc.estimate(1, 200_000, |rng| f.eval(&m.haar_sample(rng)));
    for n in [1, 3, 7] {
        let pushed = mc.estimate(2 + n as u64, 200_000, |rng| f.eval(&engine.apply(n, &m.haar_sample(rng)).unwrap()));
        assert!(z_gap(base, pushed) <= 3.0, "n={n}: {base:?} vs {pushed:?}");
    }
}

#[test]
fn two_factor_multi_correlation_is_the_correlation() {
    let engine = OrbitEngine::new(&Automorphism::heisenberg_cat(), 64);
    let m = engine.automorphism().manifold().clone();
    let f0 = Observable::bump(&m, &Point::new(&[0.3, 0.6, 0.4]).unwrap(), 0.4, 3).unwrap();
    let f1 = Observable::character(&m, &[1, 2], Phase::Sin).unwrap();
    let mc = McConfig::new(77, 3);
    for n in [1, 4] {
        let a = correlation(&engine, &f0, &f1, n, 30_000, &mc, 9).unwrap();
        let b = multi_correlation(&engine, &[f0.clone(), f1.clone()], &[0, n], 30_000, &mc, 9).unwrap();
        assert_eq!(a, b);
    }
}

fn pull(a: [[i64; 2]; 2], m: [i64; 2], n: u32) -> [i64; 2] {
    // (Aᵀ)^n m by repeated multiplication
    let mut v = m;
    for _ in 0..n {
        v = [a[0][0] * v[0] + a[1][0] * v[1], a[0][1] * v[0] + a[1][1] * v[1]];
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn character_oracle_matches_integer_prediction(
        m in prop::array::uniform2(-6i64..=6),
        k in prop::array::uniform2(-6i64..=6),
        n in 0u32..8,
    ) {
        prop_assume!(m != [0, 0] && k != [0, 0]);
        let cat = Automorphism::cat_map();
        let exact = character_product_integral(
            &cat,
            &[(m.to_vec(), Phase::Cos, 0), (k.to_vec(), Phase::Cos, n as i64)],
        )
        .unwrap();
        let pulled = pull([[2, 1], [1, 1]], k, n);
        let expected = 0.5 * (f64::from(pulled == m) + f64::from(pulled == [-m[0], -m[1]]));
        prop_assert_eq!(exact, expected);
    }
}

#[test]
fn green_kubo_is_one_half_for_every_window() {
    let engine = OrbitEngine::with_default_horizon(&Automorphism::cat_map());
    let f = Observable::character(engine.automorphism().manifold(), &[1, 0], Phase::Cos).unwrap();
    let gk = green_kubo(&engine, &f, 6, WindowRule::Fixed, 100_000, &McConfig::new(8, 4), 3).unwrap();
    for (j, est) in gk.by_window.iter().enumerate().skip(1) {
        assert!(est.agrees_with(0.5, 3.0), "J={j}: {est:?}");
    }
    assert!(gk.sigma2 >= 0.0);
}

#[test]
fn coboundary_sums_telescope() {
    let engine = OrbitEngine::with_default_horizon(&Automorphism::cat_map());
    let m = engine.automorphism().manifold().clone();
    let psi = Observable::bump(&m, &Point::new(&[0.3, 0.6]).unwrap(), 0.3, 3).unwrap();
    let f = coboundary_make(&psi, engine.automorphism());
    let cfg = CltConfig {
        schedule: vec![16, 64, 256, 1024],
        paths: 4000,
        window: 8,
        window_rule: WindowRule::Adaptive,
        gk_budget: 20_000,
        mc: McConfig::new(4, 4),
    };
    let report = clt_experiment(&engine, &f, &cfg).unwrap();
    assert!(report.sigma2_hat >= 0.0);
    for ks in report.ks_statistics.iter().flatten() {
        assert!((0.0..=1.0).contains(ks));
    }
    let xs: Vec<f64> = cfg.schedule.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = report.empirical_variances.iter().map(|v| v.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!(slope <= -0.8, "slope {slope}");
}

#[test]
fn estimates_depend_only_on_seed_and_workers() {
    let engine = OrbitEngine::with_default_horizon(&Automorphism::heisenberg_cat());
    let m = engine.automorphism().manifold().clone();
    let f = Observable::bump(&m, &Point::new(&[0.3, 0.6, 0.4]).unwrap(), 0.4, 3).unwrap();
    let run = |seed, workers| correlation(&engine, &f, &f, 2, 20_000, &McConfig::new(seed, workers), 4).unwrap();
    assert_eq!(run(1, 3), run(1, 3));
    assert_ne!(run(1, 3), run(2, 3));
}
