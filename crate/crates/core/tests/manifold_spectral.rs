use std::path::Path;

use nilmix::estimate::McConfig;
use nilmix::linalg::QMatrix;
use nilmix::nilmanifold::{Nilmanifold, Point};
use nilmix::observables::{Observable, Phase};
use nilmix::scalar::ratio;
use nilmix::spectral::{diophantine_constant, jordan_split};
use nilmix::spectral::Automorphism;
use nilmix::{NilpotentAlgebra, Rational};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn filiform2() -> Nilmanifold {
    let alg = NilpotentAlgebra::from_sparse(4, &[(0, 1, 2, ratio(1, 1)), (0, 2, 3, ratio(2, 1))]).unwrap();
    Nilmanifold::new(alg, 1.0).unwrap()
}

fn free2() -> Nilmanifold {
    Nilmanifold::new(NilpotentAlgebra::free_two_step_rank3(), 1.0).unwrap()
}

fn manifolds() -> Vec<Nilmanifold> {
    vec![Nilmanifold::torus(3), Nilmanifold::heisenberg(), filiform2(), free2()]
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

fn matrix_file(name: &str) -> QMatrix {
    let text = std::fs::read_to_string(configs().join("automorphisms").join(name)).unwrap();
    let v: toml::Value = toml::from_str(&text).unwrap();
    let rows = v["matrix"].as_array().unwrap();
    QMatrix::from_rows(
        rows.iter()
            .map(|r| {
                r.as_array()
                    .unwrap()
                    .iter()
                    .map(|e| match e {
                        toml::Value::Integer(n) => ratio(*n, 1),
                        toml::Value::Array(p) => ratio(p[0].as_integer().unwrap(), p[1].as_integer().unwrap()),
                        other => panic!("unexpected entry {other}"),
                    })
                    .collect()
            })
            .collect(),
    )
}

fn bundled_automorphisms() -> Vec<(&'static str, Automorphism)> {
    vec![
        ("cat", Automorphism::cat_map()),
        ("identity", Automorphism::from_i64_rows(&Nilmanifold::torus(2), &[&[1, 0], &[0, 1]]).unwrap()),
        ("heisenberg", Automorphism::heisenberg_cat()),
        ("filiform", Automorphism::validate(&filiform2(), matrix_file("filiform_unipotent.toml")).unwrap()),
        ("free2step", Automorphism::validate(&free2(), matrix_file("free2step.toml")).unwrap()),
    ]
}

fn random_lift(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-4.0..4.0)).collect()
}

#[test]
fn reduce_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in manifolds() {
        for _ in 0..10_000 {
            let g = random_lift(&mut rng, m.dim());
            let (p, _) = m.reduce(&g).unwrap();
            assert!(p.coords().iter().all(|&c| (0.0..1.0).contains(&c)));
            let (q, w) = m.reduce(p.coords()).unwrap();
            assert_eq!(p, q);
            assert!(w.iter().all(|n| n.sign() == num_bigint::Sign::NoSign));
        }
    }
}

#[test]
fn torus_reduction_is_the_fractional_part() {
    let t = Nilmanifold::torus(3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let g = random_lift(&mut rng, 3);
        let (p, _) = t.reduce(&g).unwrap();
        for (a, b) in p.coords().iter().zip(&g) {
            assert!((a - b.rem_euclid(1.0)).abs() < 1e-12);
        }
    }
}

fn rational() -> impl Strategy<Value = Rational> {
    (-40i64..=40, 1i64..=9).prop_map(|(n, d)| ratio(n, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn reduction_ignores_lattice_words(
        idx in 0usize..4,
        g in prop::collection::vec(rational(), 6),
        word in prop::collection::vec(-3i64..=3, 6),
    ) {
        let m = &manifolds()[idx];
        let alg = m.algebra();
        let d = m.dim();
        let g = &g[..d];
        let lambda: Vec<Rational> = word[..d].iter().map(|&n| ratio(n, 1)).collect();
        let product = alg
            .second_from_first(&alg.bch(&alg.first_from_second(g).unwrap(), &alg.first_from_second(&lambda).unwrap()).unwrap())
            .unwrap();
        prop_assert_eq!(m.reduce(&product).unwrap().0, m.reduce(g).unwrap().0);
    }

    #[test]
    fn diophantine_matches_naive_search(
        w in prop::collection::vec(-1.0f64..1.0, 2..=3),
        zmax in 1i64..=6,
        c2 in 0.5f64..2.5,
    ) {
        prop_assume!(w.iter().map(|x| x.abs()).sum::<f64>() > 1e-3);
        let report = diophantine_constant(&w, c2, zmax).unwrap();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut best = f64::INFINITY;
        let l = w.len() as u32;
        let side = 2 * zmax + 1;
        for code in 0..side.pow(l) {
            let z: Vec<i64> = (0..l).map(|k| (code / side.pow(k)) % side - zmax).collect();
            if z.iter().all(|&v| v == 0) {
                continue;
            }
            let dot: f64 = z.iter().zip(&w).map(|(&a, b)| a as f64 * b / norm).sum();
            let n2: f64 = z.iter().map(|&a| (a * a) as f64).sum();
            best = best.min(dot.abs() * n2.powf(c2 / 2.0));
        }
        if best <= 1e-12 {
            prop_assert!(report.failure);
        } else {
            prop_assert!((report.c1_hat - best).abs() <= 1e-9 * best.max(1.0), "{} vs {}", report.c1_hat, best);
        }
    }

    #[test]
    fn diophantine_is_monotone_and_scale_free(
        w in prop::collection::vec(0.05f64..1.0, 2..=3),
        s in 0.1f64..10.0,
    ) {
        let mut previous = f64::INFINITY;
        for zmax in [2, 5, 11, 23] {
            let r = diophantine_constant(&w, 1.0, zmax).unwrap();
            prop_assert!(r.c1_hat <= previous + 1e-15);
            previous = r.c1_hat;
            let scaled: Vec<f64> = w.iter().map(|x| s * x).collect();
            let q = diophantine_constant(&scaled, 1.0, zmax).unwrap();
            prop_assert!((q.c1_hat - r.c1_hat).abs() <= 1e-9 * r.c1_hat.max(1e-9));
            prop_assert_eq!(q.argmin_z, r.argmin_z);
        }
    }
}

#[test]
fn golden_direction_approaches_the_markov_constant() {
    // |q φ - p| q → 1/√5 along Fibonacci convergents; the unit-normalized,
    // Euclidean version tends to 1/(√5 · |(1, φ)| / |(1, φ)|) = 1/√5 as well.
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let r = diophantine_constant(&[1.0, phi], 1.0, 10_000).unwrap();
    assert!((r.c1_hat - 1.0 / 5f64.sqrt()).abs() < 0.01, "{}", r.c1_hat);
    let fib = [1i64, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610, 987, 1597, 2584, 4181, 6765];
    let (a, b) = (r.argmin_z[0].abs(), r.argmin_z[1].abs());
    assert!(fib.contains(&a) && fib.contains(&b), "{:?}", r.argmin_z);
}

#[test]
fn rational_direction_fails() {
    let r = diophantine_constant(&[1.0, -1.0], 1.0, 10).unwrap();
    assert!(r.failure);
    assert_eq!(r.argmin_z, vec![1, 1]);
}

#[test]
fn local_distance_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for m in manifolds() {
        for _ in 0..100 {
            let x = m.haar_sample(&mut rng);
            let y = m.haar_sample(&mut rng);
            let (a, b) = (m.local_distance(&x, &y), m.local_distance(&y, &x));
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            assert_eq!(m.local_distance(&x, &x), 0.0);
        }
    }
}

#[test]
fn jordan_bases_conjugate_to_the_block_matrix() {
    for (name, aut) in bundled_automorphisms() {
        let split = jordan_split(&aut).unwrap();
        let b = split.basis_matrix();
        let j = split.block_matrix();
        let a = aut.matrix().to_f64();
        let residual = (&a * &b - &b * &j).amax();
        assert!(residual <= 1e-10, "{name}: {residual}");
        assert_eq!(b.ncols(), aut.dim(), "{name}");
    }
}

#[test]
fn ergodicity_agrees_with_root_of_unity_probe() {
    for (name, aut) in bundled_automorphisms() {
        let ergodic = aut.is_ergodic();
        assert_eq!(aut.root_of_unity_probe(), !ergodic, "{name}");
        let expected = !matches!(name, "identity" | "filiform");
        assert_eq!(ergodic, expected, "{name}");
    }
}

#[test]
fn lattice_validation_rejects_the_uncorrected_lift() {
    let h = Nilmanifold::heisenberg();
    let err = Automorphism::from_i64_rows(&h, &[&[2, 1, 0], &[1, 1, 0], &[0, 0, 1]]).unwrap_err();
    assert!(err.to_string().contains("lattice"), "{err}");
    let err = Automorphism::from_i64_rows(&Nilmanifold::torus(2), &[&[2, 0], &[0, 1]]).unwrap_err();
    assert!(err.to_string().contains("det"), "{err}");
}

fn z_gap(a: nilmix::estimate::Estimate, b: nilmix::estimate::Estimate) -> f64 {
    (a.mean - b.mean).abs() / a.se.hypot(b.se)
}

#[test]
fn haar_measure_is_translation_and_automorphism_invariant() {
    let mc = McConfig::new(21, 4);
    let heis = Automorphism::heisenberg_cat();
    let m = heis.manifold().clone();
    let bump = Observable::bump(&m, &Point::new(&[0.3, 0.6, 0.4]).unwrap(), 0.4, 3).unwrap();
    let h = [0.37, -1.21, 0.58];
    let base = mc.estimate(1, 200_000, |rng| bump.eval(&m.haar_sample(rng)));
    let moved = mc.estimate(2, 200_000, |rng| bump.eval(&m.translate(&h, &m.haar_sample(rng)).unwrap()));
    let pushed = mc.estimate(3, 200_000, |rng| bump.eval(&heis.step(&m.haar_sample(rng), false)));
    assert!(z_gap(base, moved) <= 3.0, "translate {base:?} {moved:?}");
    assert!(z_gap(base, pushed) <= 3.0, "automorphism {base:?} {pushed:?}");
}

#[test]
fn observables_are_lattice_invariant() {
    let m = Nilmanifold::heisenberg();
    let fs = [
        Observable::character(&m, &[2, -1], Phase::Cos).unwrap(),
        Observable::character(&m, &[1, 3], Phase::Sin).unwrap(),
        Observable::bump(&m, &Point::new(&[0.95, 0.05, 0.5]).unwrap(), 0.35, 3).unwrap(),
        Observable::bump(&m, &Point::new(&[0.2, 0.7, 0.9]).unwrap(), 0.3, 2).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10_000 {
        let g: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let reduced = m.reduce(&g).unwrap().0;
        for f in &fs {
            let gap = (f.eval(&reduced) - f.eval_lift(&g).unwrap()).abs();
            assert!(gap <= 1e-10, "{gap} at {g:?}");
        }
    }
}

#[test]
fn distinct_characters_are_orthogonal() {
    let m = Nilmanifold::torus(2);
    let mc = McConfig::new(4, 4);
    let pairs = [([1, 0], [0, 1]), ([1, 1], [2, -1]), ([3, 2], [1, 0])];
    for (i, (a, b)) in pairs.iter().enumerate() {
        let fa = Observable::character(&m, a, Phase::Cos).unwrap();
        let fb = Observable::character(&m, b, Phase::Cos).unwrap();
        let est = mc.estimate(100 + i as u64, 100_000, |rng| {
            let x = m.haar_sample(rng);
            fa.eval(&x) * fb.eval(&x)
        });
        assert!(est.agrees_with(0.0, 3.0), "{a:?} {b:?}: {est:?}");
    }
}

#[test]
fn bump_mass_is_stable_under_recentering() {
    let m = Nilmanifold::heisenberg();
    let mc = McConfig::new(9, 4);
    let centers = [[0.3, 0.6, 0.4], [0.9, 0.1, 0.95], [0.5, 0.5, 0.0]];
    let ests: Vec<_> = centers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let f = Observable::bump(&m, &Point::new(c).unwrap(), 0.3, 3).unwrap();
            mc.estimate(200 + i as u64, 200_000, |rng| f.eval(&m.haar_sample(rng)))
        })
        .collect();
    for e in &ests[1..] {
        assert!(z_gap(ests[0], *e) <= 3.0, "{:?} vs {e:?}", ests[0]);
    }
}
