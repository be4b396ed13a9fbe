use nalgebra::DMatrix;
use nilmix::linalg::span_basis;
use nilmix::scalar::ratio;
use nilmix::{NilpotentAlgebra, Rational};
use proptest::prelude::*;

fn algebras() -> Vec<NilpotentAlgebra> {
    vec![
        NilpotentAlgebra::heisenberg(),
        NilpotentAlgebra::filiform4(),
        NilpotentAlgebra::free_two_step_rank3(),
        NilpotentAlgebra::abelian(3),
    ]
}

fn rational() -> impl Strategy<Value = Rational> {
    (-20i64..=20, 1i64..=7).prop_map(|(n, d)| ratio(n, d))
}

fn rvec(d: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec(rational(), d)
}

fn fvec(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bch_is_associative_exactly(idx in 0usize..4, x in rvec(6), y in rvec(6), z in rvec(6)) {
        let alg = &algebras()[idx];
        let d = alg.dim();
        let (x, y, z) = (&x[..d], &y[..d], &z[..d]);
        let left = alg.bch(&alg.bch(x, y).unwrap(), z).unwrap();
        let right = alg.bch(x, &alg.bch(y, z).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn bch_float_defect_is_tiny(idx in 0usize..4, x in fvec(6), y in fvec(6), z in fvec(6)) {
        let alg = &algebras()[idx];
        let d = alg.dim();
        let (x, y, z) = (&x[..d], &y[..d], &z[..d]);
        let left = alg.bch(&alg.bch(x, y).unwrap(), z).unwrap();
        let right = alg.bch(x, &alg.bch(y, z).unwrap()).unwrap();
        let defect = left.iter().zip(&right).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(defect <= 1e-10, "defect {defect}");
    }

    #[test]
    fn zero_is_a_two_sided_identity(idx in 0usize..4, x in rvec(6)) {
        let alg = &algebras()[idx];
        let x = &x[..alg.dim()];
        let zero = vec![ratio(0, 1); alg.dim()];
        prop_assert_eq!(alg.bch(x, &zero).unwrap().to_vec(), x.to_vec());
        prop_assert_eq!(alg.bch(&zero, x).unwrap().to_vec(), x.to_vec());
    }

    #[test]
    fn inverse_is_negation(idx in 0usize..4, x in rvec(6)) {
        let alg = &algebras()[idx];
        let x = &x[..alg.dim()];
        let neg: Vec<Rational> = x.iter().map(|v| -v.clone()).collect();
        prop_assert!(alg.bch(x, &neg).unwrap().iter().all(|v| *v == ratio(0, 1)));
    }

    #[test]
    fn coordinate_kinds_round_trip(idx in 0usize..4, t in rvec(6)) {
        let alg = &algebras()[idx];
        let t = &t[..alg.dim()];
        let x = alg.first_from_second(t).unwrap();
        prop_assert_eq!(alg.second_from_first(&x).unwrap().to_vec(), t.to_vec());
    }

    #[test]
    fn exact_and_float_agree(idx in 0usize..4, x in rvec(6), y in rvec(6)) {
        let alg = &algebras()[idx];
        let d = alg.dim();
        let exact = alg.bch(&x[..d], &y[..d]).unwrap();
        let xf: Vec<f64> = x[..d].iter().map(to_f64).collect();
        let yf: Vec<f64> = y[..d].iter().map(to_f64).collect();
        let float = alg.bch(&xf, &yf).unwrap();
        for (e, f) in exact.iter().zip(&float) {
            prop_assert!((to_f64(e) - f).abs() <= 1e-12 * (1.0 + f.abs()));
        }
    }

    #[test]
    fn heisenberg_matches_unipotent_matrices(x in fvec(3), y in fvec(3)) {
        let alg = NilpotentAlgebra::heisenberg();
        check_representation(&alg, &x, &y, heisenberg_rep);
    }

    #[test]
    fn filiform_matches_unipotent_matrices(x in fvec(4), y in fvec(4)) {
        let alg = NilpotentAlgebra::filiform4();
        check_representation(&alg, &x, &y, filiform_rep);
    }
}

fn to_f64(q: &Rational) -> f64 {
    num_traits::ToPrimitive::to_f64(q).unwrap()
}

/// `x1 E12 + x2 E23 + x3 E13`: `[E12, E23] = E13`.
fn heisenberg_rep(x: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(3, 3);
    m[(0, 1)] = x[0];
    m[(1, 2)] = x[1];
    m[(0, 2)] = x[2];
    m
}

/// `e1 = E12 + E23`, `e2 = E34`, `e3 = E24`, `e4 = E14`.
fn filiform_rep(x: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(4, 4);
    m[(0, 1)] = x[0];
    m[(1, 2)] = x[0];
    m[(2, 3)] = x[1];
    m[(1, 3)] = x[2];
    m[(0, 3)] = x[3];
    m
}

fn expm(n: &DMatrix<f64>) -> DMatrix<f64> {
    let k = n.nrows();
    let mut out = DMatrix::identity(k, k);
    let mut term = DMatrix::identity(k, k);
    for i in 1..=k {
        term = &term * n / i as f64;
        out += &term;
    }
    out
}

fn check_representation(alg: &NilpotentAlgebra, x: &[f64], y: &[f64], rep: fn(&[f64]) -> DMatrix<f64>) {
    // the map is a Lie homomorphism on basis brackets
    let d = alg.dim();
    for i in 0..d {
        for j in 0..d {
            let mut ei = vec![0.0; d];
            let mut ej = vec![0.0; d];
            ei[i] = 1.0;
            ej[j] = 1.0;
            let (a, b) = (rep(&ei), rep(&ej));
            let commutator = &a * &b - &b * &a;
            let image = rep(&alg.bracket(&ei, &ej).unwrap());
            assert!((commutator - image).amax() < 1e-14, "bracket ({i},{j})");
        }
    }
    let lhs = expm(&rep(&alg.bch(x, y).unwrap()));
    let rhs = expm(&rep(x)) * expm(&rep(y));
    assert!((lhs - rhs).amax() <= 1e-12 * 50.0, "group law mismatch");
}

#[test]
fn lower_central_series_matches_bracket_saturation() {
    for alg in algebras() {
        let d = alg.dim();
        let basis: Vec<Vec<Rational>> = (0..d)
            .map(|i| (0..d).map(|k| ratio((i == k) as i64, 1)).collect())
            .collect();
        let mut term = basis.clone();
        let mut dims = vec![];
        while !term.is_empty() {
            dims.push(term.len());
            let mut brackets = vec![];
            for e in &basis {
                for t in &term {
                    brackets.push(alg.bracket(e, t).unwrap().to_vec());
                }
            }
            term = span_basis(&brackets, d);
        }
        assert_eq!(alg.lcs_dims(), dims);
        assert_eq!(alg.step(), dims.len());
    }
}

#[test]
fn structure_constants_are_antisymmetric_and_satisfy_jacobi() {
    for alg in algebras() {
        let d = alg.dim();
        let e = |i: usize| -> Vec<Rational> { (0..d).map(|k| ratio((i == k) as i64, 1)).collect() };
        for i in 0..d {
            for j in 0..d {
                let a = alg.bracket(&e(i), &e(j)).unwrap();
                let b = alg.bracket(&e(j), &e(i)).unwrap();
                assert!(a.iter().zip(&b).all(|(p, q)| *p == -q.clone()));
                for k in 0..d {
                    let t1 = alg.bracket(&e(i), &alg.bracket(&e(j), &e(k)).unwrap()).unwrap();
                    let t2 = alg.bracket(&e(j), &alg.bracket(&e(k), &e(i)).unwrap()).unwrap();
                    let t3 = alg.bracket(&e(k), &alg.bracket(&e(i), &e(j)).unwrap()).unwrap();
                    for c in 0..d {
                        assert_eq!(t1[c].clone() + t2[c].clone() + t3[c].clone(), ratio(0, 1));
                    }
                }
            }
        }
    }
}
