use nalgebra::{DMatrix, DVector};
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{span_basis, span_contains, QMatrix};
use crate::scalar::{approx_rational, Rational, Scalar};

use super::Automorphism;

/// Smallest rational `Dα`-invariant ideal containing the real subspace spanned by `w`.
///
/// Each primary component met by `w` contributes either the rational span of
/// the `Dα`-orbit of its projection (when that span is recognized as rational
/// with small denominators and verified exactly) or `ker p(Dα)^k` for the least
/// `k` annihilating the projection. The sum is then saturated under brackets.
pub fn rational_hull(aut: &Automorphism, w: &[Vec<f64>]) -> Result<Vec<Vec<Rational>>> {
    let d = aut.dim();
    for v in w {
        aut.manifold().check_dim(v)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteCoordinate);
        }
    }
    let m = aut.matrix();
    let mf = m.to_f64();
    let factors = aut.charpoly().factor();
    let kernels: Vec<Vec<Vec<Rational>>> =
        factors.iter().map(|(p, mult)| m.eval_poly(&p.pow(*mult)).nullspace()).collect();
    let all_cols: Vec<Vec<Rational>> = kernels.iter().flatten().cloned().collect();
    let full = QMatrix::from_columns(&all_cols).to_f64();
    let full_inv = full.clone().try_inverse().expect("primary decomposition spans");
    let mut generators: Vec<Vec<Rational>> = Vec::new();
    let mut offset = 0;
    for ((p, mult), kernel) in factors.iter().zip(&kernels) {
        let k = kernel.len();
        let pieces: Vec<DVector<f64>> = w
            .iter()
            .map(|v| {
                let coords = &full_inv * DVector::from_column_slice(v);
                let mut local = DVector::zeros(all_cols.len());
                local.rows_mut(offset, k).copy_from(&coords.rows(offset, k));
                &full * local
            })
            .filter(|piece| piece.norm() > 1e-9)
            .collect();
        offset += k;
        if pieces.is_empty() {
            continue;
        }
        if let Some(rational) = rational_orbit_span(m, &mf, &pieces) {
            generators.extend(rational);
            continue;
        }
        let mut chosen = kernel.clone();
        for e in 1..=*mult {
            let annihilator = m.eval_poly(&p.pow(e)).to_f64();
            if pieces.iter().all(|v| (&annihilator * v).norm() <= 1e-8 * v.norm().max(1.0)) {
                chosen = m.eval_poly(&p.pow(e)).nullspace();
                break;
            }
        }
        generators.extend(chosen);
    }
    Ok(saturate(aut, generators, d))
}

/// Adds brackets with basis vectors until the span stops growing.
fn saturate(aut: &Automorphism, generators: Vec<Vec<Rational>>, d: usize) -> Vec<Vec<Rational>> {
    let alg = aut.manifold().algebra();
    let mut basis = span_basis(&generators, d);
    loop {
        let mut extended = basis.clone();
        for v in &basis {
            for i in 0..d {
                let mut e = vec![Rational::zero(); d];
                e[i] = Rational::from_i64(1);
                let b: Vec<Rational> = alg.bracket_raw(&e, v).into_iter().collect();
                if b.iter().any(|c| !c.is_zero()) && !span_contains(&extended, &b) {
                    extended.push(b);
                }
            }
        }
        let next = span_basis(&extended, d);
        if next.len() == basis.len() {
            return basis;
        }
        basis = next;
    }
}

/// Rational basis of the `Dα`-orbit span of `pieces`, if the float row-echelon
/// form has small-denominator entries and the rational span checks out exactly.
fn rational_orbit_span(m: &QMatrix, mf: &DMatrix<f64>, pieces: &[DVector<f64>]) -> Option<Vec<Vec<Rational>>> {
    let d = mf.nrows();
    let mut vectors: Vec<DVector<f64>> = Vec::new();
    for v in pieces {
        let mut cur = v.normalize();
        for _ in 0..d {
            vectors.push(cur.clone());
            cur = (mf * &cur).normalize();
        }
    }
    let a = DMatrix::from_columns(&vectors).transpose();
    let rows = float_rref(a, 1e-9);
    let rational: Option<Vec<Vec<Rational>>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| approx_rational(x, 1e-9, 1000)).collect())
        .collect();
    let rational = rational?;
    let invariant = rational.iter().all(|r| span_contains(&rational, &m.mul_vec(r)));
    if !invariant {
        return None;
    }
    let rf = DMatrix::from_fn(d, rational.len(), |i, j| rational[j][i].to_float());
    let proj = &rf * rf.clone().pseudo_inverse(1e-12).ok()?;
    let contains = pieces.iter().all(|v| (v - &proj * v).norm() <= 1e-8 * v.norm());
    contains.then_some(rational)
}

/// Row echelon form with unit pivots; rows with no entry above `tol` are dropped.
fn float_rref(mut a: DMatrix<f64>, tol: f64) -> Vec<Vec<f64>> {
    let (nr, nc) = a.shape();
    let mut row = 0;
    for col in 0..nc {
        if row == nr {
            break;
        }
        let (p, best) = (row..nr).map(|r| (r, a[(r, col)].abs())).fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol {
            continue;
        }
        a.swap_rows(row, p);
        let pivot = a[(row, col)];
        for c in 0..nc {
            a[(row, c)] /= pivot;
        }
        for r in 0..nr {
            if r != row {
                let f = a[(r, col)];
                if f != 0.0 {
                    for c in 0..nc {
                        let v = a[(row, c)];
                        a[(r, c)] -= f * v;
                    }
                }
            }
        }
        row += 1;
    }
    (0..row).map(|r| a.row(r).iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nilmanifold::Nilmanifold;
    use crate::spectral::jordan_split;

    #[test]
    fn cat_map_unstable_line_fills_the_torus() {
        let a = Automorphism::cat_map();
        let s = jordan_split(&a).unwrap();
        assert_eq!(rational_hull(&a, &s.unstable_basis).unwrap().len(), 2);
    }

    #[test]
    fn heisenberg_unstable_line_fills_the_algebra() {
        let a = Automorphism::heisenberg_cat();
        let s = jordan_split(&a).unwrap();
        assert_eq!(rational_hull(&a, &s.unstable_basis).unwrap().len(), 3);
    }

    #[test]
    fn rational_ideal_is_fixed() {
        let a = Automorphism::heisenberg_cat();
        let m = rational_hull(&a, &[vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(m, vec![vec![Rational::zero(), Rational::zero(), Rational::from_i64(1)]]);
        let id = Automorphism::from_i64_rows(&Nilmanifold::torus(2), &[&[1, 0], &[0, 1]]).unwrap();
        assert_eq!(rational_hull(&id, &[vec![1.0, 2.0]]).unwrap().len(), 1);
    }
}
