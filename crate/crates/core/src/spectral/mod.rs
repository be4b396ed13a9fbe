//! Lattice-preserving automorphisms and their spectral data.

mod diophantine;
mod hull;
mod jordan;

pub use diophantine::{diophantine_constant, generic_direction, DiophantineReport};
pub use hull::rational_hull;
pub use jordan::{factor_table, jordan_split, BlockKind, JordanBlock, JordanSplit};

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::{linear_in_second, CompiledMap};
use crate::linalg::QMatrix;
use crate::nilmanifold::{Nilmanifold, Point};
use crate::poly::{cyclotomic, cyclotomic_orders_up_to_degree, Poly};
use crate::scalar::{Coords, Rational, Scalar};

/// An automorphism `α` of `X`, given by `Dα` acting on column vectors of
/// first-kind coordinates (column `j` is the image of `e_j`).
#[derive(Clone, Debug)]
pub struct Automorphism {
    manifold: Nilmanifold,
    matrix: QMatrix,
    inverse: QMatrix,
    forward_second: Arc<CompiledMap>,
    backward_second: Arc<CompiledMap>,
    charpoly: Poly,
    abelianization: QMatrix,
}

/// Outcome of the exact root-of-unity test on the abelianization.
#[derive(Clone, Debug, Serialize)]
pub struct ErgodicityCertificate {
    pub ergodic: bool,
    pub abelianization_charpoly: String,
    /// Orders `n` whose cyclotomic polynomial was tested for divisibility.
    pub orders_checked: Vec<u64>,
    /// First order whose cyclotomic polynomial divides, if any.
    pub dividing_order: Option<u64>,
}

impl Automorphism {
    /// Validates bracket preservation, `|det| = 1` and `α(Λ) = Λ`, in that order.
    pub fn validate(manifold: &Nilmanifold, matrix: QMatrix) -> Result<Self> {
        let d = manifold.dim();
        if matrix.rows() != d || matrix.cols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.rows().max(matrix.cols()) });
        }
        let alg = manifold.algebra();
        let cols: Vec<Vec<Rational>> = (0..d).map(|j| matrix.column(j)).collect();
        for i in 0..d {
            for j in i + 1..d {
                let lhs = matrix.mul_vec(&alg.bracket_raw(&unit(d, i), &unit(d, j)));
                let rhs = alg.bracket_raw(&cols[i], &cols[j]);
                if lhs.iter().zip(rhs.iter()).any(|(a, b)| a != b) {
                    return Err(Error::BracketNotPreserved { i: i + 1, j: j + 1 });
                }
            }
        }
        let det = matrix.det();
        if det.abs() != Rational::from_i64(1) {
            return Err(Error::NotUnimodular { det: det.to_string() });
        }
        let inverse = matrix.inverse().expect("unimodular matrices are invertible");
        for (m, name) in [(&matrix, "alpha"), (&inverse, "alpha^-1")] {
            for j in 0..d {
                let t = alg.second_from_first_raw(&m.column(j));
                if t.iter().any(|c| !c.is_integer()) {
                    return Err(Error::LatticeNotPreserved { generator: j + 1, map: name });
                }
            }
        }
        let l = alg.abelian_rank();
        let abelianization = matrix.submatrix(0..l, 0..l);
        let rows = |m: &QMatrix| -> Vec<Vec<Rational>> {
            (0..d).map(|r| (0..d).map(|c| m[(r, c)].clone()).collect()).collect()
        };
        let forward_second = Arc::new(linear_in_second(alg.exact_tables(), &rows(&matrix)));
        let backward_second = Arc::new(linear_in_second(alg.exact_tables(), &rows(&inverse)));
        Ok(Automorphism {
            manifold: manifold.clone(),
            forward_second,
            backward_second,
            charpoly: matrix.charpoly(),
            matrix,
            inverse,
            abelianization,
        })
    }

    pub fn from_i64_rows(manifold: &Nilmanifold, rows: &[&[i64]]) -> Result<Self> {
        Self::validate(manifold, QMatrix::from_i64_rows(rows))
    }

    /// The hyperbolic toral automorphism `[[2,1],[1,1]]`.
    pub fn cat_map() -> Self {
        Self::from_i64_rows(&Nilmanifold::torus(2), &[&[2, 1], &[1, 1]]).expect("valid")
    }

    /// Lift of the cat map to the Heisenberg manifold: `e1 ↦ 2e1 + e2`,
    /// `e2 ↦ e1 + e2 + ½e3`, `e3 ↦ e3`.
    pub fn heisenberg_cat() -> Self {
        let half = crate::scalar::ratio(1, 2);
        let q = |n: i64| Rational::from_i64(n);
        let m = QMatrix::from_rows(vec![
            vec![q(2), q(1), q(0)],
            vec![q(1), q(1), q(0)],
            vec![q(0), half, q(1)],
        ]);
        Self::validate(&Nilmanifold::heisenberg(), m).expect("valid")
    }

    pub fn manifold(&self) -> &Nilmanifold {
        &self.manifold
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim()
    }

    pub fn matrix(&self) -> &QMatrix {
        &self.matrix
    }

    pub fn inverse_matrix(&self) -> &QMatrix {
        &self.inverse
    }

    pub fn charpoly(&self) -> &Poly {
        &self.charpoly
    }

    /// Induced integer matrix on `L(G) / [L(G), L(G)]`.
    pub fn abelianization_matrix(&self) -> &QMatrix {
        &self.abelianization
    }

    pub fn abelianization_charpoly(&self) -> Poly {
        self.abelianization.charpoly()
    }

    /// Exact ergodicity test: no cyclotomic factor divides the characteristic
    /// polynomial of the abelianization.
    pub fn ergodicity(&self) -> ErgodicityCertificate {
        let p = self.abelianization_charpoly();
        let orders = cyclotomic_orders_up_to_degree(p.degree());
        let dividing_order = orders.iter().copied().find(|&n| cyclotomic(n).divides(&p));
        ErgodicityCertificate {
            ergodic: dividing_order.is_none(),
            abelianization_charpoly: p.to_string(),
            orders_checked: orders,
            dividing_order,
        }
    }

    pub fn is_ergodic(&self) -> bool {
        self.ergodicity().ergodic
    }

    /// Returns `NotErgodic` unless the automorphism is ergodic.
    pub fn require_ergodic(&self) -> Result<()> {
        match self.ergodicity().dividing_order {
            None => Ok(()),
            Some(order) => Err(Error::NotErgodic { order }),
        }
    }

    /// Numerical cross-check: evaluates the abelianized characteristic
    /// polynomial at every primitive root of unity within the Euler-phi bound.
    /// Returns true when some root of unity is a root (the non-ergodic case).
    pub fn root_of_unity_probe(&self) -> bool {
        let p = self.abelianization_charpoly();
        let l = p.degree().max(1);
        let bound = 2 * l * l;
        (1..=bound as u64).any(|n| {
            (0..n).filter(|&k| num_integer::gcd(k, n) == 1).any(|k| {
                let z = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
                p.eval_complex(z).norm() < 1e-8
            })
        })
    }

    /// One application of `α` (or `α⁻¹`) to a point.
    #[inline]
    pub fn step(&self, x: &Point<f64>, inverse: bool) -> Point<f64> {
        let map = if inverse { &self.backward_second } else { &self.forward_second };
        self.manifold.reduce_fast(map.eval(x.coords()))
    }

    /// `α` on a group element in second-kind coordinates, without reduction.
    pub fn apply_group<T: Scalar>(&self, g: &[T]) -> Result<Coords<T>> {
        let alg = self.manifold.algebra();
        alg.check_dim(g)?;
        let x = alg.first_from_second_raw(g);
        let d = x.len();
        let y: Coords<T> = (0..d)
            .map(|r| {
                (0..d).fold(T::zero(), |acc, c| acc + T::from_rational(&self.matrix[(r, c)]) * x[c].clone())
            })
            .collect();
        Ok(alg.second_from_first_raw(&y))
    }
}

fn unit(d: usize, i: usize) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); d];
    v[i] = Rational::from_i64(1);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_map_is_valid_and_ergodic() {
        let a = Automorphism::cat_map();
        assert_eq!(a.abelianization_matrix(), &QMatrix::from_i64_rows(&[&[2, 1], &[1, 1]]));
        let cert = a.ergodicity();
        assert!(cert.ergodic);
        assert_eq!(cert.abelianization_charpoly, "x^2 - 3x + 1");
        assert!(!a.root_of_unity_probe());
    }

    #[test]
    fn identity_is_not_ergodic() {
        let a = Automorphism::from_i64_rows(&Nilmanifold::torus(2), &[&[1, 0], &[0, 1]]).unwrap();
        let cert = a.ergodicity();
        assert!(!cert.ergodic);
        assert_eq!(cert.dividing_order, Some(1));
        assert!(a.root_of_unity_probe());
        assert_eq!(a.require_ergodic().unwrap_err(), Error::NotErgodic { order: 1 });
    }

    #[test]
    fn heisenberg_lift() {
        let a = Automorphism::heisenberg_cat();
        assert!(a.is_ergodic());
        assert_eq!(a.abelianization_matrix(), &QMatrix::from_i64_rows(&[&[2, 1], &[1, 1]]));
    }

    #[test]
    fn heisenberg_bracket_violation() {
        let h = Nilmanifold::heisenberg();
        let err = Automorphism::from_i64_rows(&h, &[&[2, 1, 0], &[1, 1, 0], &[0, 0, 2]]).unwrap_err();
        assert_eq!(err, Error::BracketNotPreserved { i: 1, j: 2 });
    }

    #[test]
    fn heisenberg_without_central_shear_moves_the_lattice() {
        // e2 ↦ e1 + e2 has second-kind coordinates (1, 1, -1/2)
        let h = Nilmanifold::heisenberg();
        let err = Automorphism::from_i64_rows(&h, &[&[2, 1, 0], &[1, 1, 0], &[0, 0, 1]]).unwrap_err();
        assert_eq!(err, Error::LatticeNotPreserved { generator: 2, map: "alpha" });
    }

    #[test]
    fn non_unimodular() {
        let err = Automorphism::from_i64_rows(&Nilmanifold::torus(2), &[&[2, 0], &[0, 1]]).unwrap_err();
        assert!(matches!(err, Error::NotUnimodular { .. }));
    }

    #[test]
    fn cat_step() {
        let a = Automorphism::cat_map();
        let p = a.step(&Point::new(&[0.5, 0.5]).unwrap(), false);
        assert!((p.coords()[0] - 0.5).abs() < 1e-12 && p.coords()[1].abs() < 1e-12);
    }
}
