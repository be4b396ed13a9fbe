//! Group operations lowered to float polynomial evaluators.
//!
//! In a nilpotent group every coordinate change and the group law are
//! polynomial. They are derived once by running the generic exact code on
//! symbolic inputs, then evaluated term by term in `f64`.

use smallvec::SmallVec;

use crate::scalar::{Coords, Rational, Scalar};

use super::algebra::Tables;
use super::mpoly::MPoly;

#[derive(Clone, Debug)]
struct Term {
    coef: f64,
    factors: SmallVec<[(u8, u8); 4]>,
}

/// A polynomial map `R^n → R^m` with float coefficients.
#[derive(Clone, Debug)]
pub(crate) struct CompiledMap {
    nvars: usize,
    outputs: Vec<Vec<Term>>,
    /// Output `k` equals input `k` plus the listed terms (common for unipotent maps).
    identity_prefix: bool,
}

impl CompiledMap {
    pub(crate) fn from_polys(nvars: usize, polys: &[MPoly]) -> Self {
        let identity_prefix = polys.len() <= nvars
            && polys.iter().enumerate().all(|(k, p)| {
                p.terms().any(|(m, c)| m.as_slice() == [(k as u8, 1)] && *c == Rational::from_i64(1))
            });
        let outputs = polys
            .iter()
            .enumerate()
            .map(|(k, p)| {
                p.terms()
                    .filter(|(m, c)| {
                        !(identity_prefix && m.as_slice() == [(k as u8, 1)] && **c == Rational::from_i64(1))
                    })
                    .map(|(m, c)| Term { coef: c.to_float(), factors: m.iter().copied().collect() })
                    .collect()
            })
            .collect();
        CompiledMap { nvars, outputs, identity_prefix }
    }

    #[inline]
    pub(crate) fn eval(&self, x: &[f64]) -> Coords<f64> {
        debug_assert_eq!(x.len(), self.nvars);
        self.outputs
            .iter()
            .enumerate()
            .map(|(k, terms)| {
                let base = if self.identity_prefix { x[k] } else { 0.0 };
                terms.iter().fold(base, |acc, t| {
                    let mut v = t.coef;
                    for &(var, pow) in &t.factors {
                        let xv = x[var as usize];
                        for _ in 0..pow {
                            v *= xv;
                        }
                    }
                    acc + v
                })
            })
            .collect()
    }

    #[inline]
    pub(crate) fn eval2(&self, x: &[f64], y: &[f64]) -> Coords<f64> {
        let mut buf: SmallVec<[f64; 16]> = SmallVec::with_capacity(x.len() + y.len());
        buf.extend_from_slice(x);
        buf.extend_from_slice(y);
        self.eval(&buf)
    }
}

/// The float group law of one algebra.
#[derive(Clone, Debug)]
pub(crate) struct Compiled {
    bch: CompiledMap,
    pub(crate) to_first: CompiledMap,
    pub(crate) to_second: CompiledMap,
    mul: CompiledMap,
    /// `t ↦ t · exp(s e_i)` in second-kind coordinates, variables `(t, s)`.
    shifts: Vec<CompiledMap>,
}

impl Compiled {
    pub(crate) fn build(dim: usize, exact: &Tables<Rational>) -> Self {
        let sym: Tables<MPoly> = exact.map(|q| MPoly::constant(q.clone()));
        let vars = |offset: usize| -> Coords<MPoly> { (0..dim).map(|i| MPoly::var(offset + i)).collect() };
        let (x, y) = (vars(0), vars(dim));
        let bch = sym.bch(&x, &y);
        let to_first = sym.first_from_second(&x);
        let to_second = sym.second_from_first(&x);
        let mul = sym.second_from_first(&sym.bch(&sym.first_from_second(&x), &sym.first_from_second(&y)));
        let shifts = (0..dim)
            .map(|i| {
                let mut e: Coords<MPoly> = (0..dim).map(|_| MPoly::default()).collect();
                e[i] = MPoly::var(dim);
                let p = sym.second_from_first(&sym.bch(&sym.first_from_second(&x), &e));
                CompiledMap::from_polys(dim + 1, &p)
            })
            .collect();
        Compiled {
            bch: CompiledMap::from_polys(2 * dim, &bch),
            to_first: CompiledMap::from_polys(dim, &to_first),
            to_second: CompiledMap::from_polys(dim, &to_second),
            mul: CompiledMap::from_polys(2 * dim, &mul),
            shifts,
        }
    }

    #[inline]
    pub(crate) fn bch(&self, x: &[f64], y: &[f64]) -> Coords<f64> {
        self.bch.eval2(x, y)
    }

    /// Product in second-kind coordinates.
    #[inline]
    pub(crate) fn mul(&self, a: &[f64], b: &[f64]) -> Coords<f64> {
        self.mul.eval2(a, b)
    }

    /// `t · exp(s e_i)` in second-kind coordinates.
    #[inline]
    pub(crate) fn shift(&self, t: &[f64], i: usize, s: f64) -> Coords<f64> {
        let mut buf: SmallVec<[f64; 16]> = SmallVec::from_slice(t);
        buf.push(s);
        self.shifts[i].eval(&buf)
    }
}

/// A linear map of the algebra, given by its matrix on first-kind
/// coordinates, expressed as a polynomial map on second-kind coordinates.
pub(crate) fn linear_in_second(exact: &Tables<Rational>, matrix: &[Vec<Rational>]) -> CompiledMap {
    let dim = matrix.len();
    let sym: Tables<MPoly> = exact.map(|q| MPoly::constant(q.clone()));
    let t: Coords<MPoly> = (0..dim).map(MPoly::var).collect();
    let x = sym.first_from_second(&t);
    let y: Coords<MPoly> = matrix
        .iter()
        .map(|row| {
            row.iter()
                .zip(x.iter())
                .filter(|(a, _)| !num_traits::Zero::is_zero(*a))
                .fold(MPoly::default(), |acc, (a, xi)| acc + MPoly::constant(a.clone()) * xi.clone())
        })
        .collect();
    CompiledMap::from_polys(dim, &sym.second_from_first(&y))
}
