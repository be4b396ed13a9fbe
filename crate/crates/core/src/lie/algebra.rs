use std::sync::Arc;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{span_basis, span_dim};
use crate::scalar::{zeros, Coords, Rational, Ring, Scalar};

use super::bch::BchSeries;
use super::compiled::Compiled;

/// One nonzero structure constant `[e_i, e_j] ∋ c e_k` with `i < j` (0-based).
#[derive(Clone, Debug, PartialEq)]
pub struct BracketEntry<T> {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub c: T,
}

/// Structure constants and BCH coefficients materialized for one scalar type.
#[derive(Clone, Debug)]
pub struct Tables<T> {
    pub(crate) brackets: Vec<BracketEntry<T>>,
    pub(crate) bch: BchSeries<T>,
}

/// `[x, y]` from a list of structure constants.
#[inline]
pub(crate) fn bracket_with<T: Ring>(brackets: &[BracketEntry<T>], x: &[T], y: &[T]) -> Coords<T> {
    let mut out = zeros::<T>(x.len());
    for e in brackets {
        let term = x[e.i].clone() * y[e.j].clone() - x[e.j].clone() * y[e.i].clone();
        if term != T::zero() {
            out[e.k] = out[e.k].clone() + e.c.clone() * term;
        }
    }
    out
}

impl<T: Ring> Tables<T> {
    pub(crate) fn map<U: Ring>(&self, f: impl Fn(&T) -> U) -> Tables<U> {
        Tables {
            brackets: self.brackets.iter().map(|e| BracketEntry { i: e.i, j: e.j, k: e.k, c: f(&e.c) }).collect(),
            bch: self.bch.map(f),
        }
    }

    pub(crate) fn bch(&self, x: &[T], y: &[T]) -> Coords<T> {
        self.bch.eval(&self.brackets, x, y)
    }

    /// `log(exp(t1 e1) ⋯ exp(td ed))`.
    pub(crate) fn first_from_second(&self, t: &[T]) -> Coords<T> {
        if self.brackets.is_empty() {
            return t.iter().cloned().collect();
        }
        let d = t.len();
        let mut acc = zeros::<T>(d);
        acc[0] = t[0].clone();
        for (i, ti) in t.iter().enumerate().skip(1) {
            if *ti == T::zero() {
                continue;
            }
            let mut e = zeros::<T>(d);
            e[i] = ti.clone();
            acc = self.bch(&acc, &e);
        }
        acc
    }

    /// Peels `exp(t_i e_i)` off the left, one index at a time.
    pub(crate) fn second_from_first(&self, x: &[T]) -> Coords<T> {
        if self.brackets.is_empty() {
            return x.iter().cloned().collect();
        }
        let d = x.len();
        let mut t = zeros::<T>(d);
        let mut y: Coords<T> = x.iter().cloned().collect();
        for i in 0..d {
            t[i] = y[i].clone();
            if i + 1 == d || t[i] == T::zero() {
                continue;
            }
            let mut e = zeros::<T>(d);
            e[i] = -t[i].clone();
            y = self.bch(&e, &y);
            y[i] = T::zero();
        }
        t
    }
}

/// A nilpotent Lie algebra over Q with a Malcev basis.
///
/// The basis is required to be adapted to the lower central series, and every
/// tail `span{e_i, …, e_d}` must be an ideal. Both properties are checked when
/// the algebra is built.
#[derive(Clone, Debug)]
pub struct NilpotentAlgebra {
    dim: usize,
    step: usize,
    lcs: Vec<Vec<Vec<Rational>>>,
    exact: Tables<Rational>,
    float: Tables<f64>,
    compiled: Arc<Compiled>,
}

impl NilpotentAlgebra {
    /// Validates a dense structure tensor `c[i][j][k]`, meaning `[e_i, e_j] = Σ_k c[i][j][k] e_k`.
    pub fn validate(dim: usize, tensor: &[Vec<Vec<Rational>>]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::MalformedAlgebra("dimension must be positive".into()));
        }
        if tensor.len() != dim
            || tensor.iter().any(|m| m.len() != dim || m.iter().any(|v| v.len() != dim))
        {
            return Err(Error::MalformedAlgebra(format!("tensor must have shape {dim}x{dim}x{dim}")));
        }
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    if tensor[i][j][k] != -tensor[j][i][k].clone() {
                        return Err(Error::AntisymmetryViolation { i: i + 1, j: j + 1, k: k + 1 });
                    }
                }
            }
        }
        let mut entries = Vec::new();
        for i in 0..dim {
            for j in i + 1..dim {
                for k in 0..dim {
                    if !tensor[i][j][k].is_zero() {
                        entries.push(BracketEntry { i, j, k, c: tensor[i][j][k].clone() });
                    }
                }
            }
        }
        Self::build(dim, entries)
    }

    /// Builds from sparse triples `(i, j, k, c)` (0-based): `[e_i, e_j] += c e_k`.
    ///
    /// The antisymmetric partner is implied; listing both `(i, j)` and `(j, i)` is
    /// allowed only when they agree.
    pub fn from_sparse(dim: usize, triples: &[(usize, usize, usize, Rational)]) -> Result<Self> {
        let mut tensor = vec![vec![vec![Rational::zero(); dim]; dim]; dim];
        let mut seen = vec![vec![vec![false; dim]; dim]; dim];
        for (i, j, k, c) in triples {
            let (i, j, k) = (*i, *j, *k);
            if i >= dim || j >= dim || k >= dim {
                return Err(Error::MalformedAlgebra(format!(
                    "index ({}, {}, {}) out of range for dim {dim}",
                    i + 1,
                    j + 1,
                    k + 1
                )));
            }
            if i == j {
                if !c.is_zero() {
                    return Err(Error::AntisymmetryViolation { i: i + 1, j: j + 1, k: k + 1 });
                }
                continue;
            }
            if seen[j][i][k] {
                if tensor[j][i][k] != -c.clone() {
                    return Err(Error::AntisymmetryViolation { i: i + 1, j: j + 1, k: k + 1 });
                }
            } else {
                tensor[i][j][k] += c;
                tensor[j][i][k] -= c;
            }
            seen[i][j][k] = true;
        }
        Self::validate(dim, &tensor)
    }

    /// The abelian algebra R^d (the torus case).
    pub fn abelian(dim: usize) -> Self {
        Self::build(dim, Vec::new()).expect("abelian algebra is always valid")
    }

    /// Three-dimensional Heisenberg algebra `[e1, e2] = e3`.
    pub fn heisenberg() -> Self {
        Self::from_sparse(3, &[(0, 1, 2, Rational::from_i64(1))]).expect("valid")
    }

    /// Four-dimensional filiform algebra `[e1, e2] = e3`, `[e1, e3] = e4`.
    pub fn filiform4() -> Self {
        Self::from_sparse(4, &[(0, 1, 2, Rational::from_i64(1)), (0, 2, 3, Rational::from_i64(1))])
            .expect("valid")
    }

    /// Free two-step nilpotent algebra on three generators, basis
    /// `e1, e2, e3, e4 = [e1,e2], e5 = [e1,e3], e6 = [e2,e3]`.
    pub fn free_two_step_rank3() -> Self {
        let one = Rational::from_i64(1);
        Self::from_sparse(6, &[(0, 1, 3, one.clone()), (0, 2, 4, one.clone()), (1, 2, 5, one)])
            .expect("valid")
    }

    fn build(dim: usize, entries: Vec<BracketEntry<Rational>>) -> Result<Self> {
        let lcs = lower_central_series(dim, &entries)?;
        check_jacobi(dim, &entries)?;
        check_malcev(dim, &entries, &lcs)?;
        let step = lcs.len();
        let bch = BchSeries::<Rational>::dynkin(step);
        let exact = Tables { brackets: entries, bch };
        let float = exact.map(|q| q.to_float());
        let compiled = Arc::new(Compiled::build(dim, &exact));
        Ok(NilpotentAlgebra { dim, step, lcs, exact, float, compiled })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nilpotency class: the number of nonzero terms of the lower central series.
    pub fn step(&self) -> usize {
        self.step
    }

    /// Bases of `g = g^1 ⊃ g^2 ⊃ …`, nonzero terms only.
    pub fn lower_central_series(&self) -> &[Vec<Vec<Rational>>] {
        &self.lcs
    }

    pub fn lcs_dims(&self) -> Vec<usize> {
        self.lcs.iter().map(Vec::len).collect()
    }

    /// Dimension `l` of the abelianization `g / [g, g]`; the first `l` basis vectors map onto it.
    pub fn abelian_rank(&self) -> usize {
        self.dim - self.lcs.get(1).map_or(0, Vec::len)
    }

    pub fn is_abelian(&self) -> bool {
        self.exact.brackets.is_empty()
    }

    /// Nonzero structure constants `(i, j, k, c)` with `i < j`, 0-based.
    pub fn structure_constants(&self) -> impl Iterator<Item = (usize, usize, usize, &Rational)> {
        self.exact.brackets.iter().map(|e| (e.i, e.j, e.k, &e.c))
    }

    pub(crate) fn tables<T: Scalar>(&self) -> &Tables<T> {
        T::tables(self)
    }

    pub(crate) fn exact_tables(&self) -> &Tables<Rational> {
        &self.exact
    }

    pub(crate) fn float_tables(&self) -> &Tables<f64> {
        &self.float
    }

    /// Group operations lowered to float polynomials.
    pub(crate) fn compiled(&self) -> &Compiled {
        &self.compiled
    }

    pub(crate) fn check_dim<T>(&self, v: &[T]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        Ok(())
    }

    /// Lie bracket `[x, y]`.
    pub fn bracket<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<Coords<T>> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.bracket_raw(x, y))
    }

    #[inline]
    pub(crate) fn bracket_raw<T: Scalar>(&self, x: &[T], y: &[T]) -> Coords<T> {
        bracket_with(&self.tables::<T>().brackets, x, y)
    }

    /// `log(exp x · exp y)`; exact for rational input.
    pub fn bch<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<Coords<T>> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.bch_raw(x, y))
    }

    #[inline]
    pub(crate) fn bch_raw<T: Scalar>(&self, x: &[T], y: &[T]) -> Coords<T> {
        T::bch_impl(self, x, y)
    }

    /// First-kind coordinates of `exp(t1 e1) ⋯ exp(td ed)`.
    pub fn first_from_second<T: Scalar>(&self, t: &[T]) -> Result<Coords<T>> {
        self.check_dim(t)?;
        Ok(self.first_from_second_raw(t))
    }

    #[inline]
    pub(crate) fn first_from_second_raw<T: Scalar>(&self, t: &[T]) -> Coords<T> {
        T::first_from_second_impl(self, t)
    }

    /// Second-kind (Malcev) coordinates of `exp(x)`, by peeling one basis direction at a time.
    pub fn second_from_first<T: Scalar>(&self, x: &[T]) -> Result<Coords<T>> {
        self.check_dim(x)?;
        Ok(self.second_from_first_raw(x))
    }

    #[inline]
    pub(crate) fn second_from_first_raw<T: Scalar>(&self, x: &[T]) -> Coords<T> {
        T::second_from_first_impl(self, x)
    }

    /// Group product in second-kind coordinates.
    pub(crate) fn mul_second<T: Scalar>(&self, a: &[T], b: &[T]) -> Coords<T> {
        let x = self.first_from_second_raw(a);
        let y = self.first_from_second_raw(b);
        self.second_from_first_raw(&self.bch_raw(&x, &y))
    }
}

fn bracket_vectors(dim: usize, entries: &[BracketEntry<Rational>], x: &[Rational], y: &[Rational]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); dim];
    for e in entries {
        let term = &x[e.i] * &y[e.j] - &x[e.j] * &y[e.i];
        if !term.is_zero() {
            out[e.k] += &e.c * term;
        }
    }
    out
}

fn unit_rational(dim: usize, i: usize) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); dim];
    v[i] = Rational::from_i64(1);
    v
}

/// Nonzero terms of the lower central series; errors if it stabilizes above zero.
fn lower_central_series(dim: usize, entries: &[BracketEntry<Rational>]) -> Result<Vec<Vec<Vec<Rational>>>> {
    let mut series = vec![(0..dim).map(|i| unit_rational(dim, i)).collect::<Vec<_>>()];
    loop {
        let current = series.last().expect("nonempty");
        let mut gens = Vec::new();
        for a in 0..dim {
            let ea = unit_rational(dim, a);
            for v in current {
                let b = bracket_vectors(dim, entries, &ea, v);
                if b.iter().any(|c| !c.is_zero()) {
                    gens.push(b);
                }
            }
        }
        let next = span_basis(&gens, dim);
        if next.is_empty() {
            return Ok(series);
        }
        if next.len() == current.len() {
            return Err(Error::NotNilpotent { stable_dim: next.len() });
        }
        series.push(next);
    }
}

fn check_jacobi(dim: usize, entries: &[BracketEntry<Rational>]) -> Result<()> {
    let e: Vec<Vec<Rational>> = (0..dim).map(|i| unit_rational(dim, i)).collect();
    let br = |x: &[Rational], y: &[Rational]| bracket_vectors(dim, entries, x, y);
    for i in 0..dim {
        for j in i + 1..dim {
            for k in j + 1..dim {
                let a = br(&e[i], &br(&e[j], &e[k]));
                let b = br(&e[j], &br(&e[k], &e[i]));
                let c = br(&e[k], &br(&e[i], &e[j]));
                if (0..dim).any(|m| !(&a[m] + &b[m] + &c[m]).is_zero()) {
                    return Err(Error::JacobiViolation { i: i + 1, j: j + 1, k: k + 1 });
                }
            }
        }
    }
    Ok(())
}

fn check_malcev(dim: usize, entries: &[BracketEntry<Rational>], lcs: &[Vec<Vec<Rational>>]) -> Result<()> {
    for (m, term) in lcs.iter().enumerate() {
        let head = dim - term.len();
        if term.iter().any(|v| v[..head].iter().any(|c| !c.is_zero())) || span_dim(term) != term.len() {
            return Err(Error::BasisNotMalcevOrdered(format!(
                "term {} of the lower central series is not spanned by e{}..e{dim}",
                m + 1,
                head + 1
            )));
        }
    }
    for e in entries {
        if e.k < e.j {
            return Err(Error::BasisNotMalcevOrdered(format!(
                "[e{}, e{}] has an e{} component, so span{{e{}, …}} is not an ideal",
                e.i + 1,
                e.j + 1,
                e.k + 1,
                e.j + 1
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    fn q(n: i64) -> Rational {
        Rational::from_i64(n)
    }

    #[test]
    fn heisenberg_series() {
        let h = NilpotentAlgebra::heisenberg();
        assert_eq!(h.step(), 2);
        assert_eq!(h.lcs_dims(), vec![3, 1]);
        assert_eq!(h.abelian_rank(), 2);
    }

    #[test]
    fn abelian_is_step_one() {
        let a = NilpotentAlgebra::from_sparse(2, &[]).unwrap();
        assert_eq!(a.step(), 1);
        assert_eq!(a.lcs_dims(), vec![2]);
    }

    #[test]
    fn non_nilpotent_rejected() {
        // [e1,e2] = e3, [e1,e3] = e1: the series stabilizes at <e1, e3>
        let err = NilpotentAlgebra::from_sparse(3, &[(0, 1, 2, q(1)), (0, 2, 0, q(1))]).unwrap_err();
        assert_eq!(err, Error::NotNilpotent { stable_dim: 2 });
    }

    #[test]
    fn antisymmetry_violation_reported() {
        let mut t = vec![vec![vec![q(0); 3]; 3]; 3];
        t[0][1][2] = q(1);
        t[1][0][2] = q(1);
        assert_eq!(
            NilpotentAlgebra::validate(3, &t).unwrap_err(),
            Error::AntisymmetryViolation { i: 1, j: 2, k: 3 }
        );
    }

    #[test]
    fn jacobi_violation_reported() {
        // [e1,e2]=e4, [e3,e4]=e5 is nilpotent, but Jacobi(e1,e2,e3) = [e3,[e1,e2]] = e5
        let err = NilpotentAlgebra::from_sparse(5, &[(0, 1, 3, q(1)), (2, 3, 4, q(1))]).unwrap_err();
        assert_eq!(err, Error::JacobiViolation { i: 1, j: 2, k: 3 });
    }

    #[test]
    fn malcev_order_enforced() {
        // Heisenberg with the central element listed first
        let err = NilpotentAlgebra::from_sparse(3, &[(1, 2, 0, q(1))]).unwrap_err();
        assert!(matches!(err, Error::BasisNotMalcevOrdered(_)));
    }

    #[test]
    fn bracket_examples() {
        let h = NilpotentAlgebra::heisenberg();
        let e1 = [q(1), q(0), q(0)];
        let e2 = [q(0), q(1), q(0)];
        assert_eq!(h.bracket(&e1, &e2).unwrap().to_vec(), vec![q(0), q(0), q(1)]);
        let x = [q(2), q(1), q(0)];
        let y = [q(1), q(-1), q(0)];
        assert_eq!(h.bracket(&x, &y).unwrap().to_vec(), vec![q(0), q(0), q(-3)]);
        assert_eq!(
            h.bracket(&e1, &[q(1)]).unwrap_err(),
            Error::DimensionMismatch { expected: 3, found: 1 }
        );
    }

    #[test]
    fn coordinate_conversions_heisenberg() {
        let h = NilpotentAlgebra::heisenberg();
        let (a, b, c) = (ratio(3, 2), ratio(-2, 5), ratio(7, 3));
        let x = h.first_from_second(&[a.clone(), b.clone(), c.clone()]).unwrap();
        assert_eq!(x.to_vec(), vec![a.clone(), b.clone(), c.clone() + &a * &b / q(2)]);
        assert_eq!(h.second_from_first(&x).unwrap().to_vec(), vec![a, b, c]);
    }
}
