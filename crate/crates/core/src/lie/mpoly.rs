//! Sparse multivariate polynomials over Q, used to derive the group law symbolically.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::scalar::{Rational, Ring};

/// Monomial as sorted `(variable, power)` pairs.
pub type Monomial = Vec<(u8, u8)>;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct MPoly {
    terms: BTreeMap<Monomial, Rational>,
}

impl MPoly {
    pub fn var(i: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![(i as u8, 1)], Rational::one());
        MPoly { terms }
    }

    pub fn constant(c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Vec::new(), c);
        }
        MPoly { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn total_degree(&self) -> usize {
        self.terms.keys().map(|m| m.iter().map(|&(_, p)| p as usize).sum()).max().unwrap_or(0)
    }

    /// Substitutes rational values for every variable.
    pub fn eval(&self, values: &[Rational]) -> Rational {
        self.terms.iter().fold(Rational::zero(), |acc, (m, c)| {
            let mono = m.iter().fold(Rational::one(), |a, &(v, p)| {
                (0..p).fold(a, |b, _| b * &values[v as usize])
            });
            acc + c * mono
        })
    }

    fn insert(&mut self, m: Monomial, c: Rational) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                if !c.is_zero() {
                    v.insert(c);
                }
            }
        }
    }
}

fn mul_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out: Monomial = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&(va, pa)), Some(&(vb, pb))) if va == vb => {
                out.push((va, pa + pb));
                i += 1;
                j += 1;
            }
            (Some(&(va, pa)), Some(&(vb, _))) if va < vb => {
                out.push((va, pa));
                i += 1;
            }
            (Some(_), Some(&(vb, pb))) => {
                out.push((vb, pb));
                j += 1;
            }
            (Some(&x), None) => {
                out.push(x);
                i += 1;
            }
            (None, Some(&y)) => {
                out.push(y);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

impl Add for MPoly {
    type Output = MPoly;
    fn add(mut self, rhs: MPoly) -> MPoly {
        for (m, c) in rhs.terms {
            self.insert(m, c);
        }
        self
    }
}

impl Sub for MPoly {
    type Output = MPoly;
    fn sub(self, rhs: MPoly) -> MPoly {
        self + (-rhs)
    }
}

impl Neg for MPoly {
    type Output = MPoly;
    fn neg(self) -> MPoly {
        MPoly { terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect() }
    }
}

impl Mul for MPoly {
    type Output = MPoly;
    fn mul(self, rhs: MPoly) -> MPoly {
        let mut out = MPoly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.insert(mul_monomials(ma, mb), ca * cb);
            }
        }
        out
    }
}

impl Zero for MPoly {
    fn zero() -> Self {
        MPoly::default()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl One for MPoly {
    fn one() -> Self {
        MPoly::constant(Rational::one())
    }
}

impl Ring for MPoly {
    fn from_rational(q: &Rational) -> Self {
        MPoly::constant(q.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn arithmetic() {
        let x = MPoly::var(0);
        let y = MPoly::var(1);
        let p = (x.clone() + y.clone()) * (x.clone() - y.clone());
        let q = x.clone() * x - y.clone() * y;
        assert_eq!(p, q);
        assert_eq!(p.total_degree(), 2);
        assert_eq!(p.eval(&[ratio(3, 1), ratio(1, 2)]), ratio(35, 4));
        assert!((p.clone() - q).is_zero());
    }
}
