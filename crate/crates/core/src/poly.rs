//! Univariate polynomials over the rationals: arithmetic, cyclotomic
//! polynomials, square-free decomposition and factorization over Q.

use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::scalar::{Rational, Scalar};

/// Polynomial with rational coefficients, ascending order (`coeffs[i]` multiplies `x^i`).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    coeffs: Vec<Rational>,
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            let a = c.abs();
            let show_coeff = !a.is_one() || i == 0;
            if show_coeff {
                write!(f, "{a}")?;
            }
            match i {
                0 => {}
                1 => write!(f, "x")?,
                _ => write!(f, "x^{i}")?,
            }
            first = false;
        }
        Ok(())
    }
}

impl Poly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Rational::from_i64(c)).collect())
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::from_i64(&[1])
    }

    /// `x - r`.
    pub fn linear(root: Rational) -> Self {
        Self::new(vec![-root, Rational::one()])
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> Rational {
        self.coeffs.last().cloned().unwrap_or_else(Rational::zero)
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        let lc = self.leading();
        Poly::new(self.coeffs.iter().map(|c| c / &lc).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new(
            (0..n)
                .map(|i| {
                    let a = self.coeffs.get(i).cloned().unwrap_or_else(Rational::zero);
                    let b = other.coeffs.get(i).cloned().unwrap_or_else(Rational::zero);
                    a + b
                })
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn scale(&self, s: &Rational) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Rational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn pow(&self, e: u32) -> Poly {
        (0..e).fold(Poly::one(), |acc, _| acc.mul(self))
    }

    /// Euclidean division: `self = q * divisor + r` with `deg r < deg divisor`.
    pub fn divrem(&self, divisor: &Poly) -> (Poly, Poly) {
        assert!(!divisor.is_zero(), "division by zero polynomial");
        let mut rem = self.coeffs.clone();
        let dd = divisor.degree();
        let lc = divisor.leading();
        if self.is_zero() || self.degree() < dd {
            return (Poly::zero(), self.clone());
        }
        let mut q = vec![Rational::zero(); self.degree() - dd + 1];
        for k in (0..q.len()).rev() {
            let c = &rem[k + dd] / &lc;
            if !c.is_zero() {
                for (j, dc) in divisor.coeffs.iter().enumerate() {
                    rem[k + j] -= &c * dc;
                }
            }
            q[k] = c;
        }
        rem.truncate(dd);
        (Poly::new(q), Poly::new(rem))
    }

    pub fn divides(&self, other: &Poly) -> bool {
        other.divrem(self).1.is_zero()
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, other: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.divrem(&b).1;
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * Rational::from_i64(i as i64))
                .collect(),
        )
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c.to_float())
    }

    /// Square-free decomposition (Yun): monic `a_1, a_2, …` with `p = lc · Π a_i^i`.
    /// Entries may be 1 for absent multiplicities.
    pub fn square_free_decomposition(&self) -> Vec<Poly> {
        let p = self.monic();
        if p.degree() == 0 {
            return Vec::new();
        }
        let dp = p.derivative();
        let mut a = p.gcd(&dp);
        let mut b = p.divrem(&a).0;
        let mut c = dp.divrem(&a).0;
        let mut d = c.sub(&b.derivative());
        let mut out = Vec::new();
        loop {
            a = b.gcd(&d);
            out.push(a.clone());
            b = b.divrem(&a).0;
            if b.degree() == 0 {
                break;
            }
            c = d.divrem(&a).0;
            d = c.sub(&b.derivative());
        }
        out
    }

    /// Complex roots from the companion matrix, polished by Newton steps.
    pub fn complex_roots(&self) -> Vec<Complex64> {
        let p = self.monic();
        let n = p.degree();
        if n == 0 {
            return Vec::new();
        }
        let mut comp = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            comp[(i, n - 1)] = -p.coeffs[i].to_float();
        }
        let dp = p.derivative();
        comp.complex_eigenvalues()
            .iter()
            .map(|&z0| {
                let mut z = z0;
                for _ in 0..8 {
                    let d = dp.eval_complex(z);
                    if d.norm() < 1e-300 {
                        break;
                    }
                    let step = p.eval_complex(z) / d;
                    z -= step;
                    if step.norm() <= 1e-16 * z.norm().max(1.0) {
                        break;
                    }
                }
                z
            })
            .collect()
    }

    /// Irreducible factorization over Q: monic irreducible factors with multiplicities.
    ///
    /// Candidate factors are proposed from numerical root subsets and accepted only
    /// after exact division, so every returned factor divides exactly. A factor is
    /// declared irreducible when no proper root subset yields an exact divisor.
    pub fn factor(&self) -> Vec<(Poly, u32)> {
        let mut out: Vec<(Poly, u32)> = Vec::new();
        for (i, part) in self.square_free_decomposition().iter().enumerate() {
            if part.degree() == 0 {
                continue;
            }
            for f in factor_square_free(part) {
                out.push((f, i as u32 + 1));
            }
        }
        out.sort_by(|a, b| a.0.degree().cmp(&b.0.degree()).then_with(|| a.0.coeffs.cmp(&b.0.coeffs)));
        out
    }
}

impl PartialOrd for Poly {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Poly {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.coeffs.cmp(&other.coeffs))
    }
}

fn lcm_of_denominators(p: &Poly) -> BigInt {
    p.coeffs.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
}

/// `D^n p(y / D)` for monic `p`; monic with integer coefficients for suitable `D`.
fn rescale(p: &Poly, d: &BigInt) -> Poly {
    let n = p.degree();
    let dq = Rational::from_integer(d.clone());
    Poly::new(
        p.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * num_traits::pow(dq.clone(), n - k))
            .collect(),
    )
}

/// Inverse of [`rescale`] for a monic factor of degree m: `D^{-m} q(D x)`.
fn unscale(q: &Poly, d: &BigInt) -> Poly {
    let dq = Rational::from_integer(d.clone());
    Poly::new(
        q.coeffs.iter().enumerate().map(|(k, c)| c * num_traits::pow(dq.clone(), k)).collect(),
    )
    .monic()
}

fn factor_square_free(p: &Poly) -> Vec<Poly> {
    let p = p.monic();
    if p.degree() <= 1 {
        return vec![p];
    }
    let d = lcm_of_denominators(&p);
    let b = rescale(&p, &d);
    let mut factors = Vec::new();
    split_integer_monic(b, &mut factors);
    let mut out: Vec<Poly> = factors.iter().map(|f| unscale(f, &d)).collect();
    out.sort();
    out
}

/// Root groups closed under complex conjugation: real roots alone, pairs together.
fn conjugate_units(roots: &[Complex64]) -> Vec<Vec<Complex64>> {
    let scale = roots.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = 1e-7 * scale;
    let mut used = vec![false; roots.len()];
    let mut units = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let z = roots[i];
        if z.im.abs() <= tol {
            units.push(vec![Complex64::new(z.re, 0.0)]);
            continue;
        }
        let partner = (0..roots.len())
            .filter(|&j| !used[j])
            .min_by(|&a, &b| {
                (roots[a] - z.conj()).norm().total_cmp(&(roots[b] - z.conj()).norm())
            });
        match partner {
            Some(j) => {
                used[j] = true;
                units.push(vec![z, z.conj()]);
            }
            None => units.push(vec![z]),
        }
    }
    units
}

/// Rounds the monic product of `(y - r)` to an integer polynomial, if it is close to one.
fn integer_candidate(roots: &[Complex64]) -> Option<Poly> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &a) in c.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= a * r;
        }
        c = next;
    }
    let mut coeffs = Vec::with_capacity(c.len());
    for z in c {
        let rounded = z.re.round();
        let tol = 1e-6 * z.re.abs().max(1.0);
        if (z.re - rounded).abs() > tol.max(1e-4) || z.im.abs() > tol.max(1e-4) {
            return None;
        }
        coeffs.push(Rational::from_integer(BigInt::from(rounded.to_i64()?)));
    }
    Some(Poly::new(coeffs))
}

fn split_integer_monic(b: Poly, out: &mut Vec<Poly>) {
    if b.degree() <= 1 {
        if b.degree() == 1 {
            out.push(b);
        }
        return;
    }
    let roots = b.complex_roots();
    let units = conjugate_units(&roots);
    let u = units.len();
    // smallest proper divisor first
    let mut masks: Vec<u32> = (1..(1u32 << u) - 1).collect();
    masks.sort_by_key(|m| {
        let deg: usize = (0..u).filter(|i| m & (1 << i) != 0).map(|i| units[i].len()).sum();
        (deg, *m)
    });
    for mask in masks {
        let deg: usize = (0..u).filter(|i| mask & (1 << i) != 0).map(|i| units[i].len()).sum();
        if deg * 2 > b.degree() {
            break;
        }
        let chosen: Vec<Complex64> = (0..u)
            .filter(|i| mask & (1 << i) != 0)
            .flat_map(|i| units[i].iter().copied())
            .collect();
        if let Some(cand) = integer_candidate(&chosen) {
            let (q, r) = b.divrem(&cand);
            if r.is_zero() {
                out.push(cand);
                split_integer_monic(q, out);
                return;
            }
        }
    }
    out.push(b);
}

/// The n-th cyclotomic polynomial.
pub fn cyclotomic(n: u64) -> Poly {
    assert!(n >= 1);
    let mut xn1 = vec![Rational::zero(); n as usize + 1];
    xn1[0] = -Rational::one();
    xn1[n as usize] = Rational::one();
    let mut p = Poly::new(xn1);
    for d in 1..n {
        if n % d == 0 {
            p = p.divrem(&cyclotomic(d)).0;
        }
    }
    p
}

pub fn euler_phi(n: u64) -> u64 {
    let mut result = n;
    let mut m = n;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            while m % p == 0 {
                m /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if m > 1 {
        result -= result / m;
    }
    result
}

/// All orders `n` whose cyclotomic polynomial has degree at most `max_degree`.
pub fn cyclotomic_orders_up_to_degree(max_degree: usize) -> Vec<u64> {
    // phi(n) >= sqrt(n / 2), so n <= 2 * deg^2 suffices
    let bound = (2 * max_degree * max_degree).max(2) as u64;
    (1..=bound).filter(|&n| euler_phi(n) as usize <= max_degree).collect()
}
