//! The compact quotient `X = G/Λ` with `Λ = exp(Z e1) ⋯ exp(Z ed)`.
//!
//! Points are stored by their canonical representative in the fundamental
//! domain `F = exp([0,1) e1) ⋯ exp([0,1) ed)`, in second-kind coordinates.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Zero;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::NilpotentAlgebra;
use crate::scalar::{euclidean_norm, zeros, Coords, Rational, Scalar};

/// A point of `X`: second-kind coordinates in `[0, 1)^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point<T = f64> {
    coords: Coords<T>,
}

impl<T: Scalar> Point<T> {
    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Coords<T> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl Point<Rational> {
    /// Exact point; coordinates must lie in `[0, 1)`.
    pub fn new_exact(coords: &[Rational]) -> Result<Self> {
        let (zero, one) = (Rational::from_i64(0), Rational::from_i64(1));
        if coords.iter().any(|c| *c < zero || *c >= one) {
            return Err(Error::InvalidParameter("point coordinates must lie in [0, 1)".into()));
        }
        Ok(Point { coords: coords.iter().cloned().collect() })
    }
}

impl Point<f64> {
    /// Wraps coordinates that are already in `[0, 1)`.
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoordinate);
        }
        if coords.iter().any(|&c| !(0.0..1.0).contains(&c)) {
            return Err(Error::InvalidParameter(format!(
                "point coordinates must lie in [0, 1): {coords:?}"
            )));
        }
        Ok(Point { coords: coords.iter().copied().collect() })
    }

    pub fn to_exact(&self) -> Point<Rational> {
        Point {
            coords: self
                .coords
                .iter()
                .map(|&c| Rational::from_float(c).expect("finite"))
                .collect(),
        }
    }
}

/// The compact nilmanifold together with the local metric scale.
#[derive(Clone, Debug)]
pub struct Nilmanifold {
    algebra: Arc<NilpotentAlgebra>,
    metric_scale: f64,
    guard: f64,
}

impl Nilmanifold {
    /// Builds the quotient and spot-checks that integer Malcev coordinates form a subgroup.
    pub fn new(algebra: NilpotentAlgebra, metric_scale: f64) -> Result<Self> {
        if !(metric_scale.is_finite() && metric_scale > 0.0) {
            return Err(Error::InvalidParameter(format!("metric_scale must be positive, got {metric_scale}")));
        }
        let algebra = Arc::new(algebra);
        check_lattice_closed(&algebra)?;
        let mut m = Nilmanifold { algebra, metric_scale, guard: 0.0 };
        m.guard = 0.5 * m.min_lattice_displacement();
        Ok(m)
    }

    /// The standard torus `R^d / Z^d`.
    pub fn torus(dim: usize) -> Self {
        Self::new(NilpotentAlgebra::abelian(dim), 1.0).expect("torus is valid")
    }

    pub fn heisenberg() -> Self {
        Self::new(NilpotentAlgebra::heisenberg(), 1.0).expect("valid")
    }

    pub fn algebra(&self) -> &NilpotentAlgebra {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn metric_scale(&self) -> f64 {
        self.metric_scale
    }

    /// Half of the smallest displacement `|log λ|` over words `λ` with entries in {-1, 0, 1}.
    pub fn injectivity_guard(&self) -> f64 {
        self.guard
    }

    fn min_lattice_displacement(&self) -> f64 {
        let d = self.dim();
        let mut best = f64::INFINITY;
        let total = 3usize.pow(d as u32);
        for code in 1..total {
            let mut c = code;
            let w: Coords<f64> = (0..d)
                .map(|_| {
                    let digit = (c % 3) as f64 - 1.0;
                    c /= 3;
                    digit
                })
                .collect();
            if w.iter().all(|&x| x == 0.0) {
                continue;
            }
            let log = self.algebra.first_from_second_raw(&w);
            best = best.min(euclidean_norm(&log));
        }
        best * self.metric_scale
    }

    pub(crate) fn check_dim<T>(&self, v: &[T]) -> Result<()> {
        self.algebra.check_dim(v)
    }

    /// `g · exp(-n e_i)` in second-kind coordinates; only coordinates `i..` change.
    fn shift_coordinate<T: Scalar>(&self, t: &mut Coords<T>, i: usize, n: &T) {
        let alg = &self.algebra;
        let d = t.len();
        if alg.is_abelian() || i + 1 == d {
            t[i] = t[i].clone() - n.clone();
            return;
        }
        let mut tail = zeros::<T>(d);
        for j in i..d {
            tail[j] = t[j].clone();
        }
        let x = alg.first_from_second_raw(&tail);
        let mut e = zeros::<T>(d);
        e[i] = -n.clone();
        let y = alg.bch_raw(&x, &e);
        let new_tail = alg.second_from_first_raw(&y);
        t[i] = t[i].clone() - n.clone();
        for j in i + 1..d {
            t[j] = new_tail[j].clone();
        }
    }

    #[inline]
    fn shift_f64(&self, t: &mut Coords<f64>, i: usize, n: f64) {
        if self.algebra.is_abelian() || i + 1 == t.len() {
            t[i] -= n;
        } else {
            *t = self.algebra.compiled().shift(t, i, -n);
        }
    }

    /// Canonical representative of `g Λ` and the lattice word `(n1, …, nd)` with
    /// `g · exp(n1 e1) ⋯ exp(nd ed) ∈ F` (applied left to right).
    pub fn reduce<T: Scalar>(&self, g: &[T]) -> Result<(Point<T>, Vec<BigInt>)> {
        self.check_dim(g)?;
        if g.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoordinate);
        }
        let mut t: Coords<T> = g.iter().cloned().collect();
        let mut word = vec![BigInt::zero(); g.len()];
        for i in 0..t.len() {
            let n = t[i].floor();
            if n != T::zero() {
                word[i] = -n.floor_int();
                self.shift_coordinate(&mut t, i, &n);
            }
            if t[i] >= T::one() {
                // float rounding: t - floor(t) may round up to 1
                self.shift_coordinate(&mut t, i, &T::one());
                word[i] -= 1;
            }
        }
        Ok((Point { coords: t }, word))
    }

    /// Float reduction without the lattice word, for Monte-Carlo loops.
    #[inline]
    pub(crate) fn reduce_fast(&self, mut t: Coords<f64>) -> Point<f64> {
        for i in 0..t.len() {
            let n = t[i].floor();
            if n != 0.0 {
                self.shift_f64(&mut t, i, n);
            }
            if t[i] >= 1.0 {
                self.shift_f64(&mut t, i, 1.0);
            }
            if t[i] < 0.0 {
                // only reachable through rounding of tiny negatives
                t[i] = 0.0;
            }
        }
        Point { coords: t }
    }

    /// Haar-distributed point: i.i.d. uniform second-kind coordinates.
    pub fn haar_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<f64> {
        Point { coords: (0..self.dim()).map(|_| rng.random::<f64>()).collect() }
    }

    /// Left translation `h · x`, with `h` in second-kind coordinates.
    pub fn translate<T: Scalar>(&self, h: &[T], x: &Point<T>) -> Result<Point<T>> {
        self.check_dim(h)?;
        let g = self.algebra.mul_second(h, &x.coords);
        Ok(self.reduce(&g)?.0)
    }

    /// Left translation by `exp(u)`, with `u` in first-kind coordinates.
    pub(crate) fn translate_exp(&self, u: &[f64], x: &Point<f64>) -> Point<f64> {
        let c = self.algebra.compiled();
        self.reduce_fast(c.mul(&c.to_second.eval(u), &x.coords))
    }

    /// Point of `X` for an element given in first-kind coordinates.
    pub fn project_first_kind(&self, x: &[f64]) -> Result<Point<f64>> {
        self.check_dim(x)?;
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoordinate);
        }
        Ok(self.reduce_fast(self.algebra.second_from_first_raw(x)))
    }

    /// Second-kind coordinates `r = q · λ` over lattice words `λ` that make every
    /// coordinate of `r` lie in `(-1, 1)`: at each index both integers bracketing
    /// the running coordinate are tried.
    fn near_identity_representatives(&self, q: &[f64]) -> Vec<Coords<f64>> {
        let mut states: Vec<Coords<f64>> = vec![q.iter().copied().collect()];
        for i in 0..q.len() {
            let mut next = Vec::with_capacity(states.len() * 2);
            for s in states {
                let f = s[i].floor();
                for n in [f, f + 1.0] {
                    let mut r = s.clone();
                    if n != 0.0 {
                        self.shift_f64(&mut r, i, n);
                    }
                    next.push(r);
                }
            }
            states = next;
        }
        states
    }

    /// Distance induced by the right-invariant metric `d(g, h) = |log(h g⁻¹)|`,
    /// scaled by `metric_scale` and minimized over nearby lattice translates.
    pub fn local_distance(&self, x: &Point<f64>, y: &Point<f64>) -> f64 {
        if x == y {
            return 0.0;
        }
        let alg = &self.algebra;
        let xf = alg.first_from_second_raw(&x.coords);
        let yf = alg.first_from_second_raw(&y.coords);
        let best = self.conjugated_min(&xf, &yf).min(self.conjugated_min(&yf, &xf));
        best * self.metric_scale
    }

    /// `min_λ |Ad_a log(a⁻¹ b λ)| = min_λ |log(b λ a⁻¹)|` over the near-identity
    /// representatives, for lifts given in first-kind coordinates. Unscaled.
    pub(crate) fn conjugated_min(&self, af: &[f64], bf: &[f64]) -> f64 {
        let alg = &self.algebra;
        let neg_a: Coords<f64> = af.iter().map(|v| -v).collect();
        let q = alg.second_from_first_raw(&alg.bch_raw(&neg_a, bf));
        let abelian = alg.is_abelian();
        self.near_identity_representatives(&q)
            .iter()
            .map(|r| {
                let log_r = alg.first_from_second_raw(r);
                if abelian {
                    euclidean_norm(&log_r)
                } else {
                    let conj = alg.bch_raw(&alg.bch_raw(af, &log_r), &neg_a);
                    euclidean_norm(&conj)
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Closure of integer coordinates under products, checked exactly on small words.
fn check_lattice_closed(alg: &NilpotentAlgebra) -> Result<()> {
    if alg.is_abelian() {
        return Ok(());
    }
    let d = alg.dim();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_1a77);
    let mut words: Vec<Vec<i64>> = (0..d)
        .map(|i| (0..d).map(|j| i64::from(i == j)).collect())
        .collect();
    for _ in 0..24 {
        words.push((0..d).map(|_| rng.random_range(-3..=3)).collect());
    }
    for a in &words {
        for b in &words {
            let ga: Coords<Rational> = a.iter().map(|&v| Rational::from_i64(v)).collect();
            let gb: Coords<Rational> = b.iter().map(|&v| Rational::from_i64(v)).collect();
            let prod = alg.mul_second(&ga, &gb);
            let inv = alg.second_from_first_raw(
                &alg.first_from_second_raw(&ga).iter().map(|v| -v.clone()).collect::<Coords<_>>(),
            );
            if prod.iter().chain(inv.iter()).any(|c| !c.is_integer()) {
                return Err(Error::LatticeNotSubgroup(format!(
                    "product of {a:?} and {b:?} has coordinates {:?}",
                    prod.iter().map(ToString::to_string).collect::<Vec<_>>()
                )));
            }
        }
    }
    Ok(())
}
