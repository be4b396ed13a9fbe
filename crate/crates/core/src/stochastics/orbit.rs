use crate::error::{Error, Result};
use crate::linalg::QMatrix;
use crate::nilmanifold::Point;
use crate::scalar::{Coords, Rational};
use crate::spectral::Automorphism;

/// Default bound on `|n|` for orbit queries.
pub const DEFAULT_HORIZON: u64 = 1 << 13;

/// Iterates an automorphism on points of `X`.
///
/// Float orbits are produced by repeated single steps, since entries of `Dα^n`
/// grow like `|λ|^n` and would lose all precision in one product. Exact orbits
/// use the binary power table `Dα^{±2^k}`, built once.
#[derive(Clone, Debug)]
pub struct OrbitEngine {
    aut: Automorphism,
    horizon: u64,
    forward: Vec<QMatrix>,
    backward: Vec<QMatrix>,
}

impl OrbitEngine {
    pub fn new(aut: &Automorphism, horizon: u64) -> Self {
        let levels = (64 - horizon.max(1).leading_zeros()) as usize;
        let table = |m: &QMatrix| {
            let mut out = vec![m.clone()];
            for k in 1..levels {
                let p = &out[k - 1];
                out.push(p.mul(p));
            }
            out
        };
        OrbitEngine {
            forward: table(aut.matrix()),
            backward: table(aut.inverse_matrix()),
            aut: aut.clone(),
            horizon,
        }
    }

    pub fn with_default_horizon(aut: &Automorphism) -> Self {
        Self::new(aut, DEFAULT_HORIZON)
    }

    pub fn automorphism(&self) -> &Automorphism {
        &self.aut
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn check(&self, n: i64) -> Result<()> {
        if n.unsigned_abs() > self.horizon {
            Err(Error::HorizonExceeded { n, horizon: self.horizon })
        } else {
            Ok(())
        }
    }

    /// `α^n x` in floating point.
    pub fn apply(&self, n: i64, x: &Point) -> Result<Point> {
        self.check(n)?;
        let mut y = x.clone();
        for _ in 0..n.unsigned_abs() {
            y = self.aut.step(&y, n < 0);
        }
        Ok(y)
    }

    /// One forward step, without horizon bookkeeping.
    #[inline]
    pub fn step(&self, x: &Point) -> Point {
        self.aut.step(x, false)
    }

    /// Exact `Dα^n` from the power table.
    pub fn matrix_power(&self, n: i64) -> Result<QMatrix> {
        self.check(n)?;
        let table = if n < 0 { &self.backward } else { &self.forward };
        let mut acc = QMatrix::identity(self.aut.dim());
        let mut e = n.unsigned_abs();
        let mut k = 0;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&table[k]);
            }
            e >>= 1;
            k += 1;
        }
        Ok(acc)
    }

    /// `Dα^n v` for a first-kind vector, applying one table entry at a time.
    fn push_exact(&self, n: i64, v: &[Rational]) -> Coords<Rational> {
        let table = if n < 0 { &self.backward } else { &self.forward };
        let mut out: Coords<Rational> = v.iter().cloned().collect();
        let mut e = n.unsigned_abs();
        let mut k = 0;
        while e > 0 {
            if e & 1 == 1 {
                out = table[k].mul_vec(&out).into_iter().collect();
            }
            e >>= 1;
            k += 1;
        }
        out
    }

    /// `α^n x` in exact rational arithmetic.
    pub fn apply_exact(&self, n: i64, x: &Point<Rational>) -> Result<Point<Rational>> {
        self.check(n)?;
        let m = self.aut.manifold();
        let alg = m.algebra();
        let y = self.push_exact(n, &alg.first_from_second(x.coords())?);
        Ok(m.reduce(&alg.second_from_first(&y)?)?.0)
    }
}
