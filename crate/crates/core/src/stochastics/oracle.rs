//! Exact integrals of products of characters along an orbit.
//!
//! A character of frequency `m` composed with `α^n` is the character of
//! frequency `(Aᵀ)^n m`, where `A` is the integer abelianization matrix. A
//! product of cosines and sines expands into exponentials, and each
//! exponential integrates to 1 or 0 depending on whether its total frequency
//! vanishes.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::QMatrix;
use crate::observables::Phase;
use crate::scalar::Rational;
use crate::spectral::Automorphism;

/// `(Aᵀ)^n m` in exact arithmetic; negative `n` uses the inverse.
pub fn pulled_frequency(aut: &Automorphism, m: &[i64], n: i64) -> Result<Vec<BigInt>> {
    let a = aut.abelianization_matrix();
    if m.len() != a.rows() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: m.len() });
    }
    let base = if n < 0 { a.inverse().expect("unimodular") } else { a.clone() };
    let p: QMatrix = base.transpose().pow(n.unsigned_abs());
    let v: Vec<Rational> = m.iter().map(|&x| Rational::from_integer(x.into())).collect();
    Ok(p.mul_vec(&v)
        .into_iter()
        .map(|q| {
            assert!(q.is_integer(), "abelianization of a lattice automorphism is integral");
            q.to_integer()
        })
        .collect())
}

/// `∫_X ∏ χ_i(α^{n_i} x) dμ` for characters `χ_i = cos/sin(2π⟨m_i, ·⟩)`.
pub fn character_product_integral(aut: &Automorphism, terms: &[(Vec<i64>, Phase, i64)]) -> Result<f64> {
    let freqs = terms
        .iter()
        .map(|(m, _, n)| pulled_frequency(aut, m, *n))
        .collect::<Result<Vec<_>>>()?;
    let l = aut.abelianization_matrix().rows();
    let k = terms.len();
    let mut total = Complex64::zero();
    for signs in 0u64..(1u64 << k) {
        let mut coef = Complex64::new(1.0, 0.0);
        let mut sum = vec![BigInt::zero(); l];
        for (i, ((_, phase, _), f)) in terms.iter().zip(&freqs).enumerate() {
            let s = if signs >> i & 1 == 0 { 1 } else { -1 };
            coef *= match phase {
                Phase::Cos => Complex64::new(0.5, 0.0),
                Phase::Sin => Complex64::new(0.0, -0.5 * s as f64),
            };
            for (acc, c) in sum.iter_mut().zip(f) {
                *acc += c * s;
            }
        }
        if sum.iter().all(Zero::is_zero) {
            total += coef;
        }
    }
    Ok(total.re)
}

/// Frequency `m'` with `(Aᵀ)^n m' = -m`, so that `∫ χ_m · χ_{m'} ∘ α^n = ½` for cosines.
pub fn matching_frequency(aut: &Automorphism, m: &[i64], n: i64) -> Result<Vec<i64>> {
    pulled_frequency(aut, m, -n)?
        .into_iter()
        .map(|v| {
            i64::try_from(-v).map_err(|_| Error::InvalidParameter("matching frequency overflows i64".into()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_map_pairs() {
        let a = Automorphism::cat_map();
        let m = vec![1, 0];
        assert_eq!(character_product_integral(&a, &[(m.clone(), Phase::Cos, 0), (m.clone(), Phase::Cos, 0)]).unwrap(), 0.5);
        assert_eq!(character_product_integral(&a, &[(m.clone(), Phase::Cos, 0), (m.clone(), Phase::Cos, 3)]).unwrap(), 0.0);
        let mp = matching_frequency(&a, &m, 4).unwrap();
        let v = character_product_integral(&a, &[(m.clone(), Phase::Cos, 0), (mp, Phase::Cos, 4)]).unwrap();
        assert_eq!(v, 0.5);
        // sin² integrates to ½, sin·cos to 0
        assert_eq!(character_product_integral(&a, &[(m.clone(), Phase::Sin, 0), (m.clone(), Phase::Sin, 0)]).unwrap(), 0.5);
        assert_eq!(character_product_integral(&a, &[(m.clone(), Phase::Sin, 0), (m, Phase::Cos, 0)]).unwrap(), 0.0);
    }
}
