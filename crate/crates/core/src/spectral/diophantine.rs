use std::cmp::Ordering;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Finite-box Diophantine constant of a direction.
///
/// The direction is normalized to unit length and frequencies are measured in
/// the Euclidean norm, so `c1_hat = min |⟨z, w⟩| · |z|^{c2}` over nonzero
/// integer `z` with `|z|_∞ ≤ search_bound`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiophantineReport {
    pub direction: Vec<f64>,
    pub c2: f64,
    pub c1_hat: f64,
    /// Minimizer with its first nonzero entry positive; ties go to the
    /// smallest sup-norm, then lexicographic order.
    pub argmin_z: Vec<i64>,
    pub search_bound: i64,
    /// Set when some `z` is orthogonal to the direction; `c1_hat` is then 0.
    pub failure: bool,
}

const MAX_CANDIDATES: f64 = 4e9;

#[derive(Clone, Debug)]
struct Best {
    value: f64,
    z: Vec<i64>,
}

impl Best {
    fn key_cmp(&self, other: &Best) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| sup(&self.z).cmp(&sup(&other.z)))
            .then_with(|| self.z.cmp(&other.z))
    }
}

fn sup(z: &[i64]) -> i64 {
    z.iter().map(|v| v.abs()).max().unwrap_or(0)
}

fn canonical(z: &[i64]) -> bool {
    z.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0)
}

/// Brute-force minimization over the integer box, pruned along the coordinate
/// where the direction is largest.
pub fn diophantine_constant(w: &[f64], c2: f64, zmax: i64) -> Result<DiophantineReport> {
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteCoordinate);
    }
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroDirection);
    }
    if zmax < 1 || !(c2 > 0.0) {
        return Err(Error::InvalidParameter(format!("need zmax >= 1 and c2 > 0, got {zmax}, {c2}")));
    }
    let l = w.len();
    let dir: Vec<f64> = w.iter().map(|x| x / norm).collect();
    let solve = (0..l).fold(0, |b, i| if dir[i].abs() > dir[b].abs() { i } else { b });
    let others: Vec<usize> = (0..l).filter(|&i| i != solve).collect();
    let candidates = (2.0 * zmax as f64 + 1.0).powi(others.len() as i32);
    if candidates > MAX_CANDIDATES {
        return Err(Error::SearchBoxTooLarge { candidates });
    }

    let eval = |z: &[i64]| -> f64 {
        let dot: f64 = z.iter().zip(&dir).map(|(&a, b)| a as f64 * b).sum();
        let n2: f64 = z.iter().map(|&a| (a * a) as f64).sum();
        dot.abs() * n2.powf(c2 / 2.0)
    };
    // z = e_solve seeds the bound and covers the zero-prefix case
    let mut seed_z = vec![0i64; l];
    seed_z[solve] = 1;
    let seed = Best { value: eval(&seed_z), z: seed_z };

    let search_prefix = |prefix: &[i64], best: &mut Best| {
        if prefix.iter().all(|&v| v == 0) {
            return;
        }
        let s: f64 = others.iter().zip(prefix).map(|(&i, &v)| v as f64 * dir[i]).sum();
        let p2: f64 = prefix.iter().map(|&v| (v * v) as f64).sum();
        let r = best.value * (1.0 + 1e-9) / p2.powf(c2 / 2.0) + 1e-15;
        let ws = dir[solve];
        let (a, b) = ((-s - r) / ws, (-s + r) / ws);
        let lo = (a.min(b).floor() as i64).max(-zmax);
        let hi = (a.max(b).ceil() as i64).min(zmax);
        let mut z = vec![0i64; l];
        for (&i, &v) in others.iter().zip(prefix) {
            z[i] = v;
        }
        for zs in lo..=hi {
            z[solve] = zs;
            if !canonical(&z) {
                continue;
            }
            let cand = Best { value: eval(&z), z: z.clone() };
            if cand.key_cmp(best) == Ordering::Less {
                *best = cand;
            }
        }
    };

    let best = if others.is_empty() {
        seed
    } else {
        (0..(2 * zmax + 1) as usize)
            .into_par_iter()
            .with_min_len(256)
            .fold(
                || seed.clone(),
                |mut best, idx| {
                    let first = idx as i64 - zmax;
                    let rest = others.len() - 1;
                    let mut prefix = vec![-zmax; rest + 1];
                    prefix[0] = first;
                    if rest == 0 {
                        search_prefix(&prefix, &mut best);
                        return best;
                    }
                    // odometer over the remaining prefix coordinates
                    loop {
                        search_prefix(&prefix, &mut best);
                        let mut k = rest;
                        loop {
                            if prefix[k] < zmax {
                                prefix[k] += 1;
                                break;
                            }
                            prefix[k] = -zmax;
                            k -= 1;
                            if k == 0 {
                                return best;
                            }
                        }
                    }
                },
            )
            .reduce(|| seed.clone(), |a, b| if b.key_cmp(&a) == Ordering::Less { b } else { a })
    };
    let failure = best.value <= 1e-12;
    Ok(DiophantineReport {
        direction: dir,
        c2,
        c1_hat: if failure { 0.0 } else { best.value },
        argmin_z: best.z,
        search_bound: zmax,
        failure,
    })
}

/// Direction in the span of `basis` with the largest finite-box constant among
/// the first basis vector and `trials` random combinations.
pub fn generic_direction<R: Rng + ?Sized>(
    basis: &[Vec<f64>],
    trials: usize,
    c2: f64,
    zmax: i64,
    rng: &mut R,
) -> Result<DiophantineReport> {
    let Some(first) = basis.first() else {
        return Err(Error::ZeroDirection);
    };
    let l = first.len();
    if basis.iter().any(|v| v.len() != l) {
        return Err(Error::DimensionMismatch { expected: l, found: basis.iter().map(Vec::len).max().unwrap_or(0) });
    }
    if let Some(z) = rational_annihilator(basis) {
        return Err(Error::SubspaceRational { z });
    }
    let mut best = diophantine_constant(first, c2, zmax)?;
    for _ in 0..trials {
        let coeffs: Vec<f64> = basis.iter().map(|_| rng.sample(StandardNormal)).collect();
        let v: Vec<f64> = (0..l).map(|i| basis.iter().zip(&coeffs).map(|(b, c)| b[i] * c).sum()).collect();
        let report = diophantine_constant(&v, c2, zmax)?;
        if report.c1_hat > best.c1_hat {
            best = report;
        }
    }
    Ok(best)
}

/// Small integer vector orthogonal to every basis vector, if one exists.
fn rational_annihilator(basis: &[Vec<f64>]) -> Option<Vec<i64>> {
    let l = basis[0].len();
    let m = nalgebra::DMatrix::from_fn(basis.len(), l, |r, c| basis[r][c]);
    let rank = m.rank(1e-9);
    if rank >= l {
        return None;
    }
    let bound = ((2e6f64.powf(1.0 / l as f64) - 1.0) / 2.0).floor().clamp(1.0, 50.0) as i64;
    let norms: Vec<f64> = basis.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut z = vec![-bound; l];
    let mut found: Option<Vec<i64>> = None;
    loop {
        if canonical(&z) {
            let zn = z.iter().map(|&a| (a * a) as f64).sum::<f64>().sqrt();
            let orth = basis
                .iter()
                .zip(&norms)
                .all(|(v, n)| v.iter().zip(&z).map(|(a, &b)| a * b as f64).sum::<f64>().abs() <= 1e-9 * n * zn);
            let better = found.as_ref().is_none_or(|f| (sup(&z), &z) < (sup(f), f));
            if orth && better {
                found = Some(z.clone());
            }
        }
        let mut k = l;
        loop {
            if k == 0 {
                return found;
            }
            k -= 1;
            if z[k] < bound {
                z[k] += 1;
                break;
            }
            z[k] = -bound;
        }
    }
}
