use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::McConfig;
use crate::nilmanifold::Point;
use crate::observables::Observable;
use crate::spectral::Automorphism;

use super::clt::green_kubo_columns;
use super::correlation::reference_mean;
use super::orbit::OrbitEngine;

/// `ψ∘α - ψ`.
pub fn coboundary_make(psi: &Observable, aut: &Automorphism) -> Observable {
    Observable::coboundary(psi, aut)
}

/// Weights `w_i` of the truncated series `φ̂ = -Σ_{i<N} w_i f∘α^i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    Partial,
    Cesaro,
    Abel { r: f64 },
}

impl Scheme {
    pub fn weights(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| match self {
                Scheme::Partial => 1.0,
                Scheme::Cesaro => 1.0 - i as f64 / n as f64,
                Scheme::Abel { r } => r.powi(i as i32),
            })
            .collect()
    }
}

/// Pointwise approximate solution of `f = φ∘α - φ`.
#[derive(Clone, Debug)]
pub struct ApproxPotential {
    f: Observable,
    engine: OrbitEngine,
    weights: Vec<f64>,
}

impl ApproxPotential {
    /// `φ̂(x)`.
    pub fn eval(&self, x: &Point) -> f64 {
        let mut y = x.clone();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            if i > 0 {
                y = self.engine.step(&y);
            }
            acc -= w * self.f.eval(&y);
        }
        acc
    }

    pub fn terms(&self) -> usize {
        self.weights.len()
    }
}

/// Residual `f - (φ̂∘α - φ̂)` over sampled points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub n: usize,
    pub scheme: Scheme,
    pub residual_sup: f64,
    pub residual_l2: f64,
    /// Largest `|f|` seen on the sample, the surrogate for `‖f‖_∞`.
    pub f_sup: f64,
    pub points: u64,
}

/// Builds `φ̂` and measures its residual on `points` Haar samples.
#[allow(clippy::too_many_arguments)]
pub fn coboundary_solve(
    engine: &OrbitEngine,
    f: &Observable,
    n: usize,
    scheme: Scheme,
    points: u64,
    mc: &McConfig,
    tag: u64,
) -> Result<(ApproxPotential, SolveReport)> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one term".into()));
    }
    engine.check(n as i64 + 1)?;
    let mean = reference_mean(f, points.max(1000) * 10, mc, tag ^ 0x5eed);
    if mean.mean.abs() > 3.0 * mean.se + 1e-12 {
        return Err(Error::NotCentered { mean: mean.mean, se: mean.se });
    }
    let weights = scheme.weights(n);
    let m = engine.automorphism().manifold();
    // orbit values F_0..F_N give φ̂(x) = -Σ w_i F_i and φ̂(αx) = -Σ w_i F_{i+1}
    let parts = mc.map_chunks(tag, points, |rng, count| {
        let (mut sup, mut sq, mut fsup) = (0.0f64, 0.0f64, 0.0f64);
        let mut vals = vec![0.0; n + 1];
        for _ in 0..count {
            let mut x = m.haar_sample(rng);
            for (i, v) in vals.iter_mut().enumerate() {
                if i > 0 {
                    x = engine.step(&x);
                }
                *v = f.eval(&x);
            }
            let shifted: f64 = weights.iter().zip(&vals[1..]).map(|(w, v)| w * v).sum();
            let here: f64 = weights.iter().zip(&vals[..n]).map(|(w, v)| w * v).sum();
            let r = vals[0] + shifted - here;
            sup = sup.max(r.abs());
            sq += r * r;
            fsup = fsup.max(vals[0].abs());
        }
        (sup, sq, fsup)
    });
    let (sup, sq, fsup) = parts.into_iter().fold((0.0f64, 0.0, 0.0f64), |a, b| (a.0.max(b.0), a.1 + b.1, a.2.max(b.2)));
    let report = SolveReport {
        n,
        scheme,
        residual_sup: sup,
        residual_l2: (sq / points.max(1) as f64).sqrt(),
        f_sup: fsup,
        points,
    };
    Ok((ApproxPotential { f: f.clone(), engine: engine.clone(), weights }, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Coboundary,
    NotCoboundary,
    Inconclusive,
}

impl Decision {
    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::Coboundary => "Coboundary",
            Decision::NotCoboundary => "NotCoboundary",
            Decision::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoboundaryTest {
    pub decision: Decision,
    pub sigma2: f64,
    pub se: f64,
    pub window: usize,
    /// Cesàro residuals at `N` and `4N`.
    pub residuals: [SolveReport; 2],
}

/// Parameters of [`coboundary_test`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoboundaryTestConfig {
    pub window: usize,
    pub budget: u64,
    /// Base length `N` of the Cesàro check (also run at `4N`).
    pub solve_terms: usize,
    pub solve_points: u64,
    pub mc: McConfig,
}

/// Three-way decision from `σ̂²` and the convergence of the Cesàro residual.
///
/// `NotCoboundary` when `σ̂² > 3 SE`. Otherwise `Coboundary` when the residual
/// at `4N` is below `0.05 ‖f‖_∞` and shrank at least like `1/N` (ratio ≤ 0.35);
/// a true coboundary has residual `O(1/N)`, a generic observable `O(N^{-1/2})`.
pub fn coboundary_test(engine: &OrbitEngine, f: &Observable, cfg: &CoboundaryTestConfig) -> Result<CoboundaryTest> {
    let (_, by_window) = green_kubo_columns(engine, f, cfg.window, cfg.budget, &cfg.mc, 0xd0)?;
    let raw = by_window[cfg.window];
    let a = coboundary_solve(engine, f, cfg.solve_terms, Scheme::Cesaro, cfg.solve_points, &cfg.mc, 0xd1)?.1;
    let b = coboundary_solve(engine, f, 4 * cfg.solve_terms, Scheme::Cesaro, cfg.solve_points, &cfg.mc, 0xd1)?.1;
    let decision = if raw.mean > 3.0 * raw.se {
        Decision::NotCoboundary
    } else if residual_converges(&a, &b) {
        Decision::Coboundary
    } else {
        Decision::Inconclusive
    };
    Ok(CoboundaryTest { decision, sigma2: raw.mean, se: raw.se, window: cfg.window, residuals: [a, b] })
}

fn residual_converges(a: &SolveReport, b: &SolveReport) -> bool {
    let tiny = 1e-12 * b.f_sup.max(1.0);
    b.residual_l2 <= tiny || (b.residual_l2 <= 0.05 * b.f_sup && b.residual_l2 <= 0.35 * a.residual_l2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights() {
        assert_eq!(Scheme::Cesaro.weights(4), vec![1.0, 0.75, 0.5, 0.25]);
        assert_eq!(Scheme::Abel { r: 0.5 }.weights(3), vec![1.0, 0.5, 0.25]);
        assert_eq!(Scheme::Partial.weights(2), vec![1.0, 1.0]);
    }
}
