use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Estimate, McConfig};
use crate::nilmanifold::{Nilmanifold, Point};
use crate::observables::Observable;
use crate::report::{ExperimentReport, FitModel, PointFlag, SeriesPoint};
use crate::scalar::Coords;
use crate::stochastics::{reference_mean, AdaptiveBudget};

use super::quadrature::line_average;

/// Affine box `ι(t) = v + Σ t_i w_i`, `t ∈ [0,T_1] × ⋯ × [0,T_k]`, in the Lie algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxMap {
    v: Vec<f64>,
    directions: Vec<Vec<f64>>,
    sides: Vec<f64>,
}

impl BoxMap {
    pub fn new(v: Vec<f64>, directions: Vec<Vec<f64>>, sides: Vec<f64>) -> Result<Self> {
        let d = v.len();
        let k = directions.len();
        if k == 0 {
            return Err(Error::InvalidParameter("box needs at least one direction".into()));
        }
        if sides.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: sides.len() });
        }
        if let Some(w) = directions.iter().find(|w| w.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: w.len() });
        }
        if v.iter().chain(directions.iter().flatten()).chain(&sides).any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteCoordinate);
        }
        if sides.iter().any(|&t| t <= 0.0) {
            return Err(Error::InvalidParameter("box sides must be positive".into()));
        }
        let m = DMatrix::from_fn(d, k, |r, c| directions[c][r]);
        if m.rank(1e-10) < k {
            return Err(Error::InvalidParameter("box directions are linearly dependent".into()));
        }
        Ok(BoxMap { v, directions, sides })
    }

    pub fn offset(&self) -> &[f64] {
        &self.v
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn sides(&self) -> &[f64] {
        &self.sides
    }

    pub fn rank(&self) -> usize {
        self.directions.len()
    }

    /// `|B| = Π T_i`.
    pub fn volume(&self) -> f64 {
        self.sides.iter().product()
    }

    /// Shortest side `min(B)`.
    pub fn min_side(&self) -> f64 {
        self.sides.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Same box with every side multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        BoxMap::new(self.v.clone(), self.directions.clone(), self.sides.iter().map(|t| t * s).collect())
    }

    /// Same box with coordinates listed in the order `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.rank() {
            return Err(Error::DimensionMismatch { expected: self.rank(), found: perm.len() });
        }
        BoxMap::new(
            self.v.clone(),
            perm.iter().map(|&i| self.directions[i].clone()).collect(),
            perm.iter().map(|&i| self.sides[i]).collect(),
        )
    }

    /// `ι(T ∘ s)` for `s ∈ [0,1]^k`.
    pub fn at_unit(&self, s: &[f64]) -> Coords<f64> {
        let mut x: Coords<f64> = self.v.iter().copied().collect();
        for ((w, &t), &si) in self.directions.iter().zip(&self.sides).zip(s) {
            for (xj, wj) in x.iter_mut().zip(w) {
                *xj += si * t * wj;
            }
        }
        x
    }
}

/// Stratified mean of `h` over `[0,1]^k`: an `s^k` grid with two uniform draws
/// per cell, `s^k ≤ budget / 2`. The cell-pair differences give an unbiased
/// variance estimate.
pub(crate) fn stratified<H>(mc: &McConfig, tag: u64, k: usize, budget: u64, h: H) -> Estimate
where
    H: Fn(&[f64]) -> f64 + Sync,
{
    let s = cells_per_axis(k, budget);
    let cells = s.pow(k as u32);
    let parts = mc.map_ranges(tag, cells, |rng, range| {
        let (mut sum, mut var) = (0.0, 0.0);
        let mut u = vec![0.0; k];
        let mut idx = vec![0u64; k];
        for c in range {
            let mut rest = c;
            for slot in idx.iter_mut().rev() {
                *slot = rest % s;
                rest /= s;
            }
            let mut draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                for (ui, &ii) in u.iter_mut().zip(&idx) {
                    *ui = (ii as f64 + rng.random::<f64>()) / s as f64;
                }
                h(&u)
            };
            let y1 = draw(rng);
            let y2 = draw(rng);
            sum += 0.5 * (y1 + y2);
            var += 0.25 * (y1 - y2) * (y1 - y2);
        }
        (sum, var)
    });
    let (sum, var) = parts.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let c = cells as f64;
    Estimate { mean: sum / c, se: var.sqrt() / c, samples: 2 * cells }
}

fn cells_per_axis(k: usize, budget: u64) -> u64 {
    let target = (budget / 2).max(1);
    let mut s = (target as f64).powf(1.0 / k as f64).floor().max(1.0) as u64;
    while s > 1 && s.checked_pow(k as u32).is_none_or(|c| c > target) {
        s -= 1;
    }
    while (s + 1).checked_pow(k as u32).is_some_and(|c| c <= target) {
        s += 1;
    }
    s
}

fn check_inputs(m: &Nilmanifold, bx: &BoxMap, u: &[f64], g: &Point) -> Result<()> {
    m.check_dim(bx.offset())?;
    m.check_dim(u)?;
    m.check_dim(g.coords())
}

/// The point `exp(u) exp(ι(t)) g Λ`.
fn box_point(m: &Nilmanifold, bx: &BoxMap, u: &[f64], g: &Point, s: &[f64]) -> Point {
    let c = m.algebra().compiled();
    let x = c.bch(u, &bx.at_unit(s));
    m.translate_exp(&x, g)
}

/// `|B|^{-1} ∫_B f(exp(u) exp(ι(t)) g Λ) dt` by stratified sampling.
pub fn box_average(f: &Observable, bx: &BoxMap, u: &[f64], g: &Point, budget: u64, mc: &McConfig, tag: u64) -> Result<Estimate> {
    let m = f.manifold();
    check_inputs(m, bx, u, g)?;
    if budget == 0 {
        return Err(Error::InvalidParameter("sample budget must be positive".into()));
    }
    if f.is_constant() {
        return Ok(Estimate::exact(f.eval(g)));
    }
    Ok(stratified(mc, tag, bx.rank(), budget, |s| f.eval(&box_point(m, bx, u, g, s))))
}

/// Deterministic average over a one-dimensional box.
pub fn box_quadrature(f: &Observable, bx: &BoxMap, u: &[f64], g: &Point, max_frequency: f64) -> Result<f64> {
    let m = f.manifold();
    check_inputs(m, bx, u, g)?;
    if bx.rank() != 1 {
        return Err(Error::InvalidParameter("quadrature oracle needs a one-dimensional box".into()));
    }
    let t = bx.sides()[0];
    let freq = max_frequency * bx.directions()[0].iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(line_average(|s| f.eval(&box_point(m, bx, u, g, &[s / t])), t, freq))
}

/// Budget doubling continues until `se ≤ error / SETTLE_MARGIN`, stricter than
/// the resolution test, so that maxima over envelopes are not driven by noise.
const SETTLE_MARGIN: f64 = 30.0;

pub(crate) fn settled(p: &SeriesPoint) -> bool {
    p.flag == PointFlag::Exact || p.se <= p.error / SETTLE_MARGIN
}

/// Number of sub-box sizes `T · 2^{j/J}`, `j < J`, whose worst error defines `e(T)`.
pub const ENVELOPE_STEPS: usize = 16;

/// Parameters of [`box_rate_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRateConfig {
    /// Values of `min(B)`.
    pub schedule: Vec<f64>,
    pub budget: AdaptiveBudget,
    pub mc: McConfig,
}

fn envelope_scales(t: f64) -> impl Iterator<Item = f64> {
    (0..ENVELOPE_STEPS).map(move |j| t * 2f64.powf(j as f64 / ENVELOPE_STEPS as f64))
}

/// Decay of `e(T) = max_j |avg(B_{T·2^{j/J}}) - ∫f|` with a log-log fit giving `κ̂`.
///
/// `shape` fixes the offset, directions and side ratios; each box is the
/// rescaling with `min(B) = T`. The envelope over `J` nearby sizes smooths
/// out accidental zeros of the oscillating error.
pub fn box_rate_experiment(f: &Observable, shape: &BoxMap, u: &[f64], g: &Point, cfg: &BoxRateConfig) -> Result<ExperimentReport> {
    check_inputs(f.manifold(), shape, u, g)?;
    if cfg.schedule.is_empty() || cfg.schedule.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidParameter("schedule must hold positive sides".into()));
    }
    let reference = reference_mean(f, cfg.budget.initial.saturating_mul(10), &cfg.mc, 0xe0);
    let mut points = Vec::with_capacity(cfg.schedule.len());
    for (i, &t) in cfg.schedule.iter().enumerate() {
        let mut budget = cfg.budget.initial.max(2);
        let mut round = 0u64;
        let point = loop {
            let mut worst: Option<SeriesPoint> = None;
            for (j, side) in envelope_scales(t).enumerate() {
                let bx = shape.scaled(side / shape.min_side())?;
                let tag = 0xe1_0000 | (i as u64) << 8 | (j as u64) << 4 | round;
                let est = box_average(f, &bx, u, g, budget, &cfg.mc, tag)?;
                let p = SeriesPoint::classify(t, est, reference.mean, reference.se);
                if worst.is_none_or(|w| p.error > w.error) {
                    worst = Some(p);
                }
            }
            let mut p = worst.expect("envelope is nonempty");
            p.samples = budget * ENVELOPE_STEPS as u64;
            if settled(&p) || budget >= cfg.budget.max {
                break p;
            }
            budget = (budget * 2).min(cfg.budget.max);
            round += 1;
        };
        points.push(point);
    }
    if points.iter().all(|p| p.flag == PointFlag::NoiseDominated) {
        return Err(Error::AllPointsNoiseDominated);
    }
    Ok(ExperimentReport::assemble("box_rate", "T", reference.mean, points, FitModel::LogLog))
}

/// Envelope errors `e(T)` from the quadrature oracle, for one-dimensional shapes
/// and observables with a known integral.
pub fn box_rate_oracle(f: &Observable, shape: &BoxMap, u: &[f64], g: &Point, schedule: &[f64], max_frequency: f64) -> Result<Vec<f64>> {
    let reference = f
        .integral()
        .ok_or_else(|| Error::InvalidParameter("oracle needs an observable with a known integral".into()))?;
    schedule
        .iter()
        .map(|&t| {
            envelope_scales(t).try_fold(0.0f64, |acc, side| {
                let bx = shape.scaled(side / shape.min_side())?;
                Ok(acc.max((box_quadrature(f, &bx, u, g, max_frequency)? - reference).abs()))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_size() {
        assert_eq!(cells_per_axis(1, 100), 50);
        assert_eq!(cells_per_axis(2, 100), 7);
        assert_eq!(cells_per_axis(3, 2), 1);
        assert_eq!(cells_per_axis(3, 2 * 125), 5);
    }

    #[test]
    fn stratified_linear_is_exact_in_mean() {
        let mc = McConfig::new(3, 2);
        let e = stratified(&mc, 1, 2, 20_000, |s| s[0] + 2.0 * s[1]);
        assert!((e.mean - 1.5).abs() < 5.0 * e.se + 1e-12);
        assert!(e.se < 1e-3);
    }

    #[test]
    fn rejects_dependent_directions() {
        assert!(BoxMap::new(vec![0.0; 2], vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0]).is_err());
        assert!(BoxMap::new(vec![0.0; 2], vec![vec![1.0, 2.0]], vec![0.0]).is_err());
    }
}
