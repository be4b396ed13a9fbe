use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Estimate, McConfig};
use crate::nilmanifold::Point;
use crate::observables::Observable;
use crate::report::{ExperimentReport, FitModel, PointFlag, SeriesPoint};
use crate::scalar::Coords;
use crate::spectral::{jordan_split, Automorphism, BlockKind};
use crate::stochastics::{reference_mean, AdaptiveBudget};

use super::boxes::{settled, stratified, BoxMap};
use super::quadrature::line_average;

/// One factor of `ψ`: a Jordan block of `Dα` with `|λ| > 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChartBlock {
    pub kind: BlockKind,
    pub eigenvalue: (f64, f64),
    /// Indices into [`UnstableChart::basis`].
    pub range: std::ops::Range<usize>,
}

/// `ψ(b) = exp(b_1 w_1) ⋯ exp(b_u w_u)` over the unstable Jordan bases, in
/// block order, restricted to the box `Π [0, T_i]`.
#[derive(Clone, Debug)]
pub struct UnstableChart {
    aut: Automorphism,
    blocks: Vec<ChartBlock>,
    basis: Vec<Vec<f64>>,
    sides: Vec<f64>,
}

impl UnstableChart {
    pub fn new(aut: &Automorphism, sides: Vec<f64>) -> Result<Self> {
        let split = jordan_split(aut)?;
        let mut blocks = Vec::new();
        let mut basis = Vec::new();
        for b in split.unstable_blocks() {
            let start = basis.len();
            basis.extend(b.basis.iter().cloned());
            blocks.push(ChartBlock { kind: b.kind, eigenvalue: b.eigenvalue, range: start..basis.len() });
        }
        if basis.is_empty() {
            return Err(Error::InvalidParameter("automorphism has no unstable directions".into()));
        }
        if sides.len() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), found: sides.len() });
        }
        if sides.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter("chart sides must be positive".into()));
        }
        Ok(UnstableChart { aut: aut.clone(), blocks, basis, sides })
    }

    pub fn automorphism(&self) -> &Automorphism {
        &self.aut
    }

    /// `dim W^α`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn blocks(&self) -> &[ChartBlock] {
        &self.blocks
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn sides(&self) -> &[f64] {
        &self.sides
    }

    pub fn min_side(&self) -> f64 {
        self.sides.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn with_sides(&self, sides: Vec<f64>) -> Result<Self> {
        if sides.len() != self.dim() || sides.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter("chart sides must be positive, one per unstable direction".into()));
        }
        Ok(UnstableChart { sides, ..self.clone() })
    }

    /// First-kind coordinates of `ψ(b)`.
    pub fn psi_first(&self, b: &[f64]) -> Coords<f64> {
        let c = self.aut.manifold().algebra().compiled();
        let d = self.aut.dim();
        let mut acc: Coords<f64> = (0..d).map(|_| 0.0).collect();
        for (w, &bi) in self.basis.iter().zip(b) {
            let step: Coords<f64> = w.iter().map(|x| x * bi).collect();
            acc = c.bch(&acc, &step);
        }
        acc
    }

    /// The first-order chart `b ↦ Σ b_i w_i` as a box map.
    pub fn linear_box(&self) -> Result<BoxMap> {
        BoxMap::new(vec![0.0; self.aut.dim()], self.basis.clone(), self.sides.clone())
    }

    /// Determinant of `∂ log ψ / ∂ b` expressed in the basis `w`, by central
    /// differences. Exponential coordinates carry Haar measure, so this is 1
    /// exactly when `ψ` pushes Lebesgue measure to Haar measure.
    pub fn jacobian_det(&self, b: &[f64], h: f64) -> f64 {
        let u = self.dim();
        let d = self.aut.dim();
        let w = DMatrix::from_fn(d, u, |r, c| self.basis[c][r]);
        let svd = w.clone().svd(true, true);
        let mut jac = DMatrix::zeros(u, u);
        let mut bp = b.to_vec();
        for j in 0..u {
            bp[j] = b[j] + h;
            let plus = self.psi_first(&bp);
            bp[j] = b[j] - h;
            let minus = self.psi_first(&bp);
            bp[j] = b[j];
            let col = DVector::from_fn(d, |r, _| (plus[r] - minus[r]) / (2.0 * h));
            let coef = svd.solve(&col, 1e-12).expect("svd was computed with both factors");
            jac.set_column(j, &coef);
        }
        jac.determinant()
    }
}

fn check_point(chart: &UnstableChart, h: &[f64], g: &Point) -> Result<()> {
    let m = chart.aut.manifold();
    m.check_dim(h)?;
    m.check_dim(g.coords())
}

/// Float `Dα^n` from the exact power.
fn power_f64(aut: &Automorphism, n: u64) -> DMatrix<f64> {
    aut.matrix().pow(n).to_f64()
}

/// Evaluator for `b ↦ α^n(h ψ(b)) g Λ`, `b` given in unit coordinates.
fn orbit_point<'a>(chart: &'a UnstableChart, h: &[f64], g: &'a Point, n: u64) -> impl Fn(&[f64]) -> Point + 'a {
    let m = chart.aut.manifold();
    let c = m.algebra().compiled();
    let hx = c.to_first.eval(h);
    let a = power_f64(&chart.aut, n);
    move |s: &[f64]| {
        let b: Coords<f64> = s.iter().zip(&chart.sides).map(|(si, t)| si * t).collect();
        let x = c.bch(&hx, &chart.psi_first(&b));
        let y: Coords<f64> = (0..x.len()).map(|r| (0..x.len()).map(|k| a[(r, k)] * x[k]).sum()).collect();
        m.translate_exp(&y, g)
    }
}

/// `|B|^{-1} ∫_B f(α^n(h ψ(b)) g Λ) db` by stratified sampling; `h` in second-kind coordinates.
#[allow(clippy::too_many_arguments)]
pub fn unstable_average(
    f: &Observable,
    chart: &UnstableChart,
    h: &[f64],
    g: &Point,
    n: u64,
    budget: u64,
    mc: &McConfig,
    tag: u64,
) -> Result<Estimate> {
    check_point(chart, h, g)?;
    if budget == 0 {
        return Err(Error::InvalidParameter("sample budget must be positive".into()));
    }
    if f.is_constant() {
        return Ok(Estimate::exact(f.eval(g)));
    }
    let at = orbit_point(chart, h, g, n);
    Ok(stratified(mc, tag, chart.dim(), budget, |s| f.eval(&at(s))))
}

/// Deterministic version for one-dimensional charts. `max_frequency` bounds the
/// oscillation of `f` per unit length; it is scaled by the growth of `Dα^n w`.
pub fn unstable_quadrature(f: &Observable, chart: &UnstableChart, h: &[f64], g: &Point, n: u64, max_frequency: f64) -> Result<f64> {
    check_point(chart, h, g)?;
    if chart.dim() != 1 {
        return Err(Error::InvalidParameter("quadrature oracle needs a one-dimensional chart".into()));
    }
    let t = chart.sides[0];
    let a = power_f64(&chart.aut, n);
    let w = DVector::from_column_slice(&chart.basis[0]);
    let freq = max_frequency * (&a * w).norm();
    let at = orbit_point(chart, h, g, n);
    Ok(line_average(|b| f.eval(&at(&[b / t])), t, freq))
}

/// Parameters of [`unstable_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnstableConfig {
    pub schedule: Vec<u64>,
    /// Translations `h` (second-kind coordinates); `e(n)` is the worst error over them.
    pub translations: Vec<Vec<f64>>,
    pub budget: AdaptiveBudget,
    pub mc: McConfig,
}

/// `count` spread-out translations: coordinate `i` of `h_j` is
/// `frac((i+1) j / count + c_i)` with irrational offsets `c_i`.
pub fn spread_translations(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    (0..count)
        .map(|j| {
            (0..dim)
                .map(|i| {
                    let c = if i == 0 { 0.0 } else { golden / 2f64.powi(i as i32 - 1) };
                    ((i + 1) as f64 * j as f64 / count as f64 + c).fract()
                })
                .collect()
        })
        .collect()
}

/// Decay of `e(n) = max_h |unstable_average_n(h) - ∫f|` in `n` with a
/// log-linear fit of `ρ̂`. The bound is uniform in `h`, and the worst case over
/// a fixed set of translations removes accidental cancellations of a single one.
pub fn unstable_experiment(f: &Observable, chart: &UnstableChart, g: &Point, cfg: &UnstableConfig) -> Result<ExperimentReport> {
    if cfg.schedule.is_empty() || cfg.translations.is_empty() {
        return Err(Error::InvalidParameter("need a schedule and at least one translation".into()));
    }
    for h in &cfg.translations {
        check_point(chart, h, g)?;
    }
    let reference = reference_mean(f, cfg.budget.initial.saturating_mul(10), &cfg.mc, 0xe8);
    let mut points = Vec::with_capacity(cfg.schedule.len());
    for (i, &n) in cfg.schedule.iter().enumerate() {
        let mut budget = cfg.budget.initial.max(2);
        let mut round = 0u64;
        let point = loop {
            let mut worst: Option<SeriesPoint> = None;
            for (j, h) in cfg.translations.iter().enumerate() {
                let tag = 0xe9_0000_0000 | (i as u64) << 16 | (j as u64) << 4 | round;
                let est = unstable_average(f, chart, h, g, n, budget, &cfg.mc, tag)?;
                let p = SeriesPoint::classify(n as f64, est, reference.mean, reference.se);
                if worst.is_none_or(|w| p.error > w.error) {
                    worst = Some(p);
                }
            }
            let mut p = worst.expect("translations are nonempty");
            p.samples = budget * cfg.translations.len() as u64;
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
    Ok(ExperimentReport::assemble("unstable", "n", reference.mean, points, FitModel::LogLinear))
}
