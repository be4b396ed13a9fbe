use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{merge_all, Accumulator, Estimate, McConfig};
use crate::nilmanifold::Point;
use crate::observables::Observable;
use crate::report::{ExperimentReport, FitModel, SeriesPoint};

use super::orbit::OrbitEngine;

/// Haar mean of `f`: exact when known, otherwise sampled with `budget` draws.
pub fn reference_mean(f: &Observable, budget: u64, mc: &McConfig, tag: u64) -> Estimate {
    match f.integral() {
        Some(v) => Estimate::exact(v),
        None => {
            let m = f.manifold();
            mc.estimate(tag, budget, |rng| f.eval(&m.haar_sample(rng)))
        }
    }
}

/// Evaluates `fs[i]` at `α^{ns[i]} x` along one forward orbit. `ns` must be
/// sorted and non-negative.
#[inline]
fn orbit_values(engine: &OrbitEngine, fs: &[Observable], ns: &[u64], rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let m = engine.automorphism().manifold();
    let mut x: Point = m.haar_sample(rng);
    let mut t = 0u64;
    for (i, (f, &n)) in fs.iter().zip(ns).enumerate() {
        while t < n {
            x = engine.step(&x);
            t += 1;
        }
        out[i] = f.eval(&x);
    }
}

fn normalize_times(engine: &OrbitEngine, fs: &[Observable], ns: &[i64]) -> Result<(Vec<Observable>, Vec<u64>)> {
    if fs.len() != ns.len() || fs.len() < 2 {
        return Err(Error::InvalidParameter("need equally many observables and times, at least two".into()));
    }
    let mut pairs: Vec<(i64, Observable)> = ns.iter().copied().zip(fs.iter().cloned()).collect();
    pairs.sort_by_key(|p| p.0);
    let n0 = pairs[0].0;
    let span = pairs[pairs.len() - 1].0 - n0;
    engine.check(span)?;
    Ok((pairs.iter().map(|p| p.1.clone()).collect(), pairs.iter().map(|p| (p.0 - n0) as u64).collect()))
}

fn product_estimate(engine: &OrbitEngine, fs: &[Observable], ns: &[i64], budget: u64, mc: &McConfig, tag: u64) -> Result<Estimate> {
    let (fs, ns) = normalize_times(engine, fs, ns)?;
    if fs.iter().all(Observable::is_constant) {
        let x = engine.automorphism().manifold().haar_sample(&mut mc.stream(tag, 0));
        return Ok(Estimate::exact(fs.iter().map(|f| f.eval(&x)).product()));
    }
    let k = fs.len();
    Ok(mc.estimate(tag, budget, |rng| {
        let mut buf = [0.0; 16];
        let out = if k <= 16 { &mut buf[..k] } else { unreachable!("at most 16 factors") };
        orbit_values(engine, &fs, &ns, rng, out);
        out.iter().product()
    }))
}

/// `∫ f0 · f1∘α^n dμ` by Haar Monte-Carlo.
pub fn correlation(
    engine: &OrbitEngine,
    f0: &Observable,
    f1: &Observable,
    n: i64,
    budget: u64,
    mc: &McConfig,
    tag: u64,
) -> Result<Estimate> {
    product_estimate(engine, &[f0.clone(), f1.clone()], &[0, n], budget, mc, tag)
}

/// `∫ ∏ f_i∘α^{n_i} dμ`; times are sorted and shifted to start at 0.
pub fn multi_correlation(
    engine: &OrbitEngine,
    fs: &[Observable],
    ns: &[i64],
    budget: u64,
    mc: &McConfig,
    tag: u64,
) -> Result<Estimate> {
    if fs.len() > 16 {
        return Err(Error::InvalidParameter("at most 16 factors".into()));
    }
    engine.automorphism().require_ergodic()?;
    product_estimate(engine, fs, ns, budget, mc, tag)
}

/// `C_n` for every `n` of a schedule from shared orbits (common random numbers).
pub fn correlation_series(
    engine: &OrbitEngine,
    f0: &Observable,
    f1: &Observable,
    schedule: &[u64],
    budget: u64,
    mc: &McConfig,
    tag: u64,
) -> Result<Vec<Estimate>> {
    Ok(correlation_accumulators(engine, f0, f1, schedule, budget, mc, tag)?.iter().map(Accumulator::estimate).collect())
}

fn check_schedule(schedule: &[u64]) -> Result<()> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("schedule must be non-empty and strictly increasing".into()));
    }
    Ok(())
}

fn correlation_accumulators(
    engine: &OrbitEngine,
    f0: &Observable,
    f1: &Observable,
    schedule: &[u64],
    budget: u64,
    mc: &McConfig,
    tag: u64,
) -> Result<Vec<Accumulator>> {
    check_schedule(schedule)?;
    engine.check(*schedule.last().expect("non-empty") as i64)?;
    let m = engine.automorphism().manifold();
    Ok(mc.accumulate_many(tag, budget, schedule.len(), |rng, out| {
        let mut x = m.haar_sample(rng);
        let v0 = f0.eval(&x);
        let mut t = 0;
        for (slot, &n) in out.iter_mut().zip(schedule) {
            while t < n {
                x = engine.step(&x);
                t += 1;
            }
            *slot = v0 * f1.eval(&x);
        }
    }))
}

/// Sampling plan shared by the decay experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveBudget {
    /// Draws in the first round.
    pub initial: u64,
    /// Total cap; each later round doubles the running total.
    pub max: u64,
}

impl AdaptiveBudget {
    pub fn fixed(samples: u64) -> Self {
        AdaptiveBudget { initial: samples, max: samples }
    }
}

/// Runs rounds of `round(tag, samples)` until every point is resolved or the
/// budget cap is reached, merging accumulators across rounds.
pub(crate) fn adaptive_rounds<F, G>(budget: &AdaptiveBudget, base_tag: u64, round: F, resolved: G) -> Vec<Accumulator>
where
    F: Fn(u64, u64) -> Vec<Accumulator>,
    G: Fn(&[Accumulator]) -> bool,
{
    let mut accs = round(base_tag, budget.initial);
    let mut total = budget.initial;
    let mut r = 1;
    while !resolved(&accs) && total < budget.max {
        let extra = total.min(budget.max - total);
        accs = merge_all(&accs, &round(base_tag.wrapping_add(r), extra));
        total += extra;
        r += 1;
    }
    accs
}

fn product_reference(means: &[Estimate]) -> (f64, f64) {
    let value: f64 = means.iter().map(|e| e.mean).product();
    // first-order propagation of the sampled means
    let var: f64 = (0..means.len())
        .map(|i| {
            let others: f64 = means.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, e)| e.mean).product();
            (others * means[i].se).powi(2)
        })
        .sum();
    (value, var.sqrt())
}

/// Parameters of [`mixing_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingConfig {
    pub schedule: Vec<u64>,
    pub budget: AdaptiveBudget,
    pub mc: McConfig,
}

/// Decay of `|C_n - μ0 μ1|` along the schedule with a log-linear fit of `ρ̂`.
pub fn mixing_experiment(engine: &OrbitEngine, f0: &Observable, f1: &Observable, cfg: &MixingConfig) -> Result<ExperimentReport> {
    engine.automorphism().require_ergodic()?;
    check_schedule(&cfg.schedule)?;
    let ref_budget = cfg.budget.initial.saturating_mul(10);
    let means = [reference_mean(f0, ref_budget, &cfg.mc, 0xa0), reference_mean(f1, ref_budget, &cfg.mc, 0xa1)];
    let (reference, reference_se) = product_reference(&means);
    let points = if f0.is_constant() || f1.is_constant() {
        let x = engine.automorphism().manifold().haar_sample(&mut cfg.mc.stream(0, 0));
        let c = if f0.is_constant() { f0.eval(&x) * means[1].mean } else { f1.eval(&x) * means[0].mean };
        cfg.schedule.iter().map(|&n| SeriesPoint::classify(n as f64, Estimate::exact(c), reference, reference_se)).collect()
    } else {
        let resolved = |accs: &[Accumulator]| {
            accs.iter().all(|a| {
                let e = a.estimate();
                let se = (e.se.powi(2) + reference_se.powi(2)).sqrt();
                se <= (e.mean - reference).abs() / 3.0
            })
        };
        let accs = adaptive_rounds(
            &cfg.budget,
            0x100,
            |tag, samples| {
                correlation_accumulators(engine, f0, f1, &cfg.schedule, samples, &cfg.mc, tag).expect("validated schedule")
            },
            resolved,
        );
        cfg.schedule
            .iter()
            .zip(&accs)
            .map(|(&n, a)| SeriesPoint::classify(n as f64, a.estimate(), reference, reference_se))
            .collect()
    };
    Ok(ExperimentReport::assemble("mixing", "n", reference, points, FitModel::LogLinear))
}

/// Parameters of [`multimix_experiment`]: times `n_i = i · gap`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiMixConfig {
    pub gaps: Vec<u64>,
    pub budget: AdaptiveBudget,
    pub mc: McConfig,
}

/// Error of the multiple correlation against the product of means as a
/// function of the minimal gap, with a log-linear fit.
pub fn multimix_experiment(engine: &OrbitEngine, fs: &[Observable], cfg: &MultiMixConfig) -> Result<ExperimentReport> {
    engine.automorphism().require_ergodic()?;
    check_schedule(&cfg.gaps)?;
    if fs.len() < 2 || fs.len() > 16 {
        return Err(Error::InvalidParameter("multiple mixing needs between 2 and 16 observables".into()));
    }
    let k = fs.len() as u64;
    engine.check((*cfg.gaps.last().expect("non-empty") * (k - 1)) as i64)?;
    let ref_budget = cfg.budget.initial.saturating_mul(10);
    let means: Vec<Estimate> =
        fs.iter().enumerate().map(|(i, f)| reference_mean(f, ref_budget, &cfg.mc, 0xb0 + i as u64)).collect();
    let (reference, reference_se) = product_reference(&means);
    let m = engine.automorphism().manifold();
    // evaluation plan: distinct (time, factor) pairs in time order
    let mut plan: Vec<(u64, usize)> =
        cfg.gaps.iter().flat_map(|&g| (0..fs.len()).map(move |i| (g * i as u64, i))).collect();
    plan.sort_unstable();
    plan.dedup();
    let slot_of: Vec<Vec<usize>> = cfg
        .gaps
        .iter()
        .map(|&g| (0..fs.len()).map(|i| plan.binary_search(&(g * i as u64, i)).expect("planned")).collect())
        .collect();
    let round = |tag: u64, samples: u64| {
        cfg.mc.accumulate_many(tag, samples, cfg.gaps.len(), |rng, out| {
            let mut x = m.haar_sample(rng);
            let mut t = 0;
            let values: Vec<f64> = plan
                .iter()
                .map(|&(n, i)| {
                    while t < n {
                        x = engine.step(&x);
                        t += 1;
                    }
                    fs[i].eval(&x)
                })
                .collect();
            for (slot, idx) in out.iter_mut().zip(&slot_of) {
                *slot = idx.iter().map(|&j| values[j]).product();
            }
        })
    };
    let resolved = |accs: &[Accumulator]| {
        accs.iter().all(|a| {
            let e = a.estimate();
            (e.se.powi(2) + reference_se.powi(2)).sqrt() <= (e.mean - reference).abs() / 3.0
        })
    };
    let accs = if fs.iter().all(Observable::is_constant) {
        round(0x200, 1)
    } else {
        adaptive_rounds(&cfg.budget, 0x200, round, resolved)
    };
    let points = cfg
        .gaps
        .iter()
        .zip(&accs)
        .map(|(&g, a)| SeriesPoint::classify(g as f64, a.estimate(), reference, reference_se))
        .collect();
    Ok(ExperimentReport::assemble("multimix", "gap", reference, points, FitModel::LogLinear))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nilmanifold::Nilmanifold;
    use crate::observables::Phase;
    use crate::spectral::Automorphism;

    #[test]
    fn constants_are_exact() {
        let e = OrbitEngine::with_default_horizon(&Automorphism::cat_map());
        let one = Observable::constant(&Nilmanifold::torus(2), 1.0);
        let c = correlation(&e, &one, &one, 5, 100, &McConfig::new(1, 2), 0).unwrap();
        assert_eq!((c.mean, c.se), (1.0, 0.0));
    }

    #[test]
    fn pair_and_triple_agree_for_two_factors() {
        let e = OrbitEngine::with_default_horizon(&Automorphism::cat_map());
        let t = Nilmanifold::torus(2);
        let f = Observable::character(&t, &[1, 2], Phase::Cos).unwrap();
        let mc = McConfig::new(3, 3);
        let a = correlation(&e, &f, &f, 3, 5000, &mc, 9).unwrap();
        let b = multi_correlation(&e, &[f.clone(), f.clone()], &[0, 3], 5000, &mc, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_is_refused() {
        let id = Automorphism::from_i64_rows(&Nilmanifold::torus(2), &[&[1, 0], &[0, 1]]).unwrap();
        let e = OrbitEngine::with_default_horizon(&id);
        let f = Observable::character(id.manifold(), &[1, 0], Phase::Cos).unwrap();
        let cfg = MixingConfig { schedule: vec![1, 2], budget: AdaptiveBudget::fixed(10), mc: McConfig::default() };
        assert!(matches!(mixing_experiment(&e, &f, &f, &cfg), Err(Error::NotErgodic { .. })));
    }
}
