use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimate::{Estimate, McConfig};
use crate::observables::Observable;

use super::correlation::reference_mean;
use super::orbit::OrbitEngine;

/// Truncated Green–Kubo sum `σ²_J = ⟨f, f⟩ + 2 Σ_{j=1}^{J} ⟨f∘α^j, f⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenKubo {
    /// `σ̂²` at the selected window, clamped at 0 when slightly negative.
    pub sigma2: f64,
    pub se: f64,
    pub window: usize,
    /// `⟨f∘α^j, f⟩` for `j = 0..=max_window`.
    pub terms: Vec<Estimate>,
    /// `σ²_J` for every `J = 0..=max_window`, each from one estimator so its SE
    /// accounts for the covariance between terms.
    pub by_window: Vec<Estimate>,
    /// No run of three negligible terms was found before `max_window`.
    pub tail_flag: bool,
    /// The raw estimate was negative (within noise) and was set to 0.
    pub clamped: bool,
}

/// How the window `J` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowRule {
    /// Stop before the first run of three consecutive terms with `|C_j| ≤ SE`.
    Adaptive,
    /// Always use the maximal window.
    Fixed,
}

/// Estimates the Green–Kubo variance of a centered observable.
pub fn green_kubo(
    engine: &OrbitEngine,
    f: &Observable,
    max_window: usize,
    rule: WindowRule,
    budget: u64,
    mc: &McConfig,
    tag: u64,
) -> Result<GreenKubo> {
    let (terms, by_window) = green_kubo_columns(engine, f, max_window, budget, mc, tag)?;
    let k = max_window + 1;
    let run = (1..k.saturating_sub(2)).find(|&j| (j..j + 3).all(|i| terms[i].mean.abs() <= terms[i].se));
    let (window, tail_flag) = match rule {
        WindowRule::Fixed => (max_window, false),
        WindowRule::Adaptive => match run {
            Some(j) => (j - 1, false),
            None => (max_window, true),
        },
    };
    let chosen = by_window[window];
    let mut clamped = false;
    let sigma2 = if chosen.mean < 0.0 {
        if chosen.mean < -3.0 * chosen.se {
            return Err(Error::NegativeVarianceEstimate { sigma2: chosen.mean });
        }
        clamped = true;
        0.0
    } else {
        chosen.mean
    };
    Ok(GreenKubo { sigma2, se: chosen.se, window, terms, by_window, tail_flag, clamped })
}

/// Terms `⟨f∘α^j, f⟩` and partial sums `σ²_J` for `j, J = 0..=max_window`.
pub(crate) fn green_kubo_columns(
    engine: &OrbitEngine,
    f: &Observable,
    max_window: usize,
    budget: u64,
    mc: &McConfig,
    tag: u64,
) -> Result<(Vec<Estimate>, Vec<Estimate>)> {
    engine.check(max_window as i64)?;
    let m = engine.automorphism().manifold();
    let k = max_window + 1;
    let cols = mc.estimate_many(tag, budget, 2 * k, |rng, out| {
        let mut x = m.haar_sample(rng);
        let f0 = f.eval(&x);
        let mut cum = f0 * f0;
        out[0] = cum;
        out[k] = cum;
        for j in 1..k {
            x = engine.step(&x);
            let c = f0 * f.eval(&x);
            out[j] = c;
            cum += 2.0 * c;
            out[k + j] = cum;
        }
    });
    Ok((cols[..k].to_vec(), cols[k..].to_vec()))
}

/// Kolmogorov–Smirnov distance between a sample and `N(0, σ²)`.
pub fn ks_normal(sample: &mut [f64], sigma: f64) -> Result<f64> {
    let normal =
        Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(format!("normal reference law: {e}")))?;
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    Ok(sample.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let c = normal.cdf(x);
        d.max(c - i as f64 / n).max((i + 1) as f64 / n - c)
    }))
}

/// Parameters of [`clt_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltConfig {
    pub schedule: Vec<u64>,
    pub paths: u64,
    /// Largest Green–Kubo window.
    pub window: usize,
    pub window_rule: WindowRule,
    /// Draws for the Green–Kubo estimator.
    pub gk_budget: u64,
    pub mc: McConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n_schedule: Vec<u64>,
    pub sigma2_hat: f64,
    pub sigma2_se: f64,
    pub green_kubo: GreenKubo,
    /// Mean subtracted from `f` (exact or sampled).
    pub centering: Estimate,
    /// Sample variance of `n^{-1/2} S_n` per schedule point.
    pub empirical_variances: Vec<f64>,
    /// KS distance to `N(0, σ̂²)`; absent when `σ̂² = 0`.
    pub ks_statistics: Vec<Option<f64>>,
    pub sample_count: u64,
}

fn centered(f: &Observable, budget: u64, mc: &McConfig) -> (Observable, Estimate) {
    let mean = reference_mean(f, budget, mc, 0xc0);
    (f.shifted(mean.mean), mean)
}

/// Sums `f(α^i x)` for `i < n` along one orbit and records `S_n / √n` at each
/// schedule point.
fn scaled_sums(engine: &OrbitEngine, f: &Observable, schedule: &[u64], paths: u64, mc: &McConfig, tag: u64) -> Vec<Vec<f64>> {
    let m = engine.automorphism().manifold();
    let chunks = mc.map_chunks(tag, paths, |rng, count| {
        let mut rows = vec![Vec::with_capacity(count as usize); schedule.len()];
        for _ in 0..count {
            let mut x = m.haar_sample(rng);
            let mut s = 0.0;
            let mut i = 0u64;
            for (row, &n) in rows.iter_mut().zip(schedule) {
                while i < n {
                    s += f.eval(&x);
                    x = engine.step(&x);
                    i += 1;
                }
                row.push(s / (n as f64).sqrt());
            }
        }
        rows
    });
    let mut out = vec![Vec::with_capacity(paths as usize); schedule.len()];
    for chunk in chunks {
        for (o, c) in out.iter_mut().zip(chunk) {
            o.extend(c);
        }
    }
    out
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Green–Kubo variance, then the law of `n^{-1/2} S_n` along the schedule.
pub fn clt_experiment(engine: &OrbitEngine, f: &Observable, cfg: &CltConfig) -> Result<CltReport> {
    engine.automorphism().require_ergodic()?;
    if cfg.schedule.is_empty() || cfg.schedule.windows(2).any(|w| w[0] >= w[1]) || cfg.schedule[0] == 0 {
        return Err(Error::InvalidParameter("n schedule must be positive and strictly increasing".into()));
    }
    engine.check(*cfg.schedule.last().expect("non-empty") as i64)?;
    let (fc, centering) = centered(f, cfg.gk_budget.saturating_mul(10), &cfg.mc);
    let gk = green_kubo(engine, &fc, cfg.window, cfg.window_rule, cfg.gk_budget, &cfg.mc, 0xc1)?;
    let sums = scaled_sums(engine, &fc, &cfg.schedule, cfg.paths, &cfg.mc, 0xc2);
    let sigma = gk.sigma2.sqrt();
    let mut empirical_variances = Vec::with_capacity(sums.len());
    let mut ks_statistics = Vec::with_capacity(sums.len());
    for mut row in sums {
        empirical_variances.push(sample_variance(&row));
        ks_statistics.push(if sigma > 0.0 { Some(ks_normal(&mut row, sigma)?) } else { None });
    }
    Ok(CltReport {
        n_schedule: cfg.schedule.clone(),
        sigma2_hat: gk.sigma2,
        sigma2_se: gk.se,
        green_kubo: gk,
        centering,
        empirical_variances,
        ks_statistics,
        sample_count: cfg.paths,
    })
}

/// Sampled paths of `t ↦ (nσ²)^{-1/2} S_{nt}` with diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DonskerReport {
    pub n: u64,
    pub sigma2: f64,
    pub grid: Vec<f64>,
    /// `paths[p][k]` is path `p` at `grid[k]`.
    pub paths: Vec<Vec<f64>>,
    /// Sample variance across paths at each grid time.
    pub variances: Vec<f64>,
    /// Least-squares slope of the variance against `t`.
    pub variance_slope: f64,
    /// Correlation of `B(1/2) - B(1/4)` with `B(1/4)`.
    pub increment_correlation: f64,
}

/// Linear interpolation of the partial sums `S_0 = 0, S_1, …, S_n` at real time `s`.
fn interpolate(partial: &[f64], s: f64) -> f64 {
    let i = s.floor() as usize;
    if i + 1 >= partial.len() {
        return partial[partial.len() - 1];
    }
    let frac = s - i as f64;
    partial[i] + frac * (partial[i + 1] - partial[i])
}

/// Donsker paths for a centered observable with known `σ² > 0`.
#[allow(clippy::too_many_arguments)]
pub fn donsker_paths(
    engine: &OrbitEngine,
    f: &Observable,
    n: u64,
    path_count: u64,
    grid: &[f64],
    sigma2: f64,
    mc: &McConfig,
    tag: u64,
) -> Result<DonskerReport> {
    if !(sigma2 > 0.0) {
        return Err(Error::ZeroVariance);
    }
    if n == 0 || grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidParameter("need n ≥ 1 and grid times in [0, 1]".into()));
    }
    engine.check(n as i64)?;
    let m = engine.automorphism().manifold();
    let norm = (n as f64 * sigma2).sqrt();
    let probes = [0.25, 0.5];
    let chunks = mc.map_chunks(tag, path_count, |rng, count| {
        let mut out = Vec::with_capacity(count as usize);
        let mut partial = vec![0.0; n as usize + 1];
        for _ in 0..count {
            let mut x = m.haar_sample(rng);
            for i in 0..n as usize {
                partial[i + 1] = partial[i] + f.eval(&x);
                x = engine.step(&x);
            }
            let at = |t: f64| interpolate(&partial, t * n as f64) / norm;
            let row: Vec<f64> = grid.iter().chain(&probes).map(|&t| at(t)).collect();
            out.push(row);
        }
        out
    });
    let rows: Vec<Vec<f64>> = chunks.into_iter().flatten().collect();
    let g = grid.len();
    let variances: Vec<f64> = (0..g).map(|k| sample_variance(&rows.iter().map(|r| r[k]).collect::<Vec<_>>())).collect();
    let variance_slope = ols_slope(grid, &variances);
    let a: Vec<f64> = rows.iter().map(|r| r[g]).collect();
    let inc: Vec<f64> = rows.iter().map(|r| r[g + 1] - r[g]).collect();
    let increment_correlation = pearson(&a, &inc);
    let paths = rows.into_iter().map(|mut r| {
        r.truncate(g);
        r
    });
    Ok(DonskerReport {
        n,
        sigma2,
        grid: grid.to_vec(),
        paths: paths.collect(),
        variances,
        variance_slope,
        increment_correlation,
    })
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_quantiles_is_small() {
        let normal = Normal::new(0.0, 2.0).unwrap();
        let mut v: Vec<f64> = (0..999).map(|i| normal.inverse_cdf((i as f64 + 0.5) / 999.0)).collect();
        let ks = ks_normal(&mut v, 2.0).unwrap();
        // the quantiles come from a numerical inverse CDF accurate to ~1e-10
        assert!(ks <= 0.5 / 999.0 + 1e-9, "{ks}");
        let mut w = vec![10.0; 10];
        assert!((ks_normal(&mut w, 1.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn interpolation() {
        let p = [0.0, 1.0, 3.0];
        assert_eq!(interpolate(&p, 0.0), 0.0);
        assert_eq!(interpolate(&p, 1.5), 2.0);
        assert_eq!(interpolate(&p, 2.0), 3.0);
    }
}
