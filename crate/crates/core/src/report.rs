//! Experiment series, flags and rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::Estimate;

/// Status of one schedule point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointFlag {
    /// `se ≤ error / 3`; used by the fit.
    Resolved,
    /// `se > error / 3`; excluded from the fit.
    NoiseDominated,
    /// Computed without sampling error.
    Exact,
}

impl PointFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointFlag::Resolved => "resolved",
            PointFlag::NoiseDominated => "noise_dominated",
            PointFlag::Exact => "exact",
        }
    }
}

/// One row of an experiment: the swept parameter, the estimate and its error
/// against the reference value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub parameter: f64,
    pub mean: f64,
    pub se: f64,
    pub error: f64,
    pub samples: u64,
    pub flag: PointFlag,
}

impl SeriesPoint {
    /// Classifies `|mean - reference|` against the standard error.
    pub fn classify(parameter: f64, est: Estimate, reference: f64, reference_se: f64) -> Self {
        let error = (est.mean - reference).abs();
        let se = (est.se * est.se + reference_se * reference_se).sqrt();
        let flag = if se == 0.0 {
            PointFlag::Exact
        } else if se <= error / 3.0 {
            PointFlag::Resolved
        } else {
            PointFlag::NoiseDominated
        };
        SeriesPoint { parameter, mean: est.mean, se, error, samples: est.samples, flag }
    }

    pub fn is_fit_usable(&self) -> bool {
        matches!(self.flag, PointFlag::Resolved | PointFlag::Exact) && self.error > 0.0
    }
}

/// Transformation applied before the least-squares fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `log y = a - rate · x`; the rate of `y = c ρ^x` is `-ln ρ`.
    LogLinear,
    /// `log y = a - rate · log x`.
    LogLog,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub model: FitModel,
    /// `-slope` of the transformed regression.
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
    /// Points dropped because `y ≤ 0` or non-finite.
    pub dropped: usize,
}

impl RateFit {
    /// `ρ̂ = exp(-rate)` for log-linear fits.
    pub fn rho(&self) -> f64 {
        (-self.rate).exp()
    }
}

/// Ordinary least squares on the transformed points.
pub fn rate_fit(xs: &[f64], ys: &[f64], model: FitModel) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), found: ys.len() });
    }
    let mut pts = Vec::with_capacity(xs.len());
    let mut dropped = 0;
    for (&x, &y) in xs.iter().zip(ys) {
        let tx = match model {
            FitModel::LogLinear => x,
            FitModel::LogLog if x > 0.0 => x.ln(),
            FitModel::LogLog => f64::NAN,
        };
        if y > 0.0 && y.is_finite() && tx.is_finite() {
            pts.push((tx, y.ln()));
        } else {
            dropped += 1;
        }
    }
    if pts.len() < 4 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("rate fit needs at least two distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit { model, rate: -slope, intercept, r2, points: pts.len(), dropped })
}

/// Report-level conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFlag {
    /// Every point agrees with the reference exactly; no fit.
    ExactAgreement,
    /// Every error is within 3 SE of zero (e.g. character pairs whose
    /// correlations vanish identically); no fit.
    ExactMixing,
    /// Some points were excluded from the fit.
    NoiseDominatedPoints { count: usize },
    /// The fit could not be computed.
    FitFailed { reason: String },
    /// Distances and rates depend on the chosen local metric.
    MetricRelative,
}

/// A swept series of estimates with an optional fitted rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    /// Name of the swept parameter (`n`, `T`, `gap`).
    pub parameter: String,
    pub reference: f64,
    pub points: Vec<SeriesPoint>,
    pub fit: Option<RateFit>,
    pub flags: Vec<ReportFlag>,
    pub total_samples: u64,
}

impl ExperimentReport {
    /// Builds the report and fits the usable points.
    pub fn assemble(
        name: &str,
        parameter: &str,
        reference: f64,
        points: Vec<SeriesPoint>,
        model: FitModel,
    ) -> Self {
        let total_samples = points.iter().map(|p| p.samples).sum();
        let mut flags = Vec::new();
        let mut fit = None;
        if points.iter().all(|p| p.flag == PointFlag::Exact && p.error == 0.0) {
            flags.push(ReportFlag::ExactAgreement);
        } else if points.iter().all(|p| p.flag != PointFlag::Resolved && p.error <= 3.0 * p.se) {
            flags.push(ReportFlag::ExactMixing);
        } else {
            let noisy = points.iter().filter(|p| p.flag == PointFlag::NoiseDominated).count();
            if noisy > 0 {
                flags.push(ReportFlag::NoiseDominatedPoints { count: noisy });
            }
            let usable: Vec<&SeriesPoint> = points.iter().filter(|p| p.is_fit_usable()).collect();
            let xs: Vec<f64> = usable.iter().map(|p| p.parameter).collect();
            let ys: Vec<f64> = usable.iter().map(|p| p.error).collect();
            match rate_fit(&xs, &ys, model) {
                Ok(f) => fit = Some(f),
                Err(e) => flags.push(ReportFlag::FitFailed { reason: e.to_string() }),
            }
        }
        ExperimentReport { name: name.into(), parameter: parameter.into(), reference, points, fit, flags, total_samples }
    }

    pub fn resolved_points(&self) -> usize {
        self.points.iter().filter(|p| p.flag == PointFlag::Resolved).count()
    }

    pub fn has_flag(&self, f: &ReportFlag) -> bool {
        self.flags.contains(f)
    }

    /// CSV with columns `parameter,mean,se,error,flag`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},mean,se,error,flag\n", self.parameter);
        for p in &self.points {
            out.push_str(&format!(
                "{},{:.12e},{:.6e},{:.6e},{}\n",
                fmt_param(p.parameter),
                p.mean,
                p.se,
                p.error,
                p.flag.as_str()
            ));
        }
        out
    }
}

pub(crate) fn fmt_param(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_sequence() {
        let xs: Vec<f64> = (0..8).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|n| 3.0 * 0.5f64.powf(*n)).collect();
        let f = rate_fit(&xs, &ys, FitModel::LogLinear).unwrap();
        assert!((f.rate - 2f64.ln()).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!((f.rho() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn power_law() {
        let xs: Vec<f64> = (4..12).map(|k| 2f64.powi(k)).collect();
        let ys: Vec<f64> = xs.iter().map(|t| 5.0 / (t * t)).collect();
        let f = rate_fit(&xs, &ys, FitModel::LogLog).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn drops_nonpositive() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [1.0, 0.0, 0.25, 0.125, 0.0625];
        let f = rate_fit(&xs, &ys, FitModel::LogLinear).unwrap();
        assert_eq!(f.dropped, 1);
        assert_eq!(rate_fit(&xs[..3], &ys[..3], FitModel::LogLinear), Err(Error::TooFewPoints(2)));
    }
}
