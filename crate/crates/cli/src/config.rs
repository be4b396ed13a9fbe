//! TOML configuration: algebraic definitions with exact rational entries, and
//! experiment files with runtime parameters.

use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use nilmix::error::{Error, Result};
use nilmix::lie::NilpotentAlgebra;
use nilmix::linalg::QMatrix;
use nilmix::nilmanifold::{Nilmanifold, Point};
use nilmix::observables::ObservableSpec;
use nilmix::scalar::Rational;
use nilmix::spectral::Automorphism;
use nilmix::stochastics::{AdaptiveBudget, WindowRule};

/// A rational entry written as an integer or as a `[numerator, denominator]` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalEntry {
    Int(i64),
    Pair([i64; 2]),
}

impl RationalEntry {
    pub fn to_rational(&self) -> Result<Rational> {
        match *self {
            RationalEntry::Int(n) => Ok(Rational::from_integer(BigInt::from(n))),
            RationalEntry::Pair([_, 0]) => Err(Error::Config("zero denominator".into())),
            RationalEntry::Pair([p, q]) => Ok(Rational::new(BigInt::from(p), BigInt::from(q))),
        }
    }
}

/// Structure constants: each row `[i, j, k, num, den]` sets `[e_i, e_j] = (num/den) e_k`, 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraFile {
    pub dim: usize,
    /// Expected nilpotency step, checked when present.
    #[serde(default)]
    pub step: Option<usize>,
    #[serde(default)]
    pub brackets: Vec<[i64; 5]>,
}

impl AlgebraFile {
    pub fn build(&self) -> Result<NilpotentAlgebra> {
        let mut triples = Vec::with_capacity(self.brackets.len());
        for (row, &[i, j, k, p, q]) in self.brackets.iter().enumerate() {
            let index = |v: i64| -> Result<usize> {
                if v < 1 || v as usize > self.dim {
                    Err(Error::Config(format!("brackets[{row}]: index {v} outside 1..={}", self.dim)))
                } else {
                    Ok(v as usize - 1)
                }
            };
            let c = RationalEntry::Pair([p, q]).to_rational().map_err(|e| Error::Config(format!("brackets[{row}]: {e}")))?;
            triples.push((index(i)?, index(j)?, index(k)?, c));
        }
        let alg = NilpotentAlgebra::from_sparse(self.dim, &triples)?;
        if let Some(step) = self.step {
            if step != alg.step() {
                return Err(Error::Config(format!("declared step {step} but the algebra has step {}", alg.step())));
            }
        }
        Ok(alg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldFile {
    /// Path to an [`AlgebraFile`], relative to this file.
    pub algebra: PathBuf,
    #[serde(default = "one")]
    pub metric_scale: f64,
}

fn one() -> f64 {
    1.0
}

/// `Dα` on first-kind coordinates, listed by rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutomorphismFile {
    pub matrix: Vec<Vec<RationalEntry>>,
}

impl AutomorphismFile {
    pub fn matrix(&self) -> Result<QMatrix> {
        let rows = self
            .matrix
            .iter()
            .map(|r| r.iter().map(RationalEntry::to_rational).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Config(format!("matrix must be square: {n} rows but a row of length {}", r.len())));
        }
        Ok(QMatrix::from_rows(rows))
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn relative_to(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

pub fn load_manifold(path: &Path) -> Result<Nilmanifold> {
    let file: ManifoldFile = read_toml(path)?;
    let alg: AlgebraFile = read_toml(&relative_to(path, &file.algebra))?;
    Nilmanifold::new(alg.build()?, file.metric_scale)
}

pub fn load_automorphism(path: &Path, manifold: &Nilmanifold) -> Result<Automorphism> {
    let file: AutomorphismFile = read_toml(path)?;
    Automorphism::validate(manifold, file.matrix()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingSection {
    pub f0: ObservableSpec,
    /// Defaults to `f0`.
    #[serde(default)]
    pub f1: Option<ObservableSpec>,
    pub schedule: Vec<u64>,
    pub budget: AdaptiveBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultimixSection {
    pub observables: Vec<ObservableSpec>,
    pub gaps: Vec<u64>,
    pub budget: AdaptiveBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomySection {
    pub delta: f64,
    #[serde(default = "one")]
    pub l1: f64,
    #[serde(default = "one")]
    pub l2: f64,
    #[serde(default = "one")]
    pub multiplier: f64,
    /// Smallest side of the probed box.
    pub side: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquidSection {
    pub observable: ObservableSpec,
    /// Box offset `v` (first-kind coordinates); zero by default.
    #[serde(default)]
    pub offset: Option<Vec<f64>>,
    pub directions: Vec<Vec<f64>>,
    /// Side ratios; all equal by default.
    #[serde(default)]
    pub aspect: Option<Vec<f64>>,
    /// Translation `exp(u)` (first-kind); zero by default.
    #[serde(default)]
    pub u: Option<Vec<f64>>,
    /// Base point (second-kind, in `[0,1)`); the origin by default.
    #[serde(default)]
    pub g: Option<Vec<f64>>,
    pub schedule: Vec<f64>,
    pub budget: AdaptiveBudget,
    #[serde(default)]
    pub dichotomy: Option<DichotomySection>,
}

fn eight() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnstableSection {
    pub observable: ObservableSpec,
    /// One side per unstable direction.
    pub sides: Vec<f64>,
    #[serde(default)]
    pub g: Option<Vec<f64>>,
    pub schedule: Vec<u64>,
    #[serde(default = "eight")]
    pub translations: usize,
    pub budget: AdaptiveBudget,
}

fn adaptive() -> WindowRule {
    WindowRule::Adaptive
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltSection {
    pub observable: ObservableSpec,
    pub schedule: Vec<u64>,
    pub paths: u64,
    pub window: usize,
    #[serde(default = "adaptive")]
    pub window_rule: WindowRule,
    pub gk_budget: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DonskerSection {
    pub observable: ObservableSpec,
    pub n: u64,
    pub paths: u64,
    pub grid: Vec<f64>,
    pub window: usize,
    pub gk_budget: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoboundarySection {
    pub observable: ObservableSpec,
    pub window: usize,
    pub budget: u64,
    pub solve_terms: usize,
    pub solve_points: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiophantineSection {
    /// Defaults to the abelianized leading unstable eigenvector.
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub c2: f64,
    pub search_bounds: Vec<i64>,
}

/// One experiment file; paths are relative to the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifold: PathBuf,
    pub automorphism: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_worker")]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub mixing: Option<MixingSection>,
    #[serde(default)]
    pub multimix: Option<MultimixSection>,
    #[serde(default)]
    pub equid: Option<EquidSection>,
    #[serde(default)]
    pub unstable: Option<UnstableSection>,
    #[serde(default)]
    pub clt: Option<CltSection>,
    #[serde(default)]
    pub donsker: Option<DonskerSection>,
    #[serde(default)]
    pub coboundary: Option<CoboundarySection>,
    #[serde(default)]
    pub diophantine: Option<DiophantineSection>,
}

fn one_worker() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn strictly_increasing<T: PartialOrd>(name: &str, xs: &[T]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Config(format!("{name}: schedule is empty")));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{name}: schedule must be strictly increasing")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Reads the file and rebases relative paths on its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = read_toml(path)?;
        cfg.manifold = relative_to(path, &cfg.manifold);
        cfg.automorphism = relative_to(path, &cfg.automorphism);
        cfg.out = relative_to(path, &cfg.out);
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        if let Some(s) = &self.mixing {
            strictly_increasing("mixing.schedule", &s.schedule)?;
        }
        if let Some(s) = &self.multimix {
            strictly_increasing("multimix.gaps", &s.gaps)?;
        }
        if let Some(s) = &self.equid {
            strictly_increasing("equid.schedule", &s.schedule)?;
        }
        if let Some(s) = &self.unstable {
            strictly_increasing("unstable.schedule", &s.schedule)?;
        }
        if let Some(s) = &self.clt {
            strictly_increasing("clt.schedule", &s.schedule)?;
        }
        if let Some(s) = &self.diophantine {
            strictly_increasing("diophantine.search_bounds", &s.search_bounds)?;
        }
        Ok(())
    }

    pub fn manifold(&self) -> Result<Nilmanifold> {
        load_manifold(&self.manifold)
    }

    pub fn automorphism(&self, manifold: &Nilmanifold) -> Result<Automorphism> {
        load_automorphism(&self.automorphism, manifold)
    }
}

/// Base point from optional coordinates; the origin by default.
pub fn point_or_origin(coords: &Option<Vec<f64>>, dim: usize) -> Result<Point> {
    match coords {
        Some(c) => Point::new(c),
        None => Point::new(&vec![0.0; dim]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_entries() {
        let f: AutomorphismFile = toml::from_str("matrix = [[2, 1, 0], [1, 1, 0], [0, [1, 2], 1]]").unwrap();
        let m = f.matrix().unwrap();
        assert_eq!(m.row(2)[1], Rational::new(1.into(), 2.into()));
        let bad: AutomorphismFile = toml::from_str("matrix = [[1, [1, 0]], [0, 1]]").unwrap();
        assert!(bad.matrix().is_err());
    }

    #[test]
    fn algebra_indices_are_one_based() {
        let a: AlgebraFile = toml::from_str("dim = 3\nstep = 2\nbrackets = [[1, 2, 3, 1, 1]]").unwrap();
        let alg = a.build().unwrap();
        assert_eq!(alg.step(), 2);
        let wrong: AlgebraFile = toml::from_str("dim = 3\nstep = 3\nbrackets = [[1, 2, 3, 1, 1]]").unwrap();
        assert!(matches!(wrong.build(), Err(Error::Config(_))));
        let out: AlgebraFile = toml::from_str("dim = 2\nbrackets = [[1, 2, 3, 1, 1]]").unwrap();
        assert!(out.build().is_err());
    }

    #[test]
    fn schedules_must_increase() {
        assert!(strictly_increasing("s", &[1, 2, 3]).is_ok());
        assert!(strictly_increasing("s", &[1, 1]).is_err());
        assert!(strictly_increasing::<u64>("s", &[]).is_err());
    }
}
