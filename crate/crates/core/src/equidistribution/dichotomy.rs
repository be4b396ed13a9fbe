use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::boxes::BoxMap;

const MAX_CANDIDATES: f64 = 1e8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Dichotomy {
    /// No small frequency satisfies all bounds.
    Equidistributed,
    /// A nonzero `z` with `‖z‖_∞ ≤ Zmax` and `|⟨z, Dπ w_i⟩| ≤ bound_i` for every `i`.
    Obstruction { z: Vec<i64> },
}

/// Outcome together with the bounds it was decided against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub outcome: Dichotomy,
    pub search_bound: i64,
    /// Per-direction bounds `C δ^{-L2} / T_i`.
    pub bounds: Vec<f64>,
    /// Abelianized directions `Dπ w_i`.
    pub projected: Vec<Vec<f64>>,
}

impl DichotomyReport {
    /// Whether `z` meets the search box and every frequency bound.
    pub fn admits(&self, z: &[i64]) -> bool {
        let sup = z.iter().map(|v| v.abs()).max().unwrap_or(0);
        sup > 0
            && sup <= self.search_bound
            && self.projected.iter().zip(&self.bounds).all(|(w, &b)| pairing(z, w).abs() <= b)
    }
}

fn pairing(z: &[i64], w: &[f64]) -> f64 {
    z.iter().zip(w).map(|(&a, &b)| a as f64 * b).sum()
}

/// Exhaustive search for an obstructing frequency.
///
/// `Zmax = ⌊C δ^{-L1}⌋`; the abelianization `Dπ` keeps the first `abelian_rank`
/// coordinates of each direction. Candidates are visited by increasing
/// `‖z‖_∞`, lexicographically within a shell, with the first nonzero entry
/// positive; the first admissible one is returned.
pub fn dichotomy_probe(
    bx: &BoxMap,
    delta: f64,
    l1: f64,
    l2: f64,
    multiplier: f64,
    abelian_rank: usize,
) -> Result<DichotomyReport> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidParameter("delta must lie in (0, 1/2)".into()));
    }
    if !(l1 > 0.0 && l2 > 0.0 && multiplier > 0.0) {
        return Err(Error::InvalidParameter("L1, L2 and the multiplier must be positive".into()));
    }
    let d = bx.offset().len();
    if abelian_rank == 0 || abelian_rank > d {
        return Err(Error::InvalidParameter(format!("abelian rank must lie in 1..={d}")));
    }
    let zmax_f = (multiplier * delta.powf(-l1)).floor();
    let candidates = (2.0 * zmax_f + 1.0).powi(abelian_rank as i32);
    if candidates > MAX_CANDIDATES {
        return Err(Error::SearchBoxTooLarge { candidates });
    }
    let zmax = zmax_f as i64;
    let numer = multiplier * delta.powf(-l2);
    let bounds: Vec<f64> = bx.sides().iter().map(|t| numer / t).collect();
    let projected: Vec<Vec<f64>> = bx.directions().iter().map(|w| w[..abelian_rank].to_vec()).collect();
    let mut report = DichotomyReport { outcome: Dichotomy::Equidistributed, search_bound: zmax, bounds, projected };
    let mut z = vec![0i64; abelian_rank];
    for r in 1..=zmax {
        if shell(&mut z, 0, r, false, false, &report) {
            report.outcome = Dichotomy::Obstruction { z };
            return Ok(report);
        }
    }
    Ok(report)
}

/// Depth-first lexicographic walk of `{‖z‖_∞ = r}` restricted to canonical signs.
fn shell(z: &mut [i64], pos: usize, r: i64, hit: bool, signed: bool, report: &DichotomyReport) -> bool {
    if pos == z.len() {
        return hit && report.admits(z);
    }
    let last = pos + 1 == z.len();
    let lo = if signed { -r } else { 0 };
    for v in lo..=r {
        if last && !hit && v.abs() != r {
            continue;
        }
        z[pos] = v;
        if shell(z, pos + 1, r, hit || v.abs() == r, signed || v != 0, report) {
            return true;
        }
    }
    z[pos] = 0;
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(w: Vec<f64>, t: f64) -> BoxMap {
        BoxMap::new(vec![0.0; 2], vec![w], vec![t]).unwrap()
    }

    #[test]
    fn search_order() {
        // first admissible z in the radius-1 shell under one constraint
        let walk = |w: Vec<f64>| {
            let report = DichotomyReport {
                outcome: Dichotomy::Equidistributed,
                search_bound: 1,
                bounds: vec![0.5],
                projected: vec![w],
            };
            let mut z = vec![0i64; 2];
            assert!(shell(&mut z, 0, 1, false, false, &report));
            assert!(report.admits(&z));
            z
        };
        assert_eq!(walk(vec![1.0, 0.0]), vec![0, 1]);
        assert_eq!(walk(vec![0.0, 1.0]), vec![1, 0]);
        assert_eq!(walk(vec![1.0, 1.0]), vec![1, -1]);
    }

    #[test]
    fn rational_line_is_obstructed() {
        let r = dichotomy_probe(&line(vec![1.0, -1.0], 1000.0), 0.1, 1.0, 1.0, 1.0, 2).unwrap();
        assert_eq!(r.outcome, Dichotomy::Obstruction { z: vec![1, 1] });
    }

    #[test]
    fn golden_line_is_not() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let r = dichotomy_probe(&line(vec![1.0, phi], 1000.0), 0.1, 1.0, 1.0, 1.0, 2).unwrap();
        assert_eq!(r.outcome, Dichotomy::Equidistributed);
        assert_eq!(r.search_bound, 10);
    }

    #[test]
    fn vacuous_and_guarded() {
        let bx = line(vec![1.0, -1.0], 1000.0);
        let r = dichotomy_probe(&bx, 0.49, 1.0, 1.0, 0.4, 2).unwrap();
        assert_eq!((r.search_bound, r.outcome), (0, Dichotomy::Equidistributed));
        assert!(matches!(dichotomy_probe(&bx, 1e-5, 1.0, 1.0, 1.0, 2), Err(Error::SearchBoxTooLarge { .. })));
    }
}
