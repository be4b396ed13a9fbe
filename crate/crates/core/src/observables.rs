//! Test functions on `X`: characters pulled back from the toral quotient,
//! periodized bumps, mollified observables and coboundaries.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::McConfig;
use crate::nilmanifold::{Nilmanifold, Point};
use crate::scalar::{euclidean_norm, Coords};
use crate::spectral::Automorphism;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    #[default]
    Cos,
    Sin,
}

fn default_degree() -> u32 {
    3
}

fn default_samples() -> usize {
    64
}

/// Serializable description of an observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservableSpec {
    Constant {
        value: f64,
    },
    /// `cos` or `sin` of `2π⟨m, π_ab(x)⟩`.
    Character {
        m: Vec<i64>,
        #[serde(default)]
        phase: Phase,
    },
    /// `(1 - (d(x, c)/R)²)^degree` inside the ball, 0 outside.
    Bump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "default_degree")]
        degree: u32,
    },
    /// Average of `base(exp(u) x)` over `samples` fixed shifts `u` drawn uniformly
    /// from the `epsilon`-ball.
    Mollified {
        base: Box<ObservableSpec>,
        epsilon: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        seed: u64,
    },
    /// `psi ∘ α - psi`.
    Coboundary { psi: Box<ObservableSpec> },
    /// `base - mean`; the exact integral is used when `mean` is omitted.
    Centered {
        base: Box<ObservableSpec>,
        #[serde(default)]
        mean: Option<f64>,
    },
}

#[derive(Debug)]
enum Kind {
    Constant(f64),
    Character {
        m: Vec<f64>,
        phase: Phase,
    },
    Bump {
        center: Point,
        center_first: Coords<f64>,
        radius: f64,
        degree: i32,
    },
    Mollified {
        base: Observable,
        epsilon: f64,
        shifts: Vec<Coords<f64>>,
    },
    Coboundary {
        psi: Observable,
        aut: Automorphism,
    },
    Shifted {
        base: Observable,
        offset: f64,
    },
}

/// An evaluatable function on `X`. Cheap to clone.
#[derive(Clone, Debug)]
pub struct Observable {
    kind: Arc<Kind>,
    manifold: Nilmanifold,
    integral: Option<f64>,
}

/// Sampled lower bound for the `θ`-Hölder norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub theta: f64,
    /// Largest sampled `|f(x) - f(y)| / d(x, y)^θ`.
    pub seminorm: f64,
    /// Largest sampled `|f|`.
    pub sup: f64,
    pub pairs: usize,
}

impl HolderEstimate {
    /// `seminorm + sup`, the sampled surrogate for `‖f‖_{C^θ}`.
    pub fn norm(&self) -> f64 {
        self.seminorm + self.sup
    }
}

impl Observable {
    fn wrap(manifold: &Nilmanifold, kind: Kind, integral: Option<f64>) -> Self {
        Observable { kind: Arc::new(kind), manifold: manifold.clone(), integral }
    }

    pub fn constant(manifold: &Nilmanifold, value: f64) -> Self {
        Self::wrap(manifold, Kind::Constant(value), Some(value))
    }

    /// Character of frequency `m ∈ Z^l`, where `l` is the abelianization rank.
    pub fn character(manifold: &Nilmanifold, m: &[i64], phase: Phase) -> Result<Self> {
        let l = manifold.algebra().abelian_rank();
        if m.len() != l {
            return Err(Error::DimensionMismatch { expected: l, found: m.len() });
        }
        let zero = m.iter().all(|&v| v == 0);
        let integral = match (zero, phase) {
            (true, Phase::Cos) => 1.0,
            _ => 0.0,
        };
        let m = m.iter().map(|&v| v as f64).collect();
        Ok(Self::wrap(manifold, Kind::Character { m, phase }, Some(integral)))
    }

    /// Periodized bump; the radius must stay below the injectivity guard.
    pub fn bump(manifold: &Nilmanifold, center: &Point, radius: f64, degree: u32) -> Result<Self> {
        manifold.check_dim(center.coords())?;
        let guard = manifold.injectivity_guard();
        if !(radius > 0.0 && radius < guard) {
            return Err(Error::SupportTooLarge { radius, guard });
        }
        if degree == 0 {
            return Err(Error::InvalidParameter("bump degree must be at least 1".into()));
        }
        let integral = bump_integral(manifold.dim(), radius / manifold.metric_scale(), degree);
        let center_first = manifold.algebra().first_from_second_raw(center.coords());
        Ok(Self::wrap(
            manifold,
            Kind::Bump { center: center.clone(), center_first, radius, degree: degree as i32 },
            Some(integral),
        ))
    }

    /// Lemma-style mollification by averaging over left translates `exp(u)`,
    /// `|u| ≤ ε` (in the local metric), with the shifts drawn once from `rng`.
    pub fn mollify<R: Rng + ?Sized>(&self, epsilon: f64, samples: usize, rng: &mut R) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
        }
        if samples == 0 {
            return Err(Error::InvalidParameter("mollifier needs at least one sample".into()));
        }
        let d = self.manifold.dim();
        let r = epsilon / self.manifold.metric_scale();
        let shifts = (0..samples).map(|_| uniform_ball(d, r, rng)).collect();
        Ok(Self::wrap(
            &self.manifold,
            Kind::Mollified { base: self.clone(), epsilon, shifts },
            self.integral,
        ))
    }

    /// `psi ∘ α - psi`, which integrates to zero.
    pub fn coboundary(psi: &Observable, aut: &Automorphism) -> Self {
        Self::wrap(&psi.manifold, Kind::Coboundary { psi: psi.clone(), aut: aut.clone() }, Some(0.0))
    }

    /// `self - offset`.
    pub fn shifted(&self, offset: f64) -> Self {
        if offset == 0.0 {
            return self.clone();
        }
        Self::wrap(
            &self.manifold,
            Kind::Shifted { base: self.clone(), offset },
            self.integral.map(|i| i - offset),
        )
    }

    /// Builds an observable from its description. `aut` is needed for coboundaries.
    pub fn from_spec(spec: &ObservableSpec, manifold: &Nilmanifold, aut: Option<&Automorphism>) -> Result<Self> {
        Ok(match spec {
            ObservableSpec::Constant { value } => Self::constant(manifold, *value),
            ObservableSpec::Character { m, phase } => Self::character(manifold, m, *phase)?,
            ObservableSpec::Bump { center, radius, degree } => {
                let (p, _) = manifold.reduce(center)?;
                Self::bump(manifold, &p, *radius, *degree)?
            }
            ObservableSpec::Mollified { base, epsilon, samples, seed } => {
                let base = Self::from_spec(base, manifold, aut)?;
                let mut rng = McConfig::new(*seed, 1).stream(0x6d6f_6c6c, 0);
                base.mollify(*epsilon, *samples, &mut rng)?
            }
            ObservableSpec::Coboundary { psi } => {
                let aut = aut.ok_or_else(|| Error::Config("coboundary observable needs an automorphism".into()))?;
                Self::coboundary(&Self::from_spec(psi, manifold, Some(aut))?, aut)
            }
            ObservableSpec::Centered { base, mean } => {
                let base = Self::from_spec(base, manifold, aut)?;
                let offset = match mean.or(base.integral) {
                    Some(m) => m,
                    None => {
                        return Err(Error::Config(
                            "centered observable needs an explicit mean when the integral is unknown".into(),
                        ))
                    }
                };
                base.shifted(offset)
            }
        })
    }

    pub fn manifold(&self) -> &Nilmanifold {
        &self.manifold
    }

    /// Exact Haar integral when known.
    pub fn integral(&self) -> Option<f64> {
        self.integral
    }

    pub fn is_constant(&self) -> bool {
        matches!(*self.kind, Kind::Constant(_))
    }

    /// Point around which the observable varies most, used to focus Hölder sampling.
    fn focus(&self) -> Option<Point> {
        match &*self.kind {
            Kind::Bump { center, .. } => Some(center.clone()),
            Kind::Mollified { base, .. } | Kind::Shifted { base, .. } => base.focus(),
            Kind::Coboundary { psi, .. } => psi.focus(),
            _ => None,
        }
    }

    /// Support radius for bumps (after mollification, grown by `ε`).
    fn support_radius(&self) -> Option<f64> {
        match &*self.kind {
            Kind::Bump { radius, .. } => Some(*radius),
            Kind::Mollified { base, epsilon, .. } => base.support_radius().map(|r| r + epsilon),
            Kind::Shifted { base, .. } => base.support_radius(),
            _ => None,
        }
    }

    /// Value at a point of `X`.
    #[inline]
    pub fn eval(&self, x: &Point) -> f64 {
        match &*self.kind {
            Kind::Constant(c) => *c,
            Kind::Character { m, phase } => character_value(m, *phase, x.coords()),
            Kind::Bump { center, center_first, radius, degree } => {
                // the toral projection bounds the distance from below
                let coarse: f64 = m_torus_gap(center.coords(), x.coords(), self.manifold.algebra().abelian_rank());
                let scale = self.manifold.metric_scale();
                if coarse * scale >= *radius {
                    return 0.0;
                }
                let alg = self.manifold.algebra();
                let xf = alg.first_from_second_raw(x.coords());
                let dist = self.manifold.conjugated_min(center_first, &xf) * scale;
                profile(dist / radius, *degree)
            }
            Kind::Mollified { base, shifts, .. } => {
                let sum: f64 = shifts.iter().map(|u| base.eval(&self.manifold.translate_exp(u, x))).sum();
                sum / shifts.len() as f64
            }
            Kind::Coboundary { psi, aut } => psi.eval(&aut.step(x, false)) - psi.eval(x),
            Kind::Shifted { base, offset } => base.eval(x) - offset,
        }
    }

    /// Value at an arbitrary group element in second-kind coordinates, computed
    /// without reducing to the fundamental domain where the formula allows it.
    pub fn eval_lift(&self, g: &[f64]) -> Result<f64> {
        self.manifold.check_dim(g)?;
        if g.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoordinate);
        }
        Ok(match &*self.kind {
            Kind::Character { m, phase } => character_value(m, *phase, g),
            Kind::Bump { center_first, radius, degree, .. } => {
                let alg = self.manifold.algebra();
                let xf = alg.first_from_second_raw(g);
                let dist = self.manifold.conjugated_min(center_first, &xf) * self.manifold.metric_scale();
                profile(dist / radius, *degree)
            }
            _ => self.eval(&self.manifold.reduce(g)?.0),
        })
    }

    /// Sampled Hölder norm: pairs `(x, exp(u) x)` with `|u|` log-uniform in
    /// `[1e-4, 0.5]`; half of the base points are placed near the focus point.
    pub fn holder_norm_estimate<R: Rng + ?Sized>(&self, theta: f64, pairs: usize, rng: &mut R) -> Result<HolderEstimate> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidParameter(format!("theta must lie in (0, 1], got {theta}")));
        }
        let m = &self.manifold;
        let d = m.dim();
        let scale = m.metric_scale();
        let focus = self.focus();
        let reach = self.support_radius().unwrap_or(0.5).min(0.5) * 1.2;
        let mut seminorm = 0.0f64;
        let mut sup = 0.0f64;
        for i in 0..pairs {
            let x = match &focus {
                Some(c) if i % 2 == 0 => m.translate_exp(&uniform_ball(d, reach / scale, rng), c),
                _ => m.haar_sample(rng),
            };
            let len = (1e-4f64.ln() + rng.random::<f64>() * (0.5f64.ln() - 1e-4f64.ln())).exp() / scale;
            let u = uniform_sphere(d, rng).into_iter().map(|v| v * len).collect::<Coords<f64>>();
            let y = m.translate_exp(&u, &x);
            let (fx, fy) = (self.eval(&x), self.eval(&y));
            sup = sup.max(fx.abs()).max(fy.abs());
            let dist = m.local_distance(&x, &y);
            if dist > 0.0 {
                seminorm = seminorm.max((fx - fy).abs() / dist.powf(theta));
            }
        }
        Ok(HolderEstimate { theta, seminorm, sup, pairs })
    }
}

#[inline]
fn character_value(m: &[f64], phase: Phase, t: &[f64]) -> f64 {
    let arg: f64 = m.iter().zip(t).map(|(a, b)| a * b).sum::<f64>() * 2.0 * PI;
    match phase {
        Phase::Cos => arg.cos(),
        Phase::Sin => arg.sin(),
    }
}

/// Euclidean distance between toral projections of two points, with wrap-around.
#[inline]
fn m_torus_gap(a: &[f64], b: &[f64], l: usize) -> f64 {
    a[..l]
        .iter()
        .zip(&b[..l])
        .map(|(x, y)| {
            let t = (x - y).abs().fract();
            let w = t.min(1.0 - t);
            w * w
        })
        .sum::<f64>()
        .sqrt()
}

#[inline]
fn profile(r: f64, degree: i32) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        (1.0 - r * r).powi(degree)
    }
}

/// `∫_{R^d} (1 - |v|²/ρ²)_+^k dv = ρ^d π^{d/2} Γ(k+1) / Γ(d/2 + k + 1)`.
pub(crate) fn bump_integral(d: usize, rho: f64, k: u32) -> f64 {
    let half_d = d as f64 / 2.0;
    rho.powi(d as i32) * PI.powf(half_d) * gamma_half(2 * k + 2) / gamma_half(d as u32 + 2 * k + 2)
}

/// `Γ(n / 2)` for a positive integer `n`.
fn gamma_half(n: u32) -> f64 {
    let (mut x, mut g) = if n % 2 == 0 { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
    while 2.0 * x < n as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

pub(crate) fn uniform_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Coords<f64> {
    loop {
        let v: Coords<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = euclidean_norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub(crate) fn uniform_ball<R: Rng + ?Sized>(d: usize, radius: f64, rng: &mut R) -> Coords<f64> {
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    uniform_sphere(d, rng).into_iter().map(|x| x * r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn character_values() {
        let t = Nilmanifold::torus(2);
        let f = Observable::character(&t, &[1, 0], Phase::Cos).unwrap();
        assert!(f.eval(&Point::new(&[0.25, 0.7]).unwrap()).abs() < 1e-15);
        let one = Observable::character(&t, &[0, 0], Phase::Cos).unwrap();
        assert_eq!(one.eval(&Point::new(&[0.3, 0.1]).unwrap()), 1.0);
        assert_eq!(one.integral(), Some(1.0));
        assert_eq!(f.integral(), Some(0.0));
    }

    #[test]
    fn bump_support() {
        let h = Nilmanifold::heisenberg();
        let c = Point::new(&[0.3, 0.6, 0.4]).unwrap();
        let f = Observable::bump(&h, &c, 0.4, 3).unwrap();
        assert_eq!(f.eval(&c), 1.0);
        let far = Point::new(&[0.8, 0.1, 0.9]).unwrap();
        assert!(h.local_distance(&c, &far) >= 0.4);
        assert_eq!(f.eval(&far), 0.0);
        assert!(matches!(Observable::bump(&h, &c, 0.6, 3), Err(Error::SupportTooLarge { .. })));
    }

    #[test]
    fn gamma_values() {
        assert!((gamma_half(1) - PI.sqrt()).abs() < 1e-14);
        assert!((gamma_half(2) - 1.0).abs() < 1e-14);
        assert!((gamma_half(5) - 0.75 * PI.sqrt()).abs() < 1e-14);
        assert!((gamma_half(8) - 6.0).abs() < 1e-14);
        // disc of radius 1, k = 1: π/2
        assert!((bump_integral(2, 1.0, 1) - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_holder() {
        let f = Observable::constant(&Nilmanifold::torus(2), -2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = f.holder_norm_estimate(1.0, 200, &mut rng).unwrap();
        assert_eq!(h.seminorm, 0.0);
        assert_eq!(h.norm(), 2.5);
    }

    #[test]
    fn spec_roundtrip() {
        let json = r#"{"kind":"bump","center":[0.3,0.6,0.4],"radius":0.4}"#;
        let spec: ObservableSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec, ObservableSpec::Bump { center: vec![0.3, 0.6, 0.4], radius: 0.4, degree: 3 });
        let toml_src = "kind = \"character\"\nm = [1, 0]\nphase = \"sin\"\n";
        let spec: ObservableSpec = toml::from_str(toml_src).unwrap();
        assert_eq!(spec, ObservableSpec::Character { m: vec![1, 0], phase: Phase::Sin });
    }
}
