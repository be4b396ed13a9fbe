use thiserror::Error;

/// Errors raised across the library. Indices in messages are 1-based, matching `e1, …, ed`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("malformed structure constants: {0}")]
    MalformedAlgebra(String),
    #[error("antisymmetry violated: [e{i}, e{j}] and [e{j}, e{i}] disagree in coordinate e{k}")]
    AntisymmetryViolation { i: usize, j: usize, k: usize },
    #[error("Jacobi identity fails on (e{i}, e{j}, e{k})")]
    JacobiViolation { i: usize, j: usize, k: usize },
    #[error("algebra is not nilpotent: lower central series stabilizes at dimension {stable_dim}")]
    NotNilpotent { stable_dim: usize },
    #[error("basis is not Malcev-ordered: {0}")]
    BasisNotMalcevOrdered(String),

    #[error("non-finite coordinate")]
    NonFiniteCoordinate,
    #[error("integer Malcev coordinates do not form a subgroup: {0}")]
    LatticeNotSubgroup(String),

    #[error("bracket not preserved on (e{i}, e{j})")]
    BracketNotPreserved { i: usize, j: usize },
    #[error("lattice not preserved: image of exp(e{generator}) under {map} has non-integer Malcev coordinates")]
    LatticeNotPreserved { generator: usize, map: &'static str },
    #[error("matrix is not unimodular (|det| = {det})")]
    NotUnimodular { det: String },
    #[error("Jordan structure is ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error("direction is zero")]
    ZeroDirection,
    #[error("subspace lies in the rational hyperplane orthogonal to {z:?}")]
    SubspaceRational { z: Vec<i64> },

    #[error("bump radius {radius} exceeds injectivity guard {guard}")]
    SupportTooLarge { radius: f64, guard: f64 },

    #[error("search box has {candidates} candidates (limit 1e8); reduce L1 or the multiplier")]
    SearchBoxTooLarge { candidates: f64 },
    #[error("every schedule point is noise-dominated")]
    AllPointsNoiseDominated,
    #[error("rate fit needs at least 4 positive finite points, got {0}")]
    TooFewPoints(usize),

    #[error("|n| = {n} exceeds the orbit horizon {horizon}")]
    HorizonExceeded { n: i64, horizon: u64 },
    #[error("automorphism is not ergodic: abelianization has a root-of-unity eigenvalue (cyclotomic factor of order {order})")]
    NotErgodic { order: u64 },
    #[error("Green-Kubo estimate is negative ({sigma2:.4e} < -3 SE); increase the window")]
    NegativeVarianceEstimate { sigma2: f64 },
    #[error("asymptotic variance is zero; the observable looks like a coboundary")]
    ZeroVariance,
    #[error("observable is not centered (mean {mean:.3e}, SE {se:.3e})")]
    NotCentered { mean: f64, se: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
