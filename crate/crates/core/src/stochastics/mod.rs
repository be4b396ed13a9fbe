//! Orbit dynamics and statistical experiments: correlation decay, multiple
//! mixing, the central limit theorem and the cohomological equation.

mod clt;
mod coboundary;
mod correlation;
mod oracle;
mod orbit;

pub use clt::{clt_experiment, donsker_paths, green_kubo, ks_normal, CltConfig, CltReport, DonskerReport, GreenKubo, WindowRule};
pub use coboundary::{
    coboundary_make, coboundary_solve, coboundary_test, ApproxPotential, CoboundaryTest, CoboundaryTestConfig, Decision,
    Scheme, SolveReport,
};
pub use correlation::{
    correlation, correlation_series, mixing_experiment, multi_correlation, multimix_experiment, reference_mean,
    AdaptiveBudget, MixingConfig, MultiMixConfig,
};
pub use oracle::{character_product_integral, matching_frequency, pulled_frequency};
pub use orbit::{OrbitEngine, DEFAULT_HORIZON};
