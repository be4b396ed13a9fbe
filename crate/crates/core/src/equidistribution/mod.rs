//! Averages over box maps and unstable leaves, the obstruction search, and
//! the experiments that turn their errors into rates.

mod boxes;
mod dichotomy;
pub mod quadrature;
mod unstable;

pub use boxes::{box_average, box_quadrature, box_rate_experiment, box_rate_oracle, BoxMap, BoxRateConfig, ENVELOPE_STEPS};
pub use dichotomy::{dichotomy_probe, Dichotomy, DichotomyReport};
pub use unstable::{unstable_average, unstable_experiment, unstable_quadrature, spread_translations, ChartBlock, UnstableChart, UnstableConfig};

pub use crate::report::rate_fit;
