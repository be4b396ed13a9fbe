//! Exact arithmetic in nilpotent Lie algebras over Q and the induced group law.

mod algebra;
pub mod bch;
mod compiled;
mod mpoly;

pub use algebra::{BracketEntry, NilpotentAlgebra, Tables};
pub use bch::BchSeries;
pub(crate) use compiled::{linear_in_second, CompiledMap};
pub use mpoly::MPoly;
