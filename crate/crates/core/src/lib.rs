//! Optimal execution with time-varying impact.

pub mod analysis;
pub mod cli;
pub mod continuous;
pub mod discrete;
pub mod error;
pub mod impact;
pub mod quad;
pub mod sweep;

pub use error::{ExecError, Result};
pub use impact::{DiscreteImpactGrid, ImpactPath, MarketModel, PathFamily};
