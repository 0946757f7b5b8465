//! Continued fractions and the maximal product of consecutive partial
//! quotients: exact expansions, product statistics, growth functions,
//! Gauss-map pressure, dimension formulas, level-set generators and
//! Monte-Carlo drivers.

pub mod cf;
pub mod dim;
pub mod error;
pub mod growth;
pub mod levelset;
pub mod montecarlo;
pub mod numerics;
pub mod pressure;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
