//! Conic modeling, automatic dualization and an interior-point solver.

pub mod compile;
pub mod dense;
pub mod dual;
pub mod ipm;
pub mod model;
pub mod svec;

mod report;

pub use dual::dualize;
pub use ipm::{IpmSettings, Status};
pub use model::*;
pub use report::*;
