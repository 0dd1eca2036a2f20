//! Numerical laboratory for the Chern-Ricci flow on periodic Hermitian charts.

pub mod bk;
pub mod chern;
pub mod cutoff;
pub mod error;
pub mod estimates;
pub mod flow;
pub mod grid;
pub mod herm;
pub mod identities;
pub mod metric;
pub mod rng;

pub use error::{Error, Result};
pub use grid::{ComplexGrid, Dir, DiffOp, Scheme, ScalarField, TensorField, C64};
pub use herm::SmallMat;
pub use metric::MetricField;
