//! Numerical building blocks: special functions, quadrature, optimization, statistics.

pub mod optim;
pub mod quad;
pub mod special;
pub mod stats;
pub mod serde_nan;
