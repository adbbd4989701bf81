//! Numerical toolkit for generalized (distributional) metrics realized as
//! nets of smooth metrics indexed by eps.

pub mod asymptotics;
pub mod curvature;
pub mod error;
pub mod fieldexpr;
pub mod geodesic;
pub mod levicivita;
pub mod metric;
pub mod quadrature;
pub mod scenario;
pub mod shadow;

pub use error::{Error, Result};
