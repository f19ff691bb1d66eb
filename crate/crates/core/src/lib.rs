//! Sampling-based inner and outer polytopic approximations of the finite-horizon
//! sampled-data viability kernel of a constrained linear time-invariant system.

pub mod discretization;
#[cfg(feature = "ellipsoid")]
pub mod ellipsoid;
pub mod error;
pub mod feasibility;
pub mod geometry;
pub mod hull;
pub mod kernel;
pub mod lp;
pub mod oracle;
pub mod presets;
pub mod problem;
pub mod sampling;

pub use error::{Error, Result};
pub use geometry::{Halfspace, Polytope, Ray};
pub use problem::{LtiSystem, SampledDataProblem};
