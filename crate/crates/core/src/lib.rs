//! Directional kernel density estimation and mean-shift mode clustering on
//! the unit hypersphere `Ω_q ⊂ R^{q+1}`.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: unit vectors, tangent spaces, exponential and log maps.
//! * [`kernels`]: kernel profiles and the KDE normalizing constant.
//! * [`estimators`]: the KDE with its gradient and Hessian estimators.
//! * [`bandwidth`]: the rule-of-thumb bandwidth.
//! * [`sampling`]: seeded samplers for uniform, von Mises–Fisher and mixture data.
//! * [`meanshift`]: the mean-shift iteration, clustering and the blurring variant.
//! * [`metrics`]: misclassification, confusion matrices, Hausdorff distance.
//! * [`oracles`]: brute-force references used for verification.

pub mod bandwidth;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod meanshift;
pub mod metrics;
pub mod oracles;
pub mod quadrature;
pub mod sampling;
pub mod special;

pub use error::{Error, Result};
pub use estimators::{HessianReport, KdeModel};
pub use geometry::{PointSet, TangentVector, UnitVector};
pub use kernels::DirectionalKernel;
