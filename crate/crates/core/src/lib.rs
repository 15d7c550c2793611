//! Symmetry-aware 3D orientation estimation for point clouds.
//!
//! Two-stage pipeline: a small permutation-invariant regression model
//! predicts the orientation of an input cloud up to a 24-fold octahedral
//! flip, a classifier resolves the flip, and a conformal calibration layer
//! turns the classifier's distribution into prediction sets with a
//! marginal coverage guarantee.  Test-time augmentation voting is
//! available for both stages.

pub mod conformal;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod objectives;
pub mod octa;
pub mod pipeline;
pub mod so3;
pub mod symmetry;

pub use error::{Error, Result};
