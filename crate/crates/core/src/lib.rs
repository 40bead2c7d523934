//! Level-set estimation from compressive measurements.
//!
//! The pipeline: a signal `x` is measured as `y = A x + n` with a Gaussian
//! sensing matrix, a box-constrained total-variation problem is solved with an
//! accelerated proximal-gradient loop, and the estimate is thresholded at the
//! target level `gamma`. Estimates are scored with the excess-risk functional
//! and compared against thresholding of the proxy observations `A^T y`.

pub mod error;
pub mod harness;
pub mod image;
pub mod phantom;
pub mod pgm;
pub mod risk;
pub mod sensing;
pub mod solver;
pub mod tv;

pub use error::{Error, Result};
pub use image::{extract_level_set, reshape_to_image, symmetric_difference, Image, LevelSetMask, LevelSpec};
pub use sensing::{LinearOperator, MeasurementSet, SensingOperator};
pub use solver::{solve, SolverConfig, SolverResult};
pub use tv::{tv_norm, tv_prox, TvFlavor};
