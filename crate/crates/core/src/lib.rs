//! Instance segmentation of Gaussian-splat scenes by lifting 2D masks.
//!
//! Each Gaussian collects votes from the instance IDs of pixels it dominates
//! across calibrated views; the labeled scene can then be splatted back into
//! any view as an instance mask.

// Negated comparisons are how NaN gets rejected in validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod labeler;
pub mod mask;
pub mod raster;
pub mod refine;
pub mod rng;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::Camera;
pub use mask::{InstanceId, InstanceMask2D, BACKGROUND};
pub use scene::{GaussianParams, GaussianScene, LabelAssignment, Provenance};
