//! Back end for lifting 2D safety-equipment detections into metric 3D.
//!
//! Detections are projected through registered world-XYZ rasters, fused
//! across views into per-area instances, filtered by confidence and
//! cardinality caps, and exported as labeled point clouds and role-filtered
//! scene graphs. The [`eval`] module holds the evaluation metrics and
//! [`budget`] the payload delivery arithmetic.

pub mod budget;
pub mod depthio;
pub mod detect;
pub mod eval;
pub mod fusion;
pub mod pcexport;
pub mod plausibility;
pub mod scenegraph;
pub mod synth;
pub mod taxonomy;

/// World point in meters.
pub type Point3 = nalgebra::Point3<f64>;

pub use depthio::{RleMask, XyzRaster};
pub use detect::{DetectionRecord, GateConfig, Source};
pub use fusion::{FusedInstance, FusionConfig, GravityAlignedBox};
pub use taxonomy::{ClassId, Role, Taxonomy};
