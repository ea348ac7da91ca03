//! World-coordinate rasters, RLE masks and the masked point extraction that
//! lifts a 2D detection into 3D.

mod camera;
mod mask;
mod raster;

pub use camera::{back_project, CameraModel, DepthRaster};
pub use mask::{decode_mask, read_mask, PixelBits, RleMask};
pub use raster::{is_sentinel, read_xyz_raster, XyzRaster, SENTINEL};

use thiserror::Error;

use crate::Point3;

#[derive(Debug, Error)]
pub enum DepthError {
    #[error("bad magic: not an XYZR raster")]
    BadMagic,
    #[error("unsupported raster version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("trailing bytes: expected {expected} bytes, found {actual}")]
    TrailingBytes { expected: usize, actual: usize },
    #[error("dimensions {width}x{height} overflow")]
    DimensionOverflow { width: u32, height: u32 },
    #[error("expected {expected} elements, found {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("pixel {0} has non-finite coordinates")]
    NonFinitePixel(usize),
    #[error("invalid mask run {index}: {reason}")]
    InvalidRun { index: usize, reason: &'static str },
    #[error("mask {mask_w}x{mask_h} does not match raster {raster_w}x{raster_h}")]
    DimensionMismatch {
        mask_w: u32,
        mask_h: u32,
        raster_w: u32,
        raster_h: u32,
    },
    #[error("invalid camera: {0}")]
    InvalidCamera(&'static str),
    #[error("pixel {0} has negative or non-finite depth")]
    InvalidDepth(usize),
    #[error("centroid of an empty point set")]
    EmptyPointSet,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Non-sentinel world points under `mask`, in row-major order.
pub fn extract_points(raster: &XyzRaster, mask: &RleMask) -> Result<Vec<Point3>, DepthError> {
    if mask.width() != raster.width() || mask.height() != raster.height() {
        return Err(DepthError::DimensionMismatch {
            mask_w: mask.width(),
            mask_h: mask.height(),
            raster_w: raster.width(),
            raster_h: raster.height(),
        });
    }
    Ok(mask.indices().filter_map(|i| raster.get(i)).collect())
}

pub fn centroid(points: &[Point3]) -> Result<Point3, DepthError> {
    if points.is_empty() {
        return Err(DepthError::EmptyPointSet);
    }
    let sum = points
        .iter()
        .fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords);
    Ok(Point3::from(sum / points.len() as f64))
}
