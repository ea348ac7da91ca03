use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::raster::{XyzRaster, SENTINEL};
use super::DepthError;

/// Pinhole intrinsics plus a camera→world rigid pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Row-major camera→world rotation.
    pub rotation: [[f64; 3]; 3],
    /// Camera origin in world coordinates, meters.
    pub translation: [f64; 3],
}

impl CameraModel {
    pub fn identity(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self {
            fx,
            fy,
            cx,
            cy,
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    fn rotation_matrix(&self) -> Matrix3<f64> {
        let r = &self.rotation;
        Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        )
    }

    pub fn validate(&self) -> Result<(), DepthError> {
        let intrinsics = [self.fx, self.fy, self.cx, self.cy];
        if intrinsics.iter().any(|v| !v.is_finite()) {
            return Err(DepthError::InvalidCamera("non-finite intrinsics"));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(DepthError::InvalidCamera("focal lengths must be positive"));
        }
        if self.translation.iter().any(|v| !v.is_finite()) {
            return Err(DepthError::InvalidCamera("non-finite translation"));
        }
        let r = self.rotation_matrix();
        if r.iter().any(|v| !v.is_finite()) {
            return Err(DepthError::InvalidCamera("non-finite rotation"));
        }
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if err > 1e-6 || r.determinant() < 0.0 {
            return Err(DepthError::InvalidCamera("rotation is not orthonormal"));
        }
        Ok(())
    }

    /// World point seen at pixel `(u, v)` with depth `d` along the optical axis.
    pub fn pixel_to_world(&self, u: f64, v: f64, d: f64) -> Vector3<f64> {
        let cam = Vector3::new(d * (u - self.cx) / self.fx, d * (v - self.cy) / self.fy, d);
        self.rotation_matrix() * cam + Vector3::from(self.translation)
    }

    /// Depth along the optical axis of a world point.
    pub fn world_depth(&self, p: Vector3<f64>) -> f64 {
        let cam = self.rotation_matrix().transpose() * (p - Vector3::from(self.translation));
        cam.z
    }
}

/// Single-channel depth image in meters; NaN marks missing depth.
#[derive(Debug, Clone)]
pub struct DepthRaster {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

pub fn back_project(depth: &DepthRaster, cam: &CameraModel) -> Result<XyzRaster, DepthError> {
    cam.validate()?;
    let n = depth.width as usize * depth.height as usize;
    if depth.data.len() != n {
        return Err(DepthError::LengthMismatch {
            expected: n,
            actual: depth.data.len(),
        });
    }
    let w = depth.width as usize;
    let mut out = Vec::with_capacity(n);
    for (i, &d) in depth.data.iter().enumerate() {
        if d.is_nan() {
            out.push(SENTINEL);
            continue;
        }
        if !d.is_finite() || d < 0.0 {
            return Err(DepthError::InvalidDepth(i));
        }
        let (u, v) = ((i % w) as f64, (i / w) as f64);
        let p = cam.pixel_to_world(u, v, d as f64);
        out.push([p.x as f32, p.y as f32, p.z as f32]);
    }
    XyzRaster::new(depth.width, depth.height, out)
}
