use std::f64::consts::FRAC_PI_4;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::Point3;

/// Box with its vertical axis along +z and a yaw fitted in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravityAlignedBox {
    pub center: Point3,
    /// (dx, dy, dz) in the yawed frame, meters.
    pub extents: [f64; 3],
    /// Radians about +z, canonical in `[-pi/4, pi/4)`.
    pub yaw: f64,
}

impl GravityAlignedBox {
    pub fn degenerate(at: Point3) -> Self {
        Self {
            center: at,
            extents: [0.0; 3],
            yaw: 0.0,
        }
    }

    /// Whether `p` lies inside the box, with `tol` meters of slack per axis.
    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        let (s, c) = self.yaw.sin_cos();
        let d = p - self.center;
        let local = [c * d.x + s * d.y, -s * d.x + c * d.y, d.z];
        local
            .iter()
            .zip(self.extents)
            .all(|(v, e)| v.abs() <= e / 2.0 + tol)
    }
}

/// Maps an axis angle into `[-pi/4, pi/4)`; a rectangle's axes repeat every pi/2.
pub fn canonical_yaw(theta: f64) -> f64 {
    let mut y = theta - FRAC_PI_2 * (theta / FRAC_PI_2).round();
    if y >= FRAC_PI_4 {
        y -= FRAC_PI_2;
    }
    if y < -FRAC_PI_4 {
        y += FRAC_PI_2;
    }
    y
}

/// Yaw from the principal axis of the ground-plane covariance, extents from
/// the point range in the yawed frame, z from the raw range.
pub fn fit_gravity_box(points: &[Point3]) -> GravityAlignedBox {
    match points {
        [] => return GravityAlignedBox::degenerate(Point3::origin()),
        [p] => return GravityAlignedBox::degenerate(*p),
        _ => {}
    }
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
    let (mx, my) = (mx / n, my / n);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.x - mx, p.y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let scale = sxx + syy;
    let isotropic = (2.0 * sxy).abs() <= 1e-12 * scale && (sxx - syy).abs() <= 1e-12 * scale;
    let yaw = if scale == 0.0 || isotropic {
        0.0
    } else {
        canonical_yaw(0.5 * (2.0 * sxy).atan2(sxx - syy))
    };

    let (s, c) = yaw.sin_cos();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        let local = [c * p.x + s * p.y, -s * p.x + c * p.y, p.z];
        for k in 0..3 {
            lo[k] = lo[k].min(local[k]);
            hi[k] = hi[k].max(local[k]);
        }
    }
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, (lo[2] + hi[2]) / 2.0];
    GravityAlignedBox {
        center: Point3::new(c * mid[0] - s * mid[1], s * mid[0] + c * mid[1], mid[2]),
        extents: [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]],
        yaw,
    }
}
