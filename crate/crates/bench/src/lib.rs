//! Seeded inputs for the pipeline benchmarks.

use insight_core::detect::Box2d;
use insight_core::fusion::{fit_gravity_box, FusedInstance};
use insight_core::{ClassId, DetectionRecord, Point3, Source};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform points in a `side`-meter cube.
pub fn cube_points(n: usize, side: f64, seed: u64) -> Vec<Point3> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| Point3::new(r.random_range(0.0..side), r.random_range(0.0..side), r.random_range(0.0..side)))
        .collect()
}

/// Instances with overlapping point blobs, so export has conflicts to settle.
pub fn overlapping_instances(n: usize, points_each: usize, seed: u64) -> Vec<FusedInstance> {
    let mut r = rng(seed);
    (0..n as u32)
        .map(|id| {
            let c = Point3::new(r.random_range(0.0..10.0), r.random_range(0.0..10.0), 1.0);
            let points: Vec<Point3> = (0..points_each)
                .map(|_| {
                    // snapped to a 1 cm lattice so neighbours share exact points
                    let q = |v: f64| (v * 100.0).round() / 100.0;
                    Point3::new(q(c.x + r.random_range(-0.3..0.3)), q(c.y + r.random_range(-0.3..0.3)), q(r.random_range(0.0..2.0)))
                })
                .collect();
            FusedInstance {
                area_id: "area_1".into(),
                instance_id: id,
                class: ClassId::new(r.random_range(0..23)).unwrap(),
                centroid: c,
                confidence: r.random_range(0.3..1.0),
                bbox: fit_gravity_box(&points),
                point_count: points.len(),
                observations: vec![],
                points,
            }
        })
        .collect()
}

/// Detections clustered on a few images so deduplication has real work.
pub fn detections(n: usize, images: usize, seed: u64) -> Vec<DetectionRecord> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let (x, y) = (r.random_range(0.0..600.0), r.random_range(0.0..400.0));
            let (w, h) = (r.random_range(10.0..80.0), r.random_range(10.0..80.0));
            DetectionRecord::new(
                format!("img_{}", r.random_range(0..images)),
                "area_1",
                ClassId::new(r.random_range(0..23)).unwrap(),
                Box2d::new(x, y, x + w, y + h),
                r.random_range(0.0..1.0),
                Source::ALL[r.random_range(0..4)],
            )
        })
        .collect()
}
