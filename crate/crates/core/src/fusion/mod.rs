//! Projection of gated detections into 3D and cross-view instance fusion.
//!
//! Each area owns a [`Registry`]. Observations are inserted in a fixed order
//! (image id ascending, then record index); an observation joins the nearest
//! same-class instance whose running centroid lies within `d_merge`, or
//! starts a new instance. Structural surfaces collapse to one instance per
//! area regardless of distance.

mod dump;
mod obb;

pub use dump::{
    read_instance_dump, read_point_sidecar, write_instance_dump, write_point_sidecar, DumpError,
};
pub use obb::{canonical_yaw, fit_gravity_box, GravityAlignedBox};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depthio::{centroid, extract_points, DepthError, RleMask, XyzRaster};
use crate::detect::{DetectionRecord, Source};
use crate::taxonomy::ClassId;
use crate::Point3;

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("detection has no mask")]
    NoMask,
    #[error("mask covers no valid depth pixels")]
    NoValidPoints,
    #[error(transparent)]
    Depth(#[from] DepthError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpAxis {
    #[serde(rename = "+z")]
    PosZ,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Centroid merge distance, meters.
    pub d_merge: f64,
    pub up_axis: UpAxis,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            d_merge: 0.5,
            up_axis: UpAxis::PosZ,
        }
    }
}

impl FusionConfig {
    pub fn with_d_merge(d_merge: f64) -> Self {
        Self {
            d_merge,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.d_merge > 0.0 && self.d_merge.is_finite() {
            Ok(())
        } else {
            Err(format!("d_merge must be positive, got {}", self.d_merge))
        }
    }
}

/// One detection lifted into world space.
#[derive(Debug, Clone)]
pub struct Observation {
    pub detection: DetectionRecord,
    /// Position of the detection in the ingest store.
    pub record_index: usize,
    pub points: Vec<Point3>,
    pub centroid: Point3,
}

impl Observation {
    pub fn point_count(&self) -> usize {
        self.points.len()
    }
}

pub fn project(
    det: &DetectionRecord,
    record_index: usize,
    mask: &RleMask,
    raster: &XyzRaster,
) -> Result<Observation, ProjectError> {
    let points = extract_points(raster, mask)?;
    if points.is_empty() {
        return Err(ProjectError::NoValidPoints);
    }
    let centroid = centroid(&points)?;
    Ok(Observation {
        detection: det.clone(),
        record_index,
        points,
        centroid,
    })
}

/// Per-observation summary kept in the instance dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRef {
    pub image_id: String,
    pub record_index: usize,
    pub source: Source,
    pub confidence: f64,
    pub point_count: usize,
    pub centroid: Point3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedInstance {
    pub area_id: String,
    /// Creation order within the area.
    pub instance_id: u32,
    pub class: ClassId,
    /// Point-count-weighted running mean of member centroids.
    pub centroid: Point3,
    /// Max over member observations.
    pub confidence: f64,
    #[serde(rename = "box")]
    pub bbox: GravityAlignedBox,
    pub point_count: usize,
    pub observations: Vec<ObservationRef>,
    #[serde(skip)]
    pub points: Vec<Point3>,
}

impl FusedInstance {
    pub fn token(&self) -> String {
        format!("{}#{}", self.area_id, self.instance_id)
    }
}

#[derive(Debug, Clone)]
struct Accumulator {
    class: ClassId,
    centroid: Point3,
    weight: usize,
    confidence: f64,
    observations: Vec<ObservationRef>,
    points: Vec<Point3>,
}

/// Single-writer instance registry for one area.
#[derive(Debug, Clone)]
pub struct Registry {
    area_id: String,
    cfg: FusionConfig,
    instances: Vec<Accumulator>,
    by_class: BTreeMap<ClassId, Vec<u32>>,
}

impl Registry {
    pub fn new(area_id: impl Into<String>, cfg: FusionConfig) -> Self {
        Self {
            area_id: area_id.into(),
            cfg,
            instances: Vec::new(),
            by_class: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Instance that `obs` would join, if any.
    fn merge_target(&self, class: ClassId, at: &Point3) -> Option<u32> {
        let ids = self.by_class.get(&class)?;
        if class.is_structural_surface() {
            return ids.first().copied();
        }
        let mut best: Option<(f64, u32)> = None;
        for &id in ids {
            let d = nalgebra::distance(&self.instances[id as usize].centroid, at);
            if d <= self.cfg.d_merge && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, id));
            }
        }
        best.map(|(_, id)| id)
    }

    pub fn insert(&mut self, obs: Observation) -> u32 {
        let class = obs.detection.class;
        let summary = ObservationRef {
            image_id: obs.detection.image_id.clone(),
            record_index: obs.record_index,
            source: obs.detection.source,
            confidence: obs.detection.confidence,
            point_count: obs.points.len(),
            centroid: obs.centroid,
        };
        match self.merge_target(class, &obs.centroid) {
            Some(id) => {
                let acc = &mut self.instances[id as usize];
                let (w, n) = (acc.weight as f64, obs.points.len() as f64);
                acc.centroid = Point3::from((acc.centroid.coords * w + obs.centroid.coords * n) / (w + n));
                acc.weight += obs.points.len();
                acc.confidence = acc.confidence.max(obs.detection.confidence);
                acc.observations.push(summary);
                acc.points.extend(obs.points);
                id
            }
            None => {
                let id = self.instances.len() as u32;
                self.instances.push(Accumulator {
                    class,
                    centroid: obs.centroid,
                    weight: obs.points.len(),
                    confidence: obs.detection.confidence,
                    observations: vec![summary],
                    points: obs.points,
                });
                self.by_class.entry(class).or_default().push(id);
                id
            }
        }
    }

    pub fn finalize(self) -> Vec<FusedInstance> {
        let area_id = self.area_id;
        self.instances
            .into_iter()
            .enumerate()
            .map(|(i, acc)| FusedInstance {
                area_id: area_id.clone(),
                instance_id: i as u32,
                class: acc.class,
                centroid: acc.centroid,
                confidence: acc.confidence,
                bbox: fit_gravity_box(&acc.points),
                point_count: acc.points.len(),
                observations: acc.observations,
                points: acc.points,
            })
            .collect()
    }
}

/// Orders observations by (image id, record index) and fuses them.
pub fn fuse_area(area_id: &str, mut observations: Vec<Observation>, cfg: &FusionConfig) -> Vec<FusedInstance> {
    observations.sort_by(|a, b| {
        a.detection
            .image_id
            .cmp(&b.detection.image_id)
            .then(a.record_index.cmp(&b.record_index))
    });
    let mut reg = Registry::new(area_id, cfg.clone());
    for obs in observations {
        reg.insert(obs);
    }
    reg.finalize()
}

pub fn count_by_class<'a>(instances: impl IntoIterator<Item = &'a FusedInstance>) -> BTreeMap<ClassId, usize> {
    let mut out = BTreeMap::new();
    for i in instances {
        *out.entry(i.class).or_default() += 1;
    }
    out
}

/// Pipeline count over reference count per class; `None` where the
/// reference count is zero.
pub fn fragmentation(
    counts: &BTreeMap<ClassId, usize>,
    reference: &BTreeMap<ClassId, usize>,
) -> BTreeMap<ClassId, Option<f64>> {
    reference
        .iter()
        .map(|(&c, &r)| {
            let n = counts.get(&c).copied().unwrap_or(0);
            (c, (r > 0).then(|| n as f64 / r as f64))
        })
        .collect()
}
