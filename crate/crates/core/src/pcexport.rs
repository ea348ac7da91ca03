//! Labeled point-cloud export: raw little-endian arrays plus a JSON manifest.
//!
//! ```text
//! <area>/coord.f32le       N x 3 f32
//! <area>/segment.i32le     N i32 class ids
//! <area>/instance.i32le    N i32 instance ids, -1 unassigned
//! <area>/confidence.f32le  N f32
//! <area>/manifest.json
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::FusedInstance;
use crate::taxonomy::ClassId;
use crate::Point3;

pub const CLOUD_SCHEMA: &str = "insight-pc/1";
/// Points closer than this across instances are treated as one point.
pub const DUPLICATE_TOL: f64 = 1e-6;

pub const COORD_FILE: &str = "coord.f32le";
pub const SEGMENT_FILE: &str = "segment.i32le";
pub const INSTANCE_FILE: &str = "instance.i32le";
pub const CONFIDENCE_FILE: &str = "confidence.f32le";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum PcError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("{0}")]
    Layout(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PcError + '_ {
    move |source| PcError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudManifest {
    pub schema: String,
    pub area_id: String,
    pub frame: String,
    pub point_count: usize,
    pub class_histogram: BTreeMap<String, usize>,
    pub has_color: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledCloud {
    pub area_id: String,
    pub coords: Vec<[f32; 3]>,
    pub segment: Vec<i32>,
    pub instance: Vec<i32>,
    pub confidence: Vec<f32>,
}

impl LabeledCloud {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> Point3 {
        let [x, y, z] = self.coords[i];
        Point3::new(x as f64, y as f64, z as f64)
    }

    pub fn class_histogram(&self) -> BTreeMap<String, usize> {
        let mut h = BTreeMap::new();
        for &s in &self.segment {
            let name = u8::try_from(s)
                .ok()
                .and_then(ClassId::new)
                .map_or_else(|| format!("#{s}"), |c| c.name().to_string());
            *h.entry(name).or_default() += 1;
        }
        h
    }

    pub fn manifest(&self, frame: &str) -> CloudManifest {
        CloudManifest {
            schema: CLOUD_SCHEMA.into(),
            area_id: self.area_id.clone(),
            frame: frame.into(),
            point_count: self.len(),
            class_histogram: self.class_histogram(),
            has_color: false,
        }
    }

    fn check_lengths(&self) -> Result<(), PcError> {
        let n = self.coords.len();
        if self.segment.len() != n || self.instance.len() != n || self.confidence.len() != n {
            return Err(PcError::Layout("array lengths disagree".into()));
        }
        Ok(())
    }
}

fn cell_of(p: &Point3) -> [i64; 3] {
    [p.x, p.y, p.z].map(|v| (v / DUPLICATE_TOL).floor() as i64)
}

/// For each instance (same order as input), the indices of its points that
/// survive deduplication.
///
/// Instances claim points in order of confidence descending then id
/// ascending; a point within [`DUPLICATE_TOL`] of an already claimed point
/// is dropped, whichever instance claimed it.
pub fn resolve_conflicts(instances: &[FusedInstance]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by(|&a, &b| {
        instances[b]
            .confidence
            .total_cmp(&instances[a].confidence)
            .then(instances[a].instance_id.cmp(&instances[b].instance_id))
    });
    let mut grid: HashMap<[i64; 3], Vec<Point3>> = HashMap::new();
    let mut kept = vec![Vec::new(); instances.len()];
    for i in order {
        for (k, p) in instances[i].points.iter().enumerate() {
            let c = cell_of(p);
            let mut taken = false;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(cell) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                            if cell.iter().any(|q| (q - p).norm() <= DUPLICATE_TOL) {
                                taken = true;
                                break 'search;
                            }
                        }
                    }
                }
            }
            if !taken {
                grid.entry(c).or_default().push(*p);
                kept[i].push(k);
            }
        }
    }
    kept
}

/// Builds the cloud of one area, concatenating instances in id order.
pub fn build_cloud(area_id: &str, instances: &[FusedInstance]) -> LabeledCloud {
    let kept = resolve_conflicts(instances);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by_key(|&i| instances[i].instance_id);
    let mut cloud = LabeledCloud {
        area_id: area_id.into(),
        ..Default::default()
    };
    for i in order {
        let inst = &instances[i];
        for &k in &kept[i] {
            let p = inst.points[k];
            cloud.coords.push([p.x as f32, p.y as f32, p.z as f32]);
            cloud.segment.push(inst.class.index() as i32);
            cloud.instance.push(inst.instance_id as i32);
            cloud.confidence.push(inst.confidence as f32);
        }
    }
    cloud
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PcError> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

pub fn write_f32s(path: &Path, values: impl Iterator<Item = f32>) -> Result<(), PcError> {
    let bytes: Vec<u8> = values.flat_map(f32::to_le_bytes).collect();
    write_file(path, &bytes)
}

pub fn write_i32s(path: &Path, values: impl Iterator<Item = i32>) -> Result<(), PcError> {
    let bytes: Vec<u8> = values.flat_map(i32::to_le_bytes).collect();
    write_file(path, &bytes)
}

fn read_words(path: &Path) -> Result<Vec<[u8; 4]>, PcError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    if bytes.len() % 4 != 0 {
        return Err(PcError::Layout(format!("{}: length not a multiple of 4", path.display())));
    }
    Ok(bytes.chunks_exact(4).map(|c| c.try_into().unwrap()).collect())
}

pub fn read_f32s(path: &Path) -> Result<Vec<f32>, PcError> {
    Ok(read_words(path)?.into_iter().map(f32::from_le_bytes).collect())
}

pub fn read_i32s(path: &Path) -> Result<Vec<i32>, PcError> {
    Ok(read_words(path)?.into_iter().map(i32::from_le_bytes).collect())
}

pub fn read_coords(path: &Path) -> Result<Vec<[f32; 3]>, PcError> {
    let flat = read_f32s(path)?;
    if flat.len() % 3 != 0 {
        return Err(PcError::Layout(format!("{}: not a multiple of 3 floats", path.display())));
    }
    Ok(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// Writes the cloud into `dir` (created if missing).
pub fn write_cloud(dir: &Path, cloud: &LabeledCloud, frame: &str) -> Result<CloudManifest, PcError> {
    cloud.check_lengths()?;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_f32s(&dir.join(COORD_FILE), cloud.coords.iter().flatten().copied())?;
    write_i32s(&dir.join(SEGMENT_FILE), cloud.segment.iter().copied())?;
    write_i32s(&dir.join(INSTANCE_FILE), cloud.instance.iter().copied())?;
    write_f32s(&dir.join(CONFIDENCE_FILE), cloud.confidence.iter().copied())?;
    let manifest = cloud.manifest(frame);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_file(&dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<CloudManifest, PcError> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let m: CloudManifest = serde_json::from_str(&text)?;
    if m.schema != CLOUD_SCHEMA {
        return Err(PcError::Layout(format!("unsupported schema `{}`", m.schema)));
    }
    Ok(m)
}

pub fn read_cloud(dir: &Path) -> Result<(LabeledCloud, CloudManifest), PcError> {
    let manifest = read_manifest(dir)?;
    let cloud = LabeledCloud {
        area_id: manifest.area_id.clone(),
        coords: read_coords(&dir.join(COORD_FILE))?,
        segment: read_i32s(&dir.join(SEGMENT_FILE))?,
        instance: read_i32s(&dir.join(INSTANCE_FILE))?,
        confidence: read_f32s(&dir.join(CONFIDENCE_FILE))?,
    };
    cloud.check_lengths()?;
    if cloud.len() != manifest.point_count {
        return Err(PcError::Layout(format!(
            "manifest declares {} points, arrays hold {}",
            manifest.point_count,
            cloud.len()
        )));
    }
    Ok((cloud, manifest))
}
