//! Deterministic synthetic buildings with planted fixtures.
//!
//! Each fixture is seen in `views_per_fixture` detections. A view is a
//! `block_px x block_px` pixel block whose world points form a vertical
//! lattice centered on the fixture, shifted by a per-view offset on a circle
//! of radius `view_spread`. With zero noise every view of a fixture has a
//! distinct centroid, and all of them lie within `view_spread` of the truth.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depthio::{DepthError, RleMask, XyzRaster, SENTINEL};
use crate::detect::{write_detections, Box2d, DetectionRecord, Source};
use crate::eval::{write_gt_cloud, EvalError, GtCloud};
use crate::fusion::{project, Observation};
use crate::taxonomy::{ClassId, SOURCE_LABELS};
use crate::Point3;

/// Fixture pitch on the floor grid, meters.
const GRID: f64 = 2.0;
/// Lattice spacing of a view block, meters.
const PIXEL_PITCH: f64 = 0.02;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Depth(#[from] DepthError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub areas: u32,
    pub fixtures_per_area: u32,
    pub views_per_fixture: u32,
    /// Radius of the per-view centroid offsets, meters.
    pub view_spread: f64,
    /// Standard deviation of per-point position noise, meters.
    pub noise: f64,
    /// Fraction of detections re-emitted by a second detector.
    pub duplicate_rate: f64,
    /// Fraction of block pixels with no depth.
    pub sentinel_rate: f64,
    /// Fraction of reference fixture points given a random label.
    pub label_noise: f64,
    pub confidence_min: f64,
    pub confidence_max: f64,
    pub block_px: u32,
    pub views_per_image: u32,
    /// Add a wall strip detection to every image.
    pub walls: bool,
    /// Classes fixtures are drawn from.
    pub classes: Vec<ClassId>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            areas: 2,
            fixtures_per_area: 12,
            views_per_fixture: 3,
            view_spread: 0.1,
            noise: 0.0,
            duplicate_rate: 0.0,
            sentinel_rate: 0.0,
            label_noise: 0.1,
            confidence_min: 0.35,
            confidence_max: 0.99,
            block_px: 6,
            views_per_image: 4,
            walls: true,
            classes: ClassId::all()
                .filter(|c| !c.is_structural_surface() && *c != ClassId::CLUTTER)
                .collect(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Spec(m.into()));
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.views_per_fixture == 0 || self.block_px == 0 || self.views_per_image == 0 {
            return bad("views_per_fixture, block_px and views_per_image must be positive");
        }
        if !(self.view_spread >= 0.0 && self.view_spread < 0.25) {
            return bad("view_spread must lie in [0, 0.25)");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be non-negative");
        }
        if !(unit(self.duplicate_rate) && unit(self.sentinel_rate) && unit(self.label_noise)) {
            return bad("rates must lie in [0, 1]");
        }
        if !(unit(self.confidence_min) && unit(self.confidence_max) && self.confidence_min <= self.confidence_max) {
            return bad("confidence range must be an ordered pair in [0, 1]");
        }
        if self.fixtures_per_area > 0 && self.classes.is_empty() {
            return bad("class pool is empty");
        }
        if self.classes.iter().any(|c| c.is_structural_surface()) {
            return bad("structural surfaces are not fixtures");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFixture {
    pub area_id: String,
    pub fixture_id: u32,
    pub class: ClassId,
    pub centroid: Point3,
    pub views: u32,
}

#[derive(Debug, Clone)]
pub struct SynthDetection {
    pub record: DetectionRecord,
    pub mask: RleMask,
    /// Index of the mask file within the image.
    pub mask_slot: usize,
}

#[derive(Debug, Clone)]
pub struct SynthImage {
    pub image_id: String,
    pub raster: XyzRaster,
    pub detections: Vec<SynthDetection>,
}

#[derive(Debug, Clone)]
pub struct SynthArea {
    pub area_id: String,
    pub fixtures: Vec<PlantedFixture>,
    pub images: Vec<SynthImage>,
    pub gt: GtCloud,
}

impl SynthArea {
    /// Projects every detection through its raster, in store order.
    pub fn observations(&self) -> Vec<Observation> {
        let mut out = Vec::new();
        let mut index = 0;
        for img in &self.images {
            for d in &img.detections {
                if let Ok(o) = project(&d.record, index, &d.mask, &img.raster) {
                    out.push(o);
                }
                index += 1;
            }
        }
        out
    }

    pub fn detection_count(&self) -> usize {
        self.images.iter().map(|i| i.detections.len()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct SynthScene {
    pub spec: SynthSpec,
    pub seed: u64,
    pub areas: Vec<SynthArea>,
}

fn source_label(class: ClassId, rng: &mut ChaCha8Rng) -> &'static str {
    match class {
        ClassId::DOOR => "door",
        ClassId::WINDOW => "window",
        ClassId::COLUMN => "column",
        ClassId::FURNITURE => ["table", "chair", "sofa", "bookcase"][rng.random_range(0..4)],
        // wall-mounted equipment has no class of its own in the reference labels
        _ => "wall",
    }
}

fn label_index(name: &str) -> i32 {
    SOURCE_LABELS.iter().position(|s| *s == name).unwrap() as i32
}

struct ViewSpec {
    fixture: usize,
    view: u32,
}

fn area_rng(seed: u64, area: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(area as u64 + 1);
    rng
}

fn generate_area(spec: &SynthSpec, seed: u64, ai: u32) -> Result<SynthArea, SynthError> {
    let mut rng = area_rng(seed, ai);
    let area_id = format!("area_{}", ai + 1);
    let noise = Normal::new(0.0, spec.noise).map_err(|e| SynthError::Spec(e.to_string()))?;
    let f = spec.fixtures_per_area as usize;
    let cols = (f as f64).sqrt().ceil().max(1.0) as usize;

    let mut fixtures = Vec::with_capacity(f);
    let mut phases = Vec::with_capacity(f);
    for k in 0..f {
        let class = spec.classes[rng.random_range(0..spec.classes.len())];
        let c = Point3::new(
            (k % cols) as f64 * GRID + rng.random_range(-0.25..0.25),
            (k / cols) as f64 * GRID + rng.random_range(-0.25..0.25),
            rng.random_range(0.5..2.0),
        );
        fixtures.push(PlantedFixture {
            area_id: area_id.clone(),
            fixture_id: k as u32,
            class,
            centroid: c,
            views: spec.views_per_fixture,
        });
        phases.push(rng.random_range(0.0..TAU));
    }

    let mut views: Vec<ViewSpec> = (0..f)
        .flat_map(|fixture| (0..spec.views_per_fixture).map(move |view| ViewSpec { fixture, view }))
        .collect();
    views.shuffle(&mut rng);

    let p = spec.block_px as usize;
    let g = spec.views_per_image as usize;
    let width = (g * (p + 2) + 2) as u32;
    let block_rows = p + 2;
    let wall_rows = if spec.walls { 2 } else { 0 };
    let height = (block_rows + wall_rows) as u32;
    let half = (p as f64 - 1.0) / 2.0;

    let mut gt = GtCloud {
        label_names: SOURCE_LABELS.iter().map(|s| s.to_string()).collect(),
        frame: "world".into(),
        ..Default::default()
    };
    let fixture_labels: Vec<&str> = fixtures.iter().map(|fx| source_label(fx.class, &mut rng)).collect();
    let mut images = Vec::new();

    for (im, chunk) in views.chunks(g).enumerate() {
        let image_id = format!("{area_id}_img{im:04}");
        let mut raster = XyzRaster::filled(width, height, SENTINEL)?;
        for row in 0..height as usize {
            for col in 0..width as usize {
                // floor plane behind everything
                let floor = [(im as f64 * 0.5 + col as f64 * 0.05) as f32, (-3.0 - row as f64 * 0.05) as f32, 0.0];
                raster.set(row * width as usize + col, floor)?;
            }
        }
        let mut detections = Vec::new();
        for (slot, v) in chunk.iter().enumerate() {
            let fx = &fixtures[v.fixture];
            let angle = phases[v.fixture] + TAU * v.view as f64 / spec.views_per_fixture as f64;
            let offset = nalgebra::Vector3::new(spec.view_spread * angle.cos(), spec.view_spread * angle.sin(), 0.0);
            let x0 = 1 + slot * (p + 2);
            let y0 = 1;
            for j in 0..p {
                for i in 0..p {
                    let lattice = nalgebra::Vector3::new((i as f64 - half) * PIXEL_PITCH, 0.0, (j as f64 - half) * PIXEL_PITCH);
                    let clean = fx.centroid + offset + lattice;
                    let idx = (y0 + j) * width as usize + x0 + i;
                    let label = if rng.random_bool(spec.label_noise) {
                        rng.random_range(0..SOURCE_LABELS.len() as i32)
                    } else {
                        label_index(fixture_labels[v.fixture])
                    };
                    gt.points.push(clean);
                    gt.labels.push(label);
                    gt.instance.push(fx.fixture_id as i32);
                    let noisy = if spec.noise > 0.0 {
                        clean + nalgebra::Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
                    } else {
                        clean
                    };
                    // keep the block center so every mask has depth
                    let hole = spec.sentinel_rate > 0.0 && (i, j) != (p / 2, p / 2) && rng.random_bool(spec.sentinel_rate);
                    let value = if hole { SENTINEL } else { [noisy.x as f32, noisy.y as f32, noisy.z as f32] };
                    raster.set(idx, value)?;
                }
            }
            let mask = RleMask::rect(width, height, x0 as u32, y0 as u32, (x0 + p) as u32, (y0 + p) as u32)?;
            let bbox = Box2d::new(x0 as f64, y0 as f64, (x0 + p) as f64, (y0 + p) as f64);
            let conf = rng.random_range(spec.confidence_min..=spec.confidence_max);
            let mut rec = DetectionRecord::new(&image_id, &area_id, fx.class, bbox, conf, Source::Sam3);
            rec.mask = Some(String::new());
            detections.push(SynthDetection {
                record: rec,
                mask: mask.clone(),
                mask_slot: slot,
            });
            if rng.random_bool(spec.duplicate_rate) {
                let shifted = Box2d::new(x0 as f64 + 1.0, y0 as f64, (x0 + p) as f64 + 1.0, (y0 + p) as f64);
                let conf = rng.random_range(spec.confidence_min..=spec.confidence_max);
                let mut dup = DetectionRecord::new(&image_id, &area_id, fx.class, shifted, conf, Source::Yoloe);
                dup.mask = Some(String::new());
                detections.push(SynthDetection {
                    record: dup,
                    mask,
                    mask_slot: slot,
                });
            }
        }
        if spec.walls {
            let y0 = block_rows;
            for row in 0..wall_rows {
                for col in 0..width as usize {
                    let w = Point3::new(im as f64 * 0.25 + col as f64 * 0.05, -1.0, 0.5 + row as f64 * 0.05);
                    raster.set((y0 + row) * width as usize + col, [w.x as f32, w.y as f32, w.z as f32])?;
                    gt.points.push(w);
                    gt.labels.push(label_index("wall"));
                    gt.instance.push(-1);
                }
            }
            let mask = RleMask::rect(width, height, 0, y0 as u32, width, height)?;
            let bbox = Box2d::new(0.0, y0 as f64, width as f64, height as f64);
            let conf = rng.random_range(spec.confidence_min..=spec.confidence_max);
            let mut rec = DetectionRecord::new(&image_id, &area_id, ClassId::WALL, bbox, conf, Source::Sam3);
            rec.mask = Some(String::new());
            detections.push(SynthDetection {
                record: rec,
                mask,
                mask_slot: g,
            });
        }
        for d in &mut detections {
            d.record.mask = Some(format!("../masks/{}_{}.rle", image_id, d.mask_slot));
        }
        images.push(SynthImage {
            image_id,
            raster,
            detections,
        });
    }

    Ok(SynthArea {
        area_id,
        fixtures,
        images,
        gt,
    })
}

/// Generates every area; each area draws from its own seeded stream.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SynthScene, SynthError> {
    spec.validate()?;
    let areas = (0..spec.areas)
        .map(|ai| generate_area(spec, seed, ai))
        .collect::<Result<_, _>>()?;
    Ok(SynthScene {
        spec: spec.clone(),
        seed,
        areas,
    })
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), SynthError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(io(path))
}

/// Layout under `dir`:
///
/// ```text
/// spec.json  truth.json
/// rasters/<image>.xyzr
/// masks/<image>_<slot>.rle
/// detections/<source>.jsonl
/// gt/<area>/...
/// ```
pub fn write_scene(scene: &SynthScene, dir: &Path) -> Result<(), SynthError> {
    for sub in ["rasters", "masks", "detections", "gt"] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(io(&d))?;
    }
    write_json(&dir.join("spec.json"), &serde_json::json!({ "seed": scene.seed, "spec": scene.spec }))?;
    let truth: Vec<&PlantedFixture> = scene.areas.iter().flat_map(|a| &a.fixtures).collect();
    write_json(&dir.join("truth.json"), &truth)?;

    let mut by_source: BTreeMap<Source, Vec<DetectionRecord>> = [Source::Sam3, Source::Yoloe]
        .into_iter()
        .map(|s| (s, Vec::new()))
        .collect();
    for area in &scene.areas {
        for img in &area.images {
            img.raster.write(&dir.join("rasters").join(format!("{}.xyzr", img.image_id)))?;
            for d in &img.detections {
                let path = dir.join("masks").join(format!("{}_{}.rle", img.image_id, d.mask_slot));
                if !path.exists() {
                    d.mask.write(&path)?;
                }
                by_source.entry(d.record.source).or_default().push(d.record.clone());
            }
        }
        write_gt_cloud(&dir.join("gt").join(&area.area_id), &area.area_id, &area.gt)?;
    }
    for (source, records) in by_source {
        let path = dir.join("detections").join(format!("{}.jsonl", source.as_str()));
        let mut buf = Vec::new();
        write_detections(&mut buf, &records).map_err(io(&path))?;
        std::fs::write(&path, buf).map_err(io(&path))?;
    }
    Ok(())
}

pub fn read_truth(path: &Path) -> Result<Vec<PlantedFixture>, SynthError> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    Ok(serde_json::from_str(&text)?)
}
