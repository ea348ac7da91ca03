//! Detection ingestion: confidence gates, union-topology deduplication and
//! 2D detection statistics.

mod record;

pub use record::{
    load_detections, parse_detections, write_detections, Box2d, DetectionRecord, IngestError,
    LoadedDetections, Rejection, Source, Verdict, DETECTION_SCHEMA,
};

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::taxonomy::ClassId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    pub sam3: f64,
    pub yoloe: f64,
    pub obj365_nano: f64,
    pub safety_nano: f64,
    pub ocr: f64,
    pub dedup_iou: f64,
    /// Suppress only within a class. When false, overlapping boxes of any
    /// class suppress each other.
    pub class_scoped: bool,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            sam3: 0.30,
            yoloe: 0.20,
            obj365_nano: 0.30,
            safety_nano: 0.30,
            ocr: 0.0,
            dedup_iou: 0.50,
            class_scoped: true,
        }
    }
}

impl GateConfig {
    pub fn threshold(&self, source: Source) -> f64 {
        match source {
            Source::Sam3 => self.sam3,
            Source::Yoloe => self.yoloe,
            Source::Obj365Nano => self.obj365_nano,
            Source::SafetyNano => self.safety_nano,
            Source::Ocr => self.ocr,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.sam3,
            self.yoloe,
            self.obj365_nano,
            self.safety_nano,
            self.ocr,
            self.dedup_iou,
        ];
        if all.iter().all(|t| (0.0..=1.0).contains(t)) {
            Ok(())
        } else {
            Err("gate thresholds must lie in [0, 1]".into())
        }
    }
}

pub fn passes_gate(r: &DetectionRecord, cfg: &GateConfig) -> bool {
    r.verifier_verdict != Verdict::Rejected && r.confidence >= cfg.threshold(r.source)
}

pub fn gate(records: Vec<DetectionRecord>, cfg: &GateConfig) -> Vec<DetectionRecord> {
    records.into_iter().filter(|r| passes_gate(r, cfg)).collect()
}

pub fn iou(a: &Box2d, b: &Box2d) -> f64 {
    let [ax0, ay0, ax1, ay1] = a.0;
    let [bx0, by0, bx1, by1] = b.0;
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

fn rank(a: &(usize, &DetectionRecord), b: &(usize, &DetectionRecord)) -> Ordering {
    b.1.confidence
        .total_cmp(&a.1.confidence)
        .then(a.1.source.cmp(&b.1.source))
        .then(a.0.cmp(&b.0))
}

/// Greedy highest-confidence-first deduplication of one image's records.
pub fn dedup_image(records: &[DetectionRecord], cfg: &GateConfig) -> Vec<DetectionRecord> {
    let mut order: Vec<(usize, &DetectionRecord)> = records.iter().enumerate().collect();
    order.sort_by(rank);
    let mut kept: Vec<&DetectionRecord> = Vec::new();
    for (_, r) in order {
        let suppressed = kept.iter().any(|k| {
            (!cfg.class_scoped || k.class == r.class) && iou(&k.box2d, &r.box2d) >= cfg.dedup_iou
        });
        if !suppressed {
            kept.push(r);
        }
    }
    kept.into_iter().cloned().collect()
}

/// Deduplicates per image; images come out in ascending id order.
pub fn dedup_union(records: &[DetectionRecord], cfg: &GateConfig) -> Vec<DetectionRecord> {
    let mut by_image: BTreeMap<&str, Vec<DetectionRecord>> = BTreeMap::new();
    for r in records {
        by_image.entry(&r.image_id).or_default().push(r.clone());
    }
    by_image
        .values()
        .flat_map(|group| dedup_image(group, cfg))
        .collect()
}

pub const SMALL_OBJECT_AREA_PX: f64 = 1024.0;
/// Center distance within which a visual detection explains an OCR hit.
pub const DEFAULT_OCR_RADIUS_PX: f64 = 64.0;

/// Fraction of each class's boxes with area strictly below `area_threshold`.
/// `None` for classes without records.
pub fn small_object_stats(
    records: &[DetectionRecord],
    area_threshold: f64,
) -> BTreeMap<ClassId, Option<f64>> {
    let mut counts: BTreeMap<ClassId, (usize, usize)> = ClassId::all().map(|c| (c, (0, 0))).collect();
    for r in records {
        let e = counts.get_mut(&r.class).expect("all classes present");
        e.1 += 1;
        if r.box2d.area() < area_threshold {
            e.0 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(c, (small, total))| (c, (total > 0).then(|| small as f64 / total as f64)))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OcrExclusivity {
    pub radius_px: f64,
    pub ocr_total: usize,
    pub exclusive_total: usize,
    pub per_class: BTreeMap<ClassId, usize>,
}

/// Counts OCR records with no same-image, same-class visual detection whose
/// box center lies within `radius_px` of the OCR box center.
pub fn ocr_exclusive_count(records: &[DetectionRecord], radius_px: f64) -> OcrExclusivity {
    let mut by_image: BTreeMap<&str, Vec<&DetectionRecord>> = BTreeMap::new();
    for r in records {
        by_image.entry(&r.image_id).or_default().push(r);
    }
    let mut out = OcrExclusivity {
        radius_px,
        ..Default::default()
    };
    let r2 = radius_px * radius_px;
    for group in by_image.values() {
        for ocr in group.iter().filter(|r| r.source == Source::Ocr) {
            out.ocr_total += 1;
            let (ox, oy) = ocr.box2d.center();
            let matched = group.iter().any(|v| {
                if !v.source.is_visual() || v.class != ocr.class {
                    return false;
                }
                let (vx, vy) = v.box2d.center();
                (vx - ox).powi(2) + (vy - oy).powi(2) <= r2
            });
            if !matched {
                out.exclusive_total += 1;
                *out.per_class.entry(ocr.class).or_default() += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SourceStats {
    pub raw: usize,
    pub kept: usize,
}

/// Bookkeeping for one ingestion run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestStats {
    pub files: usize,
    pub raw_records: usize,
    pub loader_rejected: usize,
    pub below_gate: usize,
    pub verifier_rejected: usize,
    pub verifier_accepted: usize,
    pub dedup_removed: usize,
    pub kept: usize,
    /// kept / raw_records, percent; absent when there were no raw records
    pub survival_pct: Option<f64>,
    /// verifier rejections / raw_records, percent
    pub verifier_rejection_pct: Option<f64>,
    pub per_source: BTreeMap<Source, SourceStats>,
}

/// Union topology: pools every loaded file, gates, then deduplicates per image.
pub fn ingest(loaded: &[LoadedDetections], cfg: &GateConfig) -> (Vec<DetectionRecord>, IngestStats) {
    let mut stats = IngestStats {
        files: loaded.len(),
        ..Default::default()
    };
    let mut pooled = Vec::new();
    for l in loaded {
        stats.loader_rejected += l.rejected.len();
        for r in &l.records {
            stats.raw_records += 1;
            stats.per_source.entry(r.source).or_default().raw += 1;
            match r.verifier_verdict {
                Verdict::Rejected => stats.verifier_rejected += 1,
                Verdict::Accepted => stats.verifier_accepted += 1,
                Verdict::Unverified => {}
            }
            if r.verifier_verdict != Verdict::Rejected && !passes_gate(r, cfg) {
                stats.below_gate += 1;
            }
            if passes_gate(r, cfg) {
                pooled.push(r.clone());
            }
        }
    }
    let kept = dedup_union(&pooled, cfg);
    stats.dedup_removed = pooled.len() - kept.len();
    stats.kept = kept.len();
    for r in &kept {
        stats.per_source.entry(r.source).or_default().kept += 1;
    }
    if stats.raw_records > 0 {
        let raw = stats.raw_records as f64;
        stats.survival_pct = Some(100.0 * stats.kept as f64 / raw);
        stats.verifier_rejection_pct = Some(100.0 * stats.verifier_rejected as f64 / raw);
    }
    (kept, stats)
}
