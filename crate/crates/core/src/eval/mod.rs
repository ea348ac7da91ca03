//! Evaluation metrics: per-point accuracy against a labeled reference
//! cloud, spatial coverage, cross-pipeline complementarity and confidence
//! retention curves.

mod kdtree;

pub use kdtree::{linear_nearest, EmptyIndex, Neighbor, NnIndex};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::FusedInstance;
use crate::pcexport::{self, CloudManifest, LabeledCloud, PcError};
use crate::taxonomy::{map_source_label, ClassId, MappedLabel, TaxonomyError};
use crate::Point3;

pub const LABELS_FILE: &str = "labels.json";
pub const DEFAULT_COVERAGE_RADIUS: f64 = 0.1;
pub const DEFAULT_MATCH_RADIUS: f64 = 1.0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Cloud(#[from] PcError),
    #[error(transparent)]
    Label(#[from] TaxonomyError),
    #[error("reference label index {0} has no name in the labels sidecar")]
    LabelIndex(i32),
    #[error("{0}")]
    Sidecar(String),
    #[error("coordinate frames differ: prediction `{pred}`, reference `{gt}`")]
    FrameMismatch { pred: String, gt: String },
}

/// Reference cloud labeled with source-dataset label names.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GtCloud {
    pub points: Vec<Point3>,
    /// Index into `label_names` per point.
    pub labels: Vec<i32>,
    pub label_names: Vec<String>,
    /// Reference instance id per point, -1 when absent.
    pub instance: Vec<i32>,
    pub frame: String,
}

impl GtCloud {
    pub fn label_name(&self, point: usize) -> Result<&str, EvalError> {
        let l = self.labels[point];
        usize::try_from(l)
            .ok()
            .and_then(|i| self.label_names.get(i))
            .map(String::as_str)
            .ok_or(EvalError::LabelIndex(l))
    }

    /// Mapped label per label-name slot.
    fn mapped_names(&self) -> Result<Vec<MappedLabel>, EvalError> {
        Ok(self
            .label_names
            .iter()
            .map(|n| map_source_label(n))
            .collect::<Result<_, _>>()?)
    }

    fn mapped_label(&self, mapped: &[MappedLabel], point: usize) -> Result<MappedLabel, EvalError> {
        let l = self.labels[point];
        usize::try_from(l)
            .ok()
            .and_then(|i| mapped.get(i).copied())
            .ok_or(EvalError::LabelIndex(l))
    }
}

/// Writes a reference cloud with the exported-cloud array layout plus
/// `labels.json`.
pub fn write_gt_cloud(dir: &Path, area_id: &str, gt: &GtCloud) -> Result<(), EvalError> {
    std::fs::create_dir_all(dir).map_err(|e| PcError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    pcexport::write_f32s(
        &dir.join(pcexport::COORD_FILE),
        gt.points.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]),
    )?;
    pcexport::write_i32s(&dir.join(pcexport::SEGMENT_FILE), gt.labels.iter().copied())?;
    pcexport::write_i32s(&dir.join(pcexport::INSTANCE_FILE), gt.instance.iter().copied())?;
    let mut hist = BTreeMap::new();
    for i in 0..gt.points.len() {
        *hist.entry(gt.label_name(i)?.to_string()).or_default() += 1;
    }
    let manifest = CloudManifest {
        schema: pcexport::CLOUD_SCHEMA.into(),
        area_id: area_id.into(),
        frame: gt.frame.clone(),
        point_count: gt.points.len(),
        class_histogram: hist,
        has_color: false,
    };
    let write_json = |name: &str, text: String| -> Result<(), EvalError> {
        let path = dir.join(name);
        std::fs::write(&path, text + "\n").map_err(|e| {
            EvalError::Cloud(PcError::Io {
                path: path.display().to_string(),
                source: e,
            })
        })
    };
    write_json(pcexport::MANIFEST_FILE, serde_json::to_string_pretty(&manifest).map_err(PcError::from)?)?;
    write_json(LABELS_FILE, serde_json::to_string_pretty(&gt.label_names).map_err(PcError::from)?)?;
    Ok(())
}

pub fn read_gt_cloud(dir: &Path) -> Result<GtCloud, EvalError> {
    let manifest = pcexport::read_manifest(dir)?;
    let coords = pcexport::read_coords(&dir.join(pcexport::COORD_FILE))?;
    let labels = pcexport::read_i32s(&dir.join(pcexport::SEGMENT_FILE))?;
    let inst_path = dir.join(pcexport::INSTANCE_FILE);
    let instance = if inst_path.exists() {
        pcexport::read_i32s(&inst_path)?
    } else {
        vec![-1; coords.len()]
    };
    let labels_path = dir.join(LABELS_FILE);
    let text = std::fs::read_to_string(&labels_path).map_err(|e| PcError::Io {
        path: labels_path.display().to_string(),
        source: e,
    })?;
    let label_names: Vec<String> = serde_json::from_str(&text).map_err(PcError::from)?;
    if labels.len() != coords.len() || instance.len() != coords.len() || coords.len() != manifest.point_count {
        return Err(EvalError::Sidecar("reference arrays disagree in length".into()));
    }
    let gt = GtCloud {
        points: coords
            .into_iter()
            .map(|[x, y, z]| Point3::new(x as f64, y as f64, z as f64))
            .collect(),
        labels,
        label_names,
        instance,
        frame: manifest.frame,
    };
    for i in 0..gt.points.len() {
        gt.label_name(i)?;
    }
    Ok(gt)
}

pub fn check_frames(pred: &CloudManifest, gt: &GtCloud) -> Result<(), EvalError> {
    if pred.frame != gt.frame {
        return Err(EvalError::FrameMismatch {
            pred: pred.frame.clone(),
            gt: gt.frame.clone(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct Tally {
    pub counted: u64,
    pub correct: u64,
}

impl Tally {
    pub fn accuracy(&self) -> Option<f64> {
        (self.counted > 0).then(|| self.correct as f64 / self.counted as f64)
    }

    fn add(&mut self, other: &Tally) {
        self.counted += other.counted;
        self.correct += other.correct;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct AreaAccuracy {
    pub tally: Tally,
    pub per_class: BTreeMap<ClassId, Tally>,
    /// Overlapping-class points whose nearest reference point maps to no class.
    pub excluded_reference: u64,
    /// Points with pipeline-only labels, never counted.
    pub skipped_novel: u64,
}

/// Nearest-reference label agreement for one area.
pub fn area_accuracy(pred: &LabeledCloud, gt: &GtCloud, index: &NnIndex) -> Result<AreaAccuracy, EvalError> {
    let mapped = gt.mapped_names()?;
    let mut out = AreaAccuracy::default();
    for i in 0..pred.len() {
        let Some(class) = u8::try_from(pred.segment[i]).ok().and_then(ClassId::new) else {
            out.skipped_novel += 1;
            continue;
        };
        if !class.is_overlapping() {
            out.skipped_novel += 1;
            continue;
        }
        let Ok(nn) = index.nearest(&pred.point(i)) else {
            out.excluded_reference += 1;
            continue;
        };
        let Some(ref_class) = gt.mapped_label(&mapped, nn.index)?.class() else {
            out.excluded_reference += 1;
            continue;
        };
        let hit = u64::from(ref_class == class);
        let t = out.per_class.entry(class).or_default();
        t.counted += 1;
        t.correct += hit;
        out.tally.counted += 1;
        out.tally.correct += hit;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaRow {
    pub n: u64,
    pub accuracy: Option<f64>,
    pub weight: Option<f64>,
    pub excluded_reference: u64,
    pub skipped_novel: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRow {
    pub n: u64,
    pub correct: u64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub areas: BTreeMap<String, AreaRow>,
    /// Area-weighted mean, absent when nothing was counted.
    pub overall: Option<f64>,
    pub per_class: BTreeMap<ClassId, ClassRow>,
}

/// Weights each area by its counted points: `A = sum_k (n_k / sum_j n_j) a_k`.
pub fn aggregate_accuracy(areas: &BTreeMap<String, AreaAccuracy>) -> AccuracyReport {
    let total: u64 = areas.values().map(|a| a.tally.counted).sum();
    let mut overall = None;
    let mut rows = BTreeMap::new();
    let mut per_class: BTreeMap<ClassId, Tally> = BTreeMap::new();
    for (id, a) in areas {
        let weight = (total > 0).then(|| a.tally.counted as f64 / total as f64);
        if let (Some(w), Some(acc)) = (weight, a.tally.accuracy()) {
            *overall.get_or_insert(0.0) += w * acc;
        }
        for (c, t) in &a.per_class {
            per_class.entry(*c).or_default().add(t);
        }
        rows.insert(
            id.clone(),
            AreaRow {
                n: a.tally.counted,
                accuracy: a.tally.accuracy(),
                weight,
                excluded_reference: a.excluded_reference,
                skipped_novel: a.skipped_novel,
            },
        );
    }
    AccuracyReport {
        areas: rows,
        overall,
        per_class: per_class
            .into_iter()
            .map(|(c, t)| {
                (
                    c,
                    ClassRow {
                        n: t.counted,
                        correct: t.correct,
                        accuracy: t.accuracy(),
                    },
                )
            })
            .collect(),
    }
}

pub fn per_point_accuracy(areas: &[(&str, &LabeledCloud, &GtCloud)]) -> Result<AccuracyReport, EvalError> {
    let mut per = BTreeMap::new();
    for &(id, pred, gt) in areas {
        let index = NnIndex::build(&gt.points);
        per.insert(id.to_string(), area_accuracy(pred, gt, &index)?);
    }
    Ok(aggregate_accuracy(&per))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelShare {
    pub label: String,
    pub count: u64,
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub class: ClassId,
    pub radius: f64,
    pub n: u64,
    pub covered: u64,
    pub fraction: Option<f64>,
    /// Most frequent reference labels over covered points.
    pub neighbor_labels: Vec<LabelShare>,
    /// Same, restricted to covered points whose reference label disagrees.
    pub mismatched_labels: Vec<LabelShare>,
}

fn top3(h: BTreeMap<String, u64>) -> Vec<LabelShare> {
    let total: u64 = h.values().sum();
    let mut v: Vec<_> = h.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(3);
    v.into_iter()
        .map(|(label, count)| LabelShare {
            label,
            pct: 100.0 * count as f64 / total as f64,
            count,
        })
        .collect()
}

/// Fraction of `points` whose nearest reference point lies within `radius`.
pub fn spatial_coverage(
    class: ClassId,
    points: &[Point3],
    gt: &GtCloud,
    index: &NnIndex,
    radius: f64,
) -> Result<CoverageReport, EvalError> {
    let mapped = gt.mapped_names()?;
    let r2 = radius * radius;
    let mut covered = 0u64;
    let mut all = BTreeMap::new();
    let mut mismatched = BTreeMap::new();
    for p in points {
        let Ok(nn) = index.nearest(p) else { break };
        if nn.dist_sq > r2 {
            continue;
        }
        covered += 1;
        let name = gt.label_name(nn.index)?.to_string();
        if gt.mapped_label(&mapped, nn.index)?.class() != Some(class) {
            *mismatched.entry(name.clone()).or_default() += 1;
        }
        *all.entry(name).or_default() += 1;
    }
    let n = points.len() as u64;
    Ok(CoverageReport {
        class,
        radius,
        n,
        covered,
        fraction: (n > 0).then(|| covered as f64 / n as f64),
        neighbor_labels: top3(all),
        mismatched_labels: top3(mismatched),
    })
}

/// Coverage for every class present in `pred`.
pub fn coverage_by_class(pred: &LabeledCloud, gt: &GtCloud, index: &NnIndex, radius: f64) -> Result<Vec<CoverageReport>, EvalError> {
    let mut groups: BTreeMap<ClassId, Vec<Point3>> = BTreeMap::new();
    for i in 0..pred.len() {
        if let Some(c) = u8::try_from(pred.segment[i]).ok().and_then(ClassId::new) {
            groups.entry(c).or_default().push(pred.point(i));
        }
    }
    groups
        .into_iter()
        .map(|(c, pts)| spatial_coverage(c, &pts, gt, index, radius))
        .collect()
}

/// An instance reduced to what matching needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidItem {
    pub area_id: String,
    pub class: ClassId,
    pub centroid: Point3,
}

impl From<&FusedInstance> for CentroidItem {
    fn from(i: &FusedInstance) -> Self {
        Self {
            area_id: i.area_id.clone(),
            class: i.class,
            centroid: i.centroid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct Shares {
    pub both: f64,
    pub a_only: f64,
    pub b_only: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct MatchCounts {
    pub both: u64,
    pub a_only: u64,
    pub b_only: u64,
}

impl MatchCounts {
    pub fn unique_total(&self) -> u64 {
        self.both + self.a_only + self.b_only
    }

    pub fn shares(&self) -> Option<Shares> {
        let t = self.unique_total();
        (t > 0).then(|| Shares {
            both: self.both as f64 / t as f64,
            a_only: self.a_only as f64 / t as f64,
            b_only: self.b_only as f64 / t as f64,
        })
    }

    fn add(&mut self, o: &MatchCounts) {
        self.both += o.both;
        self.a_only += o.a_only;
        self.b_only += o.b_only;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplementarityReport {
    pub radius: f64,
    pub excluded: BTreeSet<ClassId>,
    pub per_class: BTreeMap<ClassId, MatchCounts>,
    pub total: MatchCounts,
    pub unique_total: u64,
    /// Shares of the pooled counts.
    pub instance_weighted: Option<Shares>,
    /// Mean of per-class shares.
    pub class_averaged: Option<Shares>,
}

pub fn default_complementarity_exclusions() -> BTreeSet<ClassId> {
    [ClassId::WALL, ClassId::FLOOR, ClassId::CEILING, ClassId::RAMP].into_iter().collect()
}

/// Greedy one-to-one matching of same-area, same-class centroids. Pairs
/// within `radius` (inclusive) are taken in order of distance, then A
/// index, then B index.
pub fn match_pairs(a: &[Point3], b: &[Point3], radius: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            let d = (p - q).norm();
            if d <= radius {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j));
        }
    }
    out
}

pub fn complementarity(
    a: &[CentroidItem],
    b: &[CentroidItem],
    radius: f64,
    excluded: &BTreeSet<ClassId>,
) -> ComplementarityReport {
    type Groups<'a> = BTreeMap<(&'a str, ClassId), (Vec<Point3>, Vec<Point3>)>;
    let mut groups: Groups = BTreeMap::new();
    for it in a.iter().filter(|i| !excluded.contains(&i.class)) {
        groups.entry((&it.area_id, it.class)).or_default().0.push(it.centroid);
    }
    for it in b.iter().filter(|i| !excluded.contains(&i.class)) {
        groups.entry((&it.area_id, it.class)).or_default().1.push(it.centroid);
    }
    let mut per_class: BTreeMap<ClassId, MatchCounts> = BTreeMap::new();
    for ((_, class), (pa, pb)) in &groups {
        let both = match_pairs(pa, pb, radius).len() as u64;
        per_class.entry(*class).or_default().add(&MatchCounts {
            both,
            a_only: pa.len() as u64 - both,
            b_only: pb.len() as u64 - both,
        });
    }
    let mut total = MatchCounts::default();
    for c in per_class.values() {
        total.add(c);
    }
    let class_shares: Vec<Shares> = per_class.values().filter_map(|c| c.shares()).collect();
    let class_averaged = (!class_shares.is_empty()).then(|| {
        let k = class_shares.len() as f64;
        Shares {
            both: class_shares.iter().map(|s| s.both).sum::<f64>() / k,
            a_only: class_shares.iter().map(|s| s.a_only).sum::<f64>() / k,
            b_only: class_shares.iter().map(|s| s.b_only).sum::<f64>() / k,
        }
    });
    ComplementarityReport {
        radius,
        excluded: excluded.clone(),
        per_class,
        total,
        unique_total: total.unique_total(),
        instance_weighted: total.shares(),
        class_averaged,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetentionCurve {
    pub thresholds: Vec<f64>,
    /// Percent retained per threshold, absent for an empty population.
    pub all: Vec<Option<f64>>,
    pub safety: Vec<Option<f64>>,
    pub n_all: usize,
    pub n_safety: usize,
}

/// Percent of `confidences` at or above each threshold.
pub fn retention(confidences: &[f64], thresholds: &[f64]) -> Vec<Option<f64>> {
    thresholds
        .iter()
        .map(|&t| {
            (!confidences.is_empty())
                .then(|| 100.0 * confidences.iter().filter(|&&c| c >= t).count() as f64 / confidences.len() as f64)
        })
        .collect()
}

pub fn retention_curve(items: &[(ClassId, f64)], thresholds: &[f64], safety: &BTreeSet<ClassId>) -> RetentionCurve {
    let all: Vec<f64> = items.iter().map(|&(_, c)| c).collect();
    let safe: Vec<f64> = items.iter().filter(|(k, _)| safety.contains(k)).map(|&(_, c)| c).collect();
    RetentionCurve {
        thresholds: thresholds.to_vec(),
        all: retention(&all, thresholds),
        safety: retention(&safe, thresholds),
        n_all: all.len(),
        n_safety: safe.len(),
    }
}

pub fn novel_safety_classes() -> BTreeSet<ClassId> {
    ClassId::all().filter(|c| c.is_novel_safety()).collect()
}

/// Evenly spaced thresholds `0, step, 2 step, ... <= 1`.
pub fn threshold_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|i| (i as f64 * step).min(1.0)).collect()
}

#[cfg(test)]
mod tests;
