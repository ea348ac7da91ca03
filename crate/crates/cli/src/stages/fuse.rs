use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use insight_core::depthio::{read_mask, read_xyz_raster};
use insight_core::detect::load_detections;
use insight_core::fusion::{
    count_by_class, fragmentation, fuse_area, project, write_instance_dump, write_point_sidecar, FusedInstance,
    Observation,
};
use insight_core::synth::read_truth;
use insight_core::{ClassId, DetectionRecord, FusionConfig, Source, XyzRaster};
use rayon::prelude::*;
use serde::Serialize;

use super::ingest::STORE_FILE;
use super::{check_area_id, CV_DUMP, INSTANCES_FILE, POINTS_FILE, SAM3_DUMP};
use crate::error::{require, CliError, Result};
use crate::{write_json, Ctx};

#[derive(Debug, Clone, Serialize)]
struct Diagnostic {
    area_id: String,
    record_index: usize,
    image_id: String,
    reason: String,
}

struct AreaResult {
    area_id: String,
    observations: usize,
    raw_counts: BTreeMap<ClassId, usize>,
    fused: Vec<FusedInstance>,
    sam3: Vec<FusedInstance>,
    cv: Vec<FusedInstance>,
    diagnostics: Vec<Diagnostic>,
}

#[derive(Serialize)]
struct AreaSummary {
    observations: usize,
    instances: usize,
    skipped: usize,
    per_class: BTreeMap<ClassId, usize>,
}

#[derive(Serialize)]
struct Fragmentation {
    reference: BTreeMap<ClassId, usize>,
    /// Projected observations per reference object, before fusion.
    raw: BTreeMap<ClassId, Option<f64>>,
    fused: BTreeMap<ClassId, Option<f64>>,
    raw_overall: Option<f64>,
    fused_overall: Option<f64>,
}

#[derive(Serialize)]
struct Summary {
    d_merge: f64,
    areas: BTreeMap<String, AreaSummary>,
    fragmentation: Option<Fragmentation>,
}

fn fuse_one(
    area_id: &str,
    records: &[(usize, DetectionRecord)],
    rasters: &Path,
    store_dir: &Path,
    cfg: &FusionConfig,
) -> AreaResult {
    let mut cache: HashMap<&str, std::result::Result<XyzRaster, String>> = HashMap::new();
    let mut obs: Vec<Observation> = Vec::new();
    let mut diagnostics = Vec::new();
    for (index, det) in records {
        let raster = cache.entry(det.image_id.as_str()).or_insert_with(|| {
            read_xyz_raster(&rasters.join(format!("{}.xyzr", det.image_id))).map_err(|e| e.to_string())
        });
        let lifted = match (raster, &det.mask) {
            (Err(e), _) => Err(e.clone()),
            (_, None) => Err("detection has no mask".to_string()),
            (Ok(r), Some(m)) => read_mask(&store_dir.join(m))
                .map_err(|e| e.to_string())
                .and_then(|mask| project(det, *index, &mask, r).map_err(|e| e.to_string())),
        };
        match lifted {
            Ok(o) => obs.push(o),
            Err(reason) => diagnostics.push(Diagnostic {
                area_id: area_id.to_string(),
                record_index: *index,
                image_id: det.image_id.clone(),
                reason,
            }),
        }
    }
    let pick = |keep: fn(Source) -> bool| -> Vec<Observation> {
        obs.iter().filter(|o| keep(o.detection.source)).cloned().collect()
    };
    let sam3 = fuse_area(area_id, pick(|s| s == Source::Sam3), cfg);
    let cv = fuse_area(area_id, pick(|s| s.is_visual() && s != Source::Sam3), cfg);
    let mut raw_counts = BTreeMap::new();
    for o in &obs {
        *raw_counts.entry(o.detection.class).or_default() += 1;
    }
    AreaResult {
        area_id: area_id.to_string(),
        observations: obs.len(),
        raw_counts,
        fused: fuse_area(area_id, obs, cfg),
        sam3,
        cv,
        diagnostics,
    }
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

pub(crate) fn fuse(ctx: &Ctx) -> Result<()> {
    let store_dir = ctx.stage_dir("ingest");
    let store = store_dir.join(STORE_FILE);
    require(&store)?;
    let rasters = ctx.rasters_dir();
    require(&rasters)?;
    let loaded = load_detections(&store).map_err(CliError::validation)?;
    if let Some(r) = loaded.rejected.first() {
        return Err(CliError::Validation(format!("{}:{}: {}", store.display(), r.line, r.reason)));
    }
    let mut areas: BTreeMap<String, Vec<(usize, DetectionRecord)>> = BTreeMap::new();
    for (i, r) in loaded.records.into_iter().enumerate() {
        check_area_id(&r.area_id)?;
        areas.entry(r.area_id.clone()).or_default().push((i, r));
    }
    let truth = ctx.truth_path()?.map(|p| read_truth(&p).map_err(CliError::validation)).transpose()?;

    let cfg = &ctx.cfg.fusion;
    let results: Vec<AreaResult> = ctx.pool.install(|| {
        areas
            .par_iter()
            .map(|(id, recs)| fuse_one(id, recs, &rasters, &store_dir, cfg))
            .collect()
    });

    let dir = ctx.fresh_stage("fuse")?;
    let mut summary = Summary {
        d_merge: cfg.d_merge,
        areas: BTreeMap::new(),
        fragmentation: None,
    };
    let mut diagnostics = Vec::new();
    let mut raw_total: BTreeMap<ClassId, usize> = BTreeMap::new();
    for r in &results {
        let adir = dir.join(&r.area_id);
        std::fs::create_dir_all(&adir).map_err(CliError::internal)?;
        write_instance_dump(&adir.join(INSTANCES_FILE), &r.fused).map_err(CliError::internal)?;
        write_point_sidecar(&adir.join(POINTS_FILE), &r.fused).map_err(CliError::internal)?;
        write_instance_dump(&adir.join(SAM3_DUMP), &r.sam3).map_err(CliError::internal)?;
        write_instance_dump(&adir.join(CV_DUMP), &r.cv).map_err(CliError::internal)?;
        for (c, n) in &r.raw_counts {
            *raw_total.entry(*c).or_default() += n;
        }
        summary.areas.insert(
            r.area_id.clone(),
            AreaSummary {
                observations: r.observations,
                instances: r.fused.len(),
                skipped: r.diagnostics.len(),
                per_class: count_by_class(&r.fused),
            },
        );
        diagnostics.extend(r.diagnostics.iter().cloned());
    }
    if let Some(truth) = truth {
        let mut reference: BTreeMap<ClassId, usize> = BTreeMap::new();
        for f in &truth {
            *reference.entry(f.class).or_default() += 1;
        }
        let fused_total = count_by_class(results.iter().flat_map(|r| &r.fused));
        let n_ref: usize = reference.values().sum();
        let in_ref = |m: &BTreeMap<ClassId, usize>| -> usize {
            m.iter().filter(|(c, _)| reference.contains_key(c)).map(|(_, n)| n).sum()
        };
        summary.fragmentation = Some(Fragmentation {
            raw: fragmentation(&raw_total, &reference),
            fused: fragmentation(&fused_total, &reference),
            raw_overall: ratio(in_ref(&raw_total), n_ref),
            fused_overall: ratio(in_ref(&fused_total), n_ref),
            reference,
        });
    }
    write_json(&dir.join("diagnostics.json"), &diagnostics)?;
    write_json(&dir.join("summary.json"), &summary)?;
    ctx.provenance(&dir, "fuse")?;
    let n: usize = results.iter().map(|r| r.fused.len()).sum();
    println!("fuse: {} areas, {n} instances, {} skipped detections", results.len(), diagnostics.len());
    Ok(())
}
