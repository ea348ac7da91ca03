use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use insight_core::detect::{
    self, load_detections, ocr_exclusive_count, small_object_stats, write_detections, IngestError, IngestStats,
    LoadedDetections, OcrExclusivity, Rejection,
};
use insight_core::ClassId;
use serde::Serialize;

use super::{absolute, slashed};
use crate::error::{require, CliError, Result};
use crate::{write_json, Ctx};

pub(crate) const STORE_FILE: &str = "store.jsonl";

#[derive(Serialize)]
struct InputFile {
    file: String,
    records: usize,
    rejected: Vec<Rejection>,
}

#[derive(Serialize)]
struct Stats {
    inputs: Vec<InputFile>,
    totals: IngestStats,
    small_object_area_px: f64,
    small_object_fraction: BTreeMap<ClassId, Option<f64>>,
    ocr: OcrExclusivity,
}

/// Expands directories to their `*.jsonl` files, sorted by path.
fn expand(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        require(p)?;
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(CliError::internal)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()
                .map_err(CliError::internal)?;
            found.retain(|f| f.is_file() && f.extension().is_some_and(|x| x == "jsonl"));
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn load(path: &Path) -> Result<LoadedDetections> {
    load_detections(path).map_err(|e| match e {
        IngestError::Io { .. } => CliError::Internal(e.to_string()),
        other => CliError::Validation(other.to_string()),
    })
}

/// Mask paths are relative to the file holding the record; the store lives
/// elsewhere, so rebase them.
fn rebase_masks(loaded: &mut LoadedDetections, from_file: &Path, store_dir: &Path) -> Result<()> {
    let src_dir = absolute(from_file.parent().unwrap_or(Path::new("."))).map_err(CliError::internal)?;
    for r in &mut loaded.records {
        if let Some(m) = &r.mask {
            let target = absolute(&src_dir.join(m)).map_err(CliError::internal)?;
            let rel = pathdiff::diff_paths(&target, store_dir).unwrap_or(target);
            r.mask = Some(slashed(&rel));
        }
    }
    Ok(())
}

pub(crate) fn ingest(ctx: &Ctx) -> Result<()> {
    let files = expand(&ctx.detection_inputs())?;
    let mut loaded = Vec::with_capacity(files.len());
    for f in &files {
        loaded.push(load(f)?);
    }
    let dir = ctx.fresh_stage("ingest")?;
    let store_dir = absolute(&dir).map_err(CliError::internal)?;
    for (l, f) in loaded.iter_mut().zip(&files) {
        rebase_masks(l, f, &store_dir)?;
    }

    let (kept, totals) = detect::ingest(&loaded, &ctx.cfg.gate);
    let mut buf = Vec::new();
    write_detections(&mut buf, &kept).map_err(CliError::internal)?;
    std::fs::write(dir.join(STORE_FILE), buf).map_err(CliError::internal)?;

    let ic = &ctx.cfg.ingest;
    let stats = Stats {
        inputs: files
            .iter()
            .zip(&loaded)
            .map(|(f, l)| InputFile {
                file: ctx.display_path(f),
                records: l.records.len(),
                rejected: l.rejected.clone(),
            })
            .collect(),
        small_object_area_px: ic.small_object_area_px,
        small_object_fraction: small_object_stats(&kept, ic.small_object_area_px),
        ocr: ocr_exclusive_count(&kept, ic.ocr_radius_px),
        totals,
    };
    write_json(&dir.join("stats.json"), &stats)?;
    ctx.provenance(&dir, "ingest")?;
    println!(
        "ingest: {} files, {} raw, {} kept",
        stats.totals.files, stats.totals.raw_records, stats.totals.kept
    );
    Ok(())
}
