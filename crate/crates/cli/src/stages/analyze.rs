use std::collections::BTreeMap;
use std::path::Path;

use insight_core::budget::{budget_report, compression_ratio, format_duration, BudgetReport, NamedPayload};
use insight_core::eval::{
    aggregate_accuracy, area_accuracy, check_frames, complementarity, coverage_by_class, novel_safety_classes,
    read_gt_cloud, retention_curve, threshold_grid, AccuracyReport, AreaAccuracy, CentroidItem,
    ComplementarityReport, CoverageReport, EvalError, NnIndex, RetentionCurve,
};
use insight_core::pcexport::{read_cloud, PcError};
use insight_core::ClassId;
use rayon::prelude::*;
use serde::Serialize;

use super::{area_dirs, load_instances, read_dump, CV_DUMP, SAM3_DUMP};
use crate::error::{require, CliError, Result};
use crate::{write_json, Ctx};

fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::Cloud(PcError::Io { .. }) => CliError::Internal(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

#[derive(Serialize)]
struct EvalReport {
    accuracy: AccuracyReport,
    coverage: BTreeMap<String, Vec<CoverageReport>>,
    complementarity: Option<ComplementarityReport>,
    retention: Option<RetentionCurve>,
}

fn score_area(pred_dir: &Path, gt_dir: &Path, radius: f64) -> Result<(AreaAccuracy, Vec<CoverageReport>)> {
    let (pred, manifest) = read_cloud(pred_dir).map_err(|e| eval_err(e.into()))?;
    let gt = read_gt_cloud(gt_dir).map_err(eval_err)?;
    check_frames(&manifest, &gt).map_err(eval_err)?;
    let index = NnIndex::build(&gt.points);
    let acc = area_accuracy(&pred, &gt, &index).map_err(eval_err)?;
    let cov = coverage_by_class(&pred, &gt, &index, radius).map_err(eval_err)?;
    Ok((acc, cov))
}

/// Per-pipeline dumps from the fuse stage; `None` when any area lacks them.
fn pipeline_items(fuse_dir: &Path, areas: &[String]) -> Result<Option<(Vec<CentroidItem>, Vec<CentroidItem>)>> {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for area in areas {
        let (pa, pb) = (fuse_dir.join(area).join(SAM3_DUMP), fuse_dir.join(area).join(CV_DUMP));
        if !pa.exists() || !pb.exists() {
            return Ok(None);
        }
        a.extend(read_dump(&pa)?.iter().map(CentroidItem::from));
        b.extend(read_dump(&pb)?.iter().map(CentroidItem::from));
    }
    Ok(Some((a, b)))
}

pub(crate) fn eval(ctx: &Ctx) -> Result<()> {
    let export_dir = ctx.stage_dir("export");
    let areas = area_dirs(&export_dir)?;
    let gt_root = ctx.gt_dir();
    require(&gt_root)?;
    for a in &areas {
        require(&gt_root.join(a))?;
    }
    let radius = ctx.cfg.eval.coverage_radius;
    let scored: Vec<Result<(AreaAccuracy, Vec<CoverageReport>)>> = ctx.pool.install(|| {
        areas
            .par_iter()
            .map(|a| score_area(&export_dir.join(a), &gt_root.join(a), radius))
            .collect()
    });
    let mut per_area = BTreeMap::new();
    let mut coverage = BTreeMap::new();
    for (a, r) in areas.iter().zip(scored) {
        let (acc, cov) = r?;
        per_area.insert(a.clone(), acc);
        coverage.insert(a.clone(), cov);
    }

    let fuse_dir = ctx.stage_dir("fuse");
    let (comp, retention) = if fuse_dir.exists() {
        let fused_areas = area_dirs(&fuse_dir)?;
        let e = &ctx.cfg.eval;
        let comp = pipeline_items(&fuse_dir, &fused_areas)?.map(|(a, b)| {
            complementarity(&a, &b, e.match_radius, &e.complementarity_excluded.iter().copied().collect())
        });
        let items: Vec<(ClassId, f64)> = load_instances(&fuse_dir, false)?
            .values()
            .flatten()
            .map(|i| (i.class, i.confidence))
            .collect();
        let curve = retention_curve(&items, &threshold_grid(e.retention_step), &novel_safety_classes());
        (comp, Some(curve))
    } else {
        (None, None)
    };

    let report = EvalReport {
        accuracy: aggregate_accuracy(&per_area),
        coverage,
        complementarity: comp,
        retention,
    };
    let dir = ctx.fresh_stage("eval")?;
    write_json(&dir.join("report.json"), &report)?;
    ctx.provenance(&dir, "eval")?;
    match report.accuracy.overall {
        Some(a) => println!("eval: {} areas, accuracy {:.1}%", areas.len(), 100.0 * a),
        None => println!("eval: {} areas, no comparable points", areas.len()),
    }
    Ok(())
}

#[derive(Serialize)]
struct Compression {
    source_bytes: f64,
    graph_bytes: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct BudgetOut {
    #[serde(flatten)]
    grid: BudgetReport,
    formatted: Vec<Vec<String>>,
    compression: Option<Compression>,
}

fn dir_bytes(dir: &Path) -> Result<u64> {
    let mut total = 0;
    for e in std::fs::read_dir(dir).map_err(CliError::internal)? {
        let m = e.map_err(CliError::internal)?.metadata().map_err(CliError::internal)?;
        if m.is_file() {
            total += m.len();
        }
    }
    Ok(total)
}

pub(crate) fn budget(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg.budget;
    let mut payloads = cfg.payloads.clone();
    let graph_dir = ctx.stage_dir("graph");
    let mut full_graph = None;
    if graph_dir.exists() {
        let mut files: Vec<_> = std::fs::read_dir(&graph_dir)
            .map_err(CliError::internal)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()
            .map_err(CliError::internal)?;
        files.retain(|p| p.extension().is_some_and(|x| x == "graphml"));
        files.sort();
        for p in files {
            let bytes = std::fs::metadata(&p).map_err(CliError::internal)?.len() as f64;
            let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            if stem == "full" {
                full_graph = Some(bytes);
            }
            payloads.push(NamedPayload::new(&format!("measured_{stem}"), bytes));
        }
    }
    let rasters = ctx.rasters_dir();
    let source = if rasters.is_dir() { Some(dir_bytes(&rasters)? as f64) } else { None };
    let compression = match (source, full_graph) {
        (Some(s), Some(g)) => Some(Compression {
            source_bytes: s,
            graph_bytes: g,
            ratio: compression_ratio(s, g).map_err(CliError::validation)?,
        }),
        _ => None,
    };

    let grid = budget_report(cfg, &payloads);
    let formatted = grid
        .rows
        .iter()
        .map(|r| r.cells.iter().map(|c| format_duration(c.seconds)).collect())
        .collect();
    let out = BudgetOut {
        grid,
        formatted,
        compression,
    };
    let dir = ctx.fresh_stage("budget")?;
    write_json(&dir.join("report.json"), &out)?;
    ctx.provenance(&dir, "budget")?;
    for (row, cells) in out.grid.rows.iter().zip(&out.formatted) {
        println!("{:<24} {}", row.payload, cells.join("  "));
    }
    Ok(())
}
