use std::collections::BTreeMap;

use insight_core::fusion::{count_by_class, write_instance_dump, write_point_sidecar};
use insight_core::pcexport::{build_cloud, write_cloud};
use insight_core::plausibility::{self, ReductionReport, ReductionRow};
use insight_core::scenegraph::{build, export_graphml_with_comment, filter_role, payload_stats};
use insight_core::Role;
use serde::Serialize;

use super::{instance_stage, load_instances, INSTANCES_FILE, POINTS_FILE};
use crate::error::{CliError, Result};
use crate::{write_json, Ctx};

#[derive(Serialize)]
struct Reduction {
    areas: BTreeMap<String, ReductionRow>,
    #[serde(flatten)]
    totals: ReductionReport,
}

pub(crate) fn filter(ctx: &Ctx) -> Result<()> {
    let areas = load_instances(&ctx.stage_dir("fuse"), true)?;
    let dir = ctx.fresh_stage("filter")?;
    let (mut raw, mut kept) = (BTreeMap::new(), BTreeMap::new());
    let mut rows = BTreeMap::new();
    for (area, inst) in &areas {
        let survivors = plausibility::apply(inst, &ctx.cfg.plausibility, ctx.tax.caps());
        let adir = dir.join(area);
        std::fs::create_dir_all(&adir).map_err(CliError::internal)?;
        write_instance_dump(&adir.join(INSTANCES_FILE), &survivors).map_err(CliError::internal)?;
        write_point_sidecar(&adir.join(POINTS_FILE), &survivors).map_err(CliError::internal)?;
        for (c, n) in count_by_class(inst) {
            *raw.entry(c).or_default() += n;
        }
        for (c, n) in count_by_class(&survivors) {
            *kept.entry(c).or_default() += n;
        }
        rows.insert(area.clone(), ReductionRow::new(inst.len(), survivors.len()));
    }
    let totals = plausibility::report(&raw, &kept, ctx.cfg.plausibility.tau);
    println!("filter: {} -> {} instances", totals.overall.raw, totals.overall.filtered);
    write_json(&dir.join("reduction.json"), &Reduction { areas: rows, totals })?;
    ctx.provenance(&dir, "filter")
}

pub(crate) fn graph(ctx: &Ctx, filtered: bool) -> Result<()> {
    let areas = load_instances(&instance_stage(ctx, filtered), false)?;
    let outcome = build(&areas, &ctx.cfg.floor_model, &ctx.tax);
    let full = outcome.graph;
    full.validate().map_err(CliError::internal)?;
    let views: Vec<(Role, _)> = [Role::Firefighter, Role::Ems]
        .into_iter()
        .map(|r| (r, filter_role(&full, ctx.tax.role_spec(r))))
        .collect();
    let refs: Vec<(Role, &_)> = views.iter().map(|(r, g)| (*r, g)).collect();
    let payload = payload_stats(&full, &refs);

    let dir = ctx.fresh_stage("graph")?;
    let desc = format!(
        "insight {} config {} source {}",
        env!("CARGO_PKG_VERSION"),
        ctx.cfg.hash(),
        if filtered { "filter" } else { "fuse" }
    );
    std::fs::write(dir.join("full.graphml"), export_graphml_with_comment(&full, Some(&desc)))
        .map_err(CliError::internal)?;
    if let Some((role, g)) = views.iter().find(|(r, _)| *r == ctx.role) {
        std::fs::write(dir.join(format!("{role}.graphml")), export_graphml_with_comment(g, Some(&desc)))
            .map_err(CliError::internal)?;
    }
    write_json(&dir.join("payload.json"), &payload)?;
    write_json(&dir.join("rejected.json"), &outcome.rejected)?;
    ctx.provenance(&dir, "graph")?;
    println!("graph: {} nodes, {} edges", full.node_count(), full.edge_count());
    Ok(())
}

pub(crate) fn export(ctx: &Ctx, filtered: bool) -> Result<()> {
    let areas = load_instances(&instance_stage(ctx, filtered), true)?;
    let dir = ctx.fresh_stage("export")?;
    let mut total = 0;
    for (area, inst) in &areas {
        let cloud = build_cloud(area, inst);
        total += cloud.len();
        write_cloud(&dir.join(area), &cloud, &ctx.cfg.export.frame).map_err(CliError::internal)?;
    }
    ctx.provenance(&dir, "export")?;
    println!("export: {} areas, {total} points", areas.len());
    Ok(())
}
