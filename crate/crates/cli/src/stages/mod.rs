mod analyze;
mod fuse;
mod ingest;
mod scene;

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};

use insight_core::fusion::{read_instance_dump, read_point_sidecar, DumpError, FusedInstance};
use insight_core::synth::{generate, write_scene};

use crate::error::{require, CliError, Result};
use crate::Ctx;

pub(crate) use analyze::{budget, eval};
pub(crate) use fuse::fuse;
pub(crate) use ingest::ingest;
pub(crate) use scene::{export, filter, graph};

pub(crate) const INSTANCES_FILE: &str = "instances.json";
pub(crate) const POINTS_FILE: &str = "points.bin";
pub(crate) const SAM3_DUMP: &str = "instances_sam3.json";
pub(crate) const CV_DUMP: &str = "instances_cv.json";

pub(crate) fn synth(ctx: &Ctx) -> Result<()> {
    let scene = generate(&ctx.cfg.synth, ctx.seed).map_err(CliError::validation)?;
    let dir = ctx.fresh_stage("synth")?;
    write_scene(&scene, &dir).map_err(CliError::internal)?;
    ctx.provenance(&dir, "synth")?;
    let detections: usize = scene.areas.iter().map(|a| a.detection_count()).sum();
    let fixtures: usize = scene.areas.iter().map(|a| a.fixtures.len()).sum();
    println!("synth: {} areas, {fixtures} fixtures, {detections} detections", scene.areas.len());
    Ok(())
}

impl Ctx {
    pub(crate) fn rasters_dir(&self) -> PathBuf {
        self.cfg.paths.rasters.clone().unwrap_or_else(|| self.synth_dir().join("rasters"))
    }

    pub(crate) fn detection_inputs(&self) -> Vec<PathBuf> {
        self.cfg
            .paths
            .detections
            .clone()
            .unwrap_or_else(|| vec![self.synth_dir().join("detections")])
    }

    pub(crate) fn gt_dir(&self) -> PathBuf {
        self.cfg.paths.gt.clone().unwrap_or_else(|| self.synth_dir().join("gt"))
    }

    /// Planted truth, if any. Only an explicitly configured path is required.
    pub(crate) fn truth_path(&self) -> Result<Option<PathBuf>> {
        match &self.cfg.paths.truth {
            Some(p) => require(p).map(|_| Some(p.clone())),
            None => {
                let p = self.synth_dir().join("truth.json");
                Ok(p.exists().then_some(p))
            }
        }
    }

    /// Path as written into artifacts: relative to `--out` when possible.
    pub(crate) fn display_path(&self, path: &Path) -> String {
        let rel = match (absolute(path), absolute(&self.out)) {
            (Ok(p), Ok(o)) => pathdiff::diff_paths(p, o),
            _ => None,
        };
        slashed(rel.as_deref().unwrap_or(path))
    }
}

pub(crate) fn slashed(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Absolute and lexically normalized (`.` and `..` folded).
pub(crate) fn absolute(path: &Path) -> std::io::Result<PathBuf> {
    let abs = std::path::absolute(path)?;
    let mut out = PathBuf::new();
    for c in abs.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    Ok(out)
}

/// Area ids become directory names.
pub(crate) fn check_area_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && !id.contains(['/', '\\'])
        && !id.chars().any(char::is_control);
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation(format!("area id `{id}` is not usable as a directory name")))
    }
}

/// Sorted subdirectory names of a stage directory.
pub(crate) fn area_dirs(dir: &Path) -> Result<Vec<String>> {
    require(dir)?;
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(CliError::internal)? {
        let entry = entry.map_err(CliError::internal)?;
        if entry.file_type().map_err(CliError::internal)?.is_dir() {
            out.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    out.sort();
    Ok(out)
}

fn dump_err(path: &Path, e: DumpError) -> CliError {
    match e {
        DumpError::Io(_) if !path.exists() => CliError::missing(path),
        DumpError::Io(e) => CliError::Internal(format!("{}: {e}", path.display())),
        other => CliError::Validation(format!("{}: {other}", path.display())),
    }
}

pub(crate) fn read_dump(path: &Path) -> Result<Vec<FusedInstance>> {
    read_instance_dump(path).map_err(|e| dump_err(path, e))
}

/// Per-area instances of a fuse or filter stage, optionally with points.
pub(crate) fn load_instances(stage_dir: &Path, with_points: bool) -> Result<BTreeMap<String, Vec<FusedInstance>>> {
    let mut out = BTreeMap::new();
    for area in area_dirs(stage_dir)? {
        let dir = stage_dir.join(&area);
        let mut inst = read_dump(&dir.join(INSTANCES_FILE))?;
        if with_points {
            let p = dir.join(POINTS_FILE);
            read_point_sidecar(&p, &mut inst).map_err(|e| dump_err(&p, e))?;
        }
        out.insert(area, inst);
    }
    Ok(out)
}

/// Fuse output by default, plausibility-filtered instances on request.
pub(crate) fn instance_stage(ctx: &Ctx, filtered: bool) -> PathBuf {
    ctx.stage_dir(if filtered { "filter" } else { "fuse" })
}
