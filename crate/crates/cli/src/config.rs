use std::path::{Path, PathBuf};

use insight_core::detect::{GateConfig, DEFAULT_OCR_RADIUS_PX, SMALL_OBJECT_AREA_PX};
use insight_core::eval::{default_complementarity_exclusions, DEFAULT_COVERAGE_RADIUS, DEFAULT_MATCH_RADIUS};
use insight_core::fusion::FusionConfig;
use insight_core::plausibility::PlausibilityConfig;
use insight_core::budget::BudgetConfig;
use insight_core::scenegraph::FloorModel;
use insight_core::synth::SynthSpec;
use insight_core::taxonomy::{ClassId, Role, Taxonomy, TaxonomyConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Input locations. Unset entries fall back to the synth stage output under
/// `--out`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub rasters: Option<PathBuf>,
    /// Detection JSONL files or directories holding them.
    pub detections: Option<Vec<PathBuf>>,
    pub gt: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub ocr_radius_px: f64,
    pub small_object_area_px: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            ocr_radius_px: DEFAULT_OCR_RADIUS_PX,
            small_object_area_px: SMALL_OBJECT_AREA_PX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub coverage_radius: f64,
    pub match_radius: f64,
    pub retention_step: f64,
    pub complementarity_excluded: Vec<ClassId>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            coverage_radius: DEFAULT_COVERAGE_RADIUS,
            match_radius: DEFAULT_MATCH_RADIUS,
            retention_step: 0.05,
            complementarity_excluded: default_complementarity_exclusions().into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    /// Coordinate frame recorded in cloud manifests.
    pub frame: String,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self { frame: "world".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub seed: u64,
    pub gate: GateConfig,
    pub ingest: IngestConfig,
    pub fusion: FusionConfig,
    pub plausibility: PlausibilityConfig,
    pub taxonomy: TaxonomyConfig,
    pub role: Role,
    pub floor_model: FloorModel,
    pub eval: EvalConfig,
    pub export: ExportConfig,
    pub budget: BudgetConfig,
    pub synth: SynthSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            seed: 0,
            gate: GateConfig::default(),
            ingest: IngestConfig::default(),
            fusion: FusionConfig::default(),
            plausibility: PlausibilityConfig::default(),
            taxonomy: TaxonomyConfig::default(),
            role: Role::Full,
            floor_model: FloorModel::default(),
            eval: EvalConfig::default(),
            export: ExportConfig::default(),
            budget: BudgetConfig::default(),
            synth: SynthSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|_| CliError::missing(path))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<Taxonomy> {
        self.gate.validate().map_err(CliError::Validation)?;
        self.fusion.validate().map_err(CliError::Validation)?;
        self.plausibility.validate().map_err(CliError::Validation)?;
        self.floor_model.validate().map_err(CliError::Validation)?;
        self.budget.validate().map_err(CliError::validation)?;
        self.synth.validate().map_err(CliError::validation)?;
        if !(self.ingest.ocr_radius_px >= 0.0 && self.ingest.small_object_area_px > 0.0) {
            return Err(CliError::Validation("ingest radius and area threshold must be positive".into()));
        }
        let e = &self.eval;
        if !(e.coverage_radius > 0.0 && e.match_radius > 0.0) {
            return Err(CliError::Validation("eval radii must be positive".into()));
        }
        if !(e.retention_step > 0.0 && e.retention_step <= 1.0) {
            return Err(CliError::Validation("retention_step must lie in (0, 1]".into()));
        }
        Taxonomy::from_config(&self.taxonomy).map_err(CliError::validation)
    }

    /// SHA-256 of the canonical config JSON with input paths removed, so
    /// relocating inputs keeps the hash.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("paths");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_partial_json_parses() {
        PipelineConfig::default().validate().unwrap();
        let cfg: PipelineConfig = serde_json::from_str(r#"{"fusion": {"d_merge": 0.25}, "role": "ems"}"#).unwrap();
        assert_eq!(cfg.fusion.d_merge, 0.25);
        assert_eq!(cfg.role, Role::Ems);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"fuson": {}}"#).is_err());
    }

    #[test]
    fn hash_ignores_paths() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.paths.rasters = Some("/elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.fusion.d_merge = 0.3;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn out_of_range_thresholds_fail() {
        let mut c = PipelineConfig::default();
        c.plausibility.tau = 1.5;
        assert!(matches!(c.validate(), Err(CliError::Validation(_))));
    }
}
