//! `insight` pipeline driver. Every stage reads from and writes to one
//! output directory:
//!
//! ```text
//! <out>/synth/    synthetic building (rasters, masks, detections, gt, truth)
//! <out>/ingest/   store.jsonl, stats.json
//! <out>/fuse/     <area>/instances.json, <area>/points.bin, per-pipeline dumps
//! <out>/filter/   <area>/..., reduction.json
//! <out>/graph/    full.graphml, <role>.graphml, payload.json
//! <out>/export/   <area>/ labeled clouds
//! <out>/eval/     report.json
//! <out>/budget/   report.json
//! ```
//!
//! Each stage directory also gets a `provenance.json`.

pub mod config;
pub mod error;
mod stages;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use insight_core::taxonomy::{Role, Taxonomy};
use serde::Serialize;

pub use config::PipelineConfig;
pub use error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Firefighter,
    Ems,
    Full,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Self {
        match r {
            RoleArg::Firefighter => Role::Firefighter,
            RoleArg::Ems => Role::Ems,
            RoleArg::Full => Role::Full,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "insight", version, about = "Lift 2D safety-equipment detections into 3D scene graphs")]
pub struct Cli {
    /// Pipeline config (JSON). Defaults apply to anything left out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for area-level parallelism.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the config role.
    #[arg(long, global = true, value_enum)]
    pub role: Option<RoleArg>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic building with planted fixtures.
    Synth,
    /// Gate and deduplicate detection files into one store.
    Ingest,
    /// Project stored detections and fuse them into per-area instances.
    Fuse,
    /// Apply the confidence gate and per-subarea caps.
    Filter,
    /// Build the scene graph, role views and payload report.
    Graph {
        /// Build from the plausibility-filtered instances.
        #[arg(long)]
        filtered: bool,
    },
    /// Write labeled point clouds.
    Export {
        #[arg(long)]
        filtered: bool,
    },
    /// Score exported clouds and fused instances against the reference.
    Eval,
    /// Transmission-time grid for configured and measured payloads.
    Budget,
}

pub(crate) struct Ctx {
    pub cfg: PipelineConfig,
    pub tax: Taxonomy,
    pub out: PathBuf,
    pub seed: u64,
    pub role: Role,
    pub pool: rayon::ThreadPool,
}

impl Ctx {
    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.out.join(stage)
    }

    /// Clears and recreates a stage directory so reruns leave no stale files.
    pub fn fresh_stage(&self, stage: &str) -> Result<PathBuf> {
        let dir = self.stage_dir(stage);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(CliError::internal)?;
        }
        std::fs::create_dir_all(&dir).map_err(CliError::internal)?;
        Ok(dir)
    }

    pub fn synth_dir(&self) -> PathBuf {
        self.stage_dir("synth")
    }

    pub fn provenance(&self, dir: &Path, stage: &str) -> Result<()> {
        #[derive(Serialize)]
        struct Provenance<'a> {
            tool: &'a str,
            version: &'a str,
            stage: &'a str,
            config_hash: String,
            seed: u64,
            role: Role,
        }
        write_json(
            &dir.join("provenance.json"),
            &Provenance {
                tool: "insight",
                version: env!("CARGO_PKG_VERSION"),
                stage,
                config_hash: self.cfg.hash(),
                seed: self.seed,
                role: self.role,
            },
        )
    }
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::internal)?;
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::internal)
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.jobs == 0 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    let cfg = PipelineConfig::load(cli.config.as_deref())?;
    let tax = cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(CliError::internal)?;
    let ctx = Ctx {
        seed: cli.seed.unwrap_or(cfg.seed),
        role: cli.role.map(Role::from).unwrap_or(cfg.role),
        cfg,
        tax,
        out: cli.out,
        pool,
    };
    match cli.command {
        Command::Synth => stages::synth(&ctx),
        Command::Ingest => stages::ingest(&ctx),
        Command::Fuse => stages::fuse(&ctx),
        Command::Filter => stages::filter(&ctx),
        Command::Graph { filtered } => stages::graph(&ctx, filtered),
        Command::Export { filtered } => stages::export(&ctx, filtered),
        Command::Eval => stages::eval(&ctx),
        Command::Budget => stages::budget(&ctx),
    }
}
