//! Payload delivery arithmetic. Units are decimal: 1 MB = 10^6 bytes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MB: f64 = 1e6;
pub const GB: f64 = 1e9;

#[derive(Debug, Error, PartialEq)]
pub enum BudgetError {
    #[error("graph size must be positive")]
    ZeroGraph,
    #[error("invalid budget config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPayload {
    pub name: String,
    pub bytes: f64,
}

impl NamedPayload {
    pub fn new(name: &str, bytes: f64) -> Self {
        Self {
            name: name.into(),
            bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    /// Decision window, seconds.
    pub window: f64,
    /// Link rates, bits per second.
    pub bandwidths: Vec<f64>,
    /// Multiplier on raw transfer time.
    pub overhead: f64,
    pub payloads: Vec<NamedPayload>,
}

pub fn default_payloads() -> Vec<NamedPayload> {
    vec![
        NamedPayload::new("raw_geometry_db", 86.1 * GB),
        NamedPayload::new("full_scene_graph", 4.2 * MB),
        NamedPayload::new("firefighter_filtered", 1.8 * MB),
        NamedPayload::new("ems_filtered", 0.8 * MB),
    ]
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            window: 30.0,
            bandwidths: vec![1e6, 5e6, 25e6],
            overhead: 1.0,
            payloads: default_payloads(),
        }
    }
}

impl BudgetConfig {
    pub fn validate(&self) -> Result<(), BudgetError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.window) || !pos(self.overhead) {
            return Err(BudgetError::Config("window and overhead must be positive".into()));
        }
        if self.bandwidths.is_empty() || !self.bandwidths.iter().all(|&b| pos(b)) {
            return Err(BudgetError::Config("bandwidths must be a non-empty list of positive rates".into()));
        }
        if self.payloads.iter().any(|p| !p.bytes.is_finite() || p.bytes < 0.0) {
            return Err(BudgetError::Config("payload sizes must be non-negative".into()));
        }
        Ok(())
    }

    /// Bytes deliverable within the window at `bandwidth_bps`.
    pub fn budget_bytes(&self, bandwidth_bps: f64) -> f64 {
        self.window * bandwidth_bps / 8.0 / self.overhead
    }
}

/// Seconds to send `payload_bytes` at `bandwidth_bps`.
pub fn transmit_time(payload_bytes: f64, bandwidth_bps: f64) -> f64 {
    payload_bytes * 8.0 / bandwidth_bps
}

pub fn compression_ratio(source_bytes: f64, graph_bytes: f64) -> Result<f64, BudgetError> {
    if graph_bytes <= 0.0 {
        return Err(BudgetError::ZeroGraph);
    }
    Ok(source_bytes / graph_bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowVerdict {
    pub bandwidth_bps: f64,
    pub seconds: f64,
    pub fits: bool,
    /// `window - seconds`; negative when the payload is late.
    pub margin: f64,
}

pub fn fits_window(payload_bytes: f64, cfg: &BudgetConfig) -> Vec<WindowVerdict> {
    cfg.bandwidths
        .iter()
        .map(|&b| {
            let seconds = transmit_time(payload_bytes, b) * cfg.overhead;
            WindowVerdict {
                bandwidth_bps: b,
                seconds,
                fits: seconds <= cfg.window,
                margin: cfg.window - seconds,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetRow {
    pub payload: String,
    pub bytes: f64,
    pub cells: Vec<WindowVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub window: f64,
    pub overhead: f64,
    pub bandwidths: Vec<f64>,
    pub budget_bytes: Vec<f64>,
    pub rows: Vec<BudgetRow>,
}

/// Payload x bandwidth grid.
pub fn budget_report(cfg: &BudgetConfig, payloads: &[NamedPayload]) -> BudgetReport {
    BudgetReport {
        window: cfg.window,
        overhead: cfg.overhead,
        bandwidths: cfg.bandwidths.clone(),
        budget_bytes: cfg.bandwidths.iter().map(|&b| cfg.budget_bytes(b)).collect(),
        rows: payloads
            .iter()
            .map(|p| BudgetRow {
                payload: p.name.clone(),
                bytes: p.bytes,
                cells: fits_window(p.bytes, cfg),
            })
            .collect(),
    }
}

/// Human-readable duration at the granularity a delivery table uses.
pub fn format_duration(seconds: f64) -> String {
    if seconds >= 3600.0 {
        format!("{:.1} h", seconds / 3600.0)
    } else {
        format!("{seconds:.1} s")
    }
}
