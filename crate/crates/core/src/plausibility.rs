//! Confidence gate plus per-subarea top-K cardinality caps.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::fusion::FusedInstance;
use crate::taxonomy::{Cap, CapTable, ClassId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlausibilityConfig {
    pub tau: f64,
}

impl Default for PlausibilityConfig {
    fn default() -> Self {
        Self { tau: 0.70 }
    }
}

impl PlausibilityConfig {
    pub fn validate(&self) -> Result<(), String> {
        if (0.0..=1.0).contains(&self.tau) {
            Ok(())
        } else {
            Err(format!("tau must lie in [0, 1], got {}", self.tau))
        }
    }
}

/// Retained instances, in input order. Within each (area, class) group,
/// instances below `tau` are dropped and the first K by (confidence desc,
/// instance id asc) are kept; uncapped classes only see the gate.
pub fn apply(instances: &[FusedInstance], cfg: &PlausibilityConfig, caps: &CapTable) -> Vec<FusedInstance> {
    let mut groups: BTreeMap<(&str, ClassId), Vec<usize>> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        if inst.confidence >= cfg.tau {
            groups.entry((inst.area_id.as_str(), inst.class)).or_default().push(i);
        }
    }
    let mut keep = BTreeSet::new();
    for ((_, class), mut idx) in groups {
        if let Cap::Limited(k) = caps.per_subarea(class) {
            idx.sort_by(|&a, &b| {
                instances[b]
                    .confidence
                    .total_cmp(&instances[a].confidence)
                    .then(instances[a].instance_id.cmp(&instances[b].instance_id))
            });
            idx.truncate(k as usize);
        }
        keep.extend(idx);
    }
    keep.into_iter().map(|i| instances[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionRow {
    pub raw: usize,
    pub filtered: usize,
    /// `1 - filtered / raw` in percent; absent when `raw` is zero.
    pub reduction_pct: Option<f64>,
}

impl ReductionRow {
    pub fn new(raw: usize, filtered: usize) -> Self {
        Self {
            raw,
            filtered,
            reduction_pct: (raw > 0).then(|| 100.0 * (1.0 - filtered as f64 / raw as f64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub tau: f64,
    pub per_class: BTreeMap<ClassId, ReductionRow>,
    pub overall: ReductionRow,
}

pub fn report(
    raw: &BTreeMap<ClassId, usize>,
    filtered: &BTreeMap<ClassId, usize>,
    tau: f64,
) -> ReductionReport {
    let classes: BTreeSet<ClassId> = raw.keys().chain(filtered.keys()).copied().collect();
    let per_class: BTreeMap<_, _> = classes
        .into_iter()
        .map(|c| {
            let r = raw.get(&c).copied().unwrap_or(0);
            let f = filtered.get(&c).copied().unwrap_or(0);
            (c, ReductionRow::new(r, f))
        })
        .collect();
    let overall = ReductionRow::new(
        per_class.values().map(|r| r.raw).sum(),
        per_class.values().map(|r| r.filtered).sum(),
    );
    ReductionReport {
        tau,
        per_class,
        overall,
    }
}
