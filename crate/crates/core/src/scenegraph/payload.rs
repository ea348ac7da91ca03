use serde::Serialize;

use super::{export_graphml, NodeKind, SceneGraph};
use crate::taxonomy::Role;

/// `100 * (1 - view / full)`; zero when `full` is zero.
pub fn reduction_pct(full: usize, view: usize) -> f64 {
    if full == 0 {
        0.0
    } else {
        100.0 * (1.0 - view as f64 / full as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct NodeBreakdown {
    pub building: usize,
    pub floor: usize,
    pub surface: usize,
    pub instance: usize,
}

impl NodeBreakdown {
    pub fn of(graph: &SceneGraph) -> Self {
        Self {
            building: graph.count_kind(NodeKind::Building),
            floor: graph.count_kind(NodeKind::Floor),
            surface: graph.count_kind(NodeKind::Surface),
            instance: graph.count_kind(NodeKind::Instance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayloadView {
    pub role: Role,
    pub bytes: usize,
    pub nodes: usize,
    pub breakdown: NodeBreakdown,
    pub node_reduction_pct: f64,
    pub byte_reduction_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayloadReport {
    pub full_bytes: usize,
    pub full_nodes: usize,
    pub views: Vec<PayloadView>,
}

/// Sizes each view as its exported GraphML document and compares it with
/// the full graph. Node counts include every kind.
pub fn payload_stats(full: &SceneGraph, views: &[(Role, &SceneGraph)]) -> PayloadReport {
    let full_bytes = export_graphml(full).len();
    let full_nodes = full.node_count();
    let views = views
        .iter()
        .map(|&(role, g)| {
            let bytes = export_graphml(g).len();
            PayloadView {
                role,
                bytes,
                nodes: g.node_count(),
                breakdown: NodeBreakdown::of(g),
                node_reduction_pct: reduction_pct(full_nodes, g.node_count()),
                byte_reduction_pct: reduction_pct(full_bytes, bytes),
            }
        })
        .collect();
    PayloadReport {
        full_bytes,
        full_nodes,
        views,
    }
}
