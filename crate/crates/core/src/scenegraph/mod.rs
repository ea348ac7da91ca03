//! Building → Floor → Surfaces → Instances scene graphs.

mod build;
mod graphml;
mod payload;

pub use build::{assign_floor, build, build_area, BuildOutcome, FloorModel};
pub use graphml::{export_graphml, export_graphml_with_comment, parse_graphml, GraphmlError};
pub use payload::{payload_stats, reduction_pct, NodeBreakdown, PayloadReport, PayloadView};

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::fusion::GravityAlignedBox;
use crate::taxonomy::{Category, ClassId, Priority, RoleFilterSpec};
use crate::Point3;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("edge references unknown node `{0}`")]
    DanglingEdge(String),
    #[error("node `{0}` has {1} parents")]
    ParentCount(String, usize),
    #[error("node `{child}` ({child_kind}) cannot hang under `{parent}` ({parent_kind})")]
    BadParent {
        child: String,
        child_kind: &'static str,
        parent: String,
        parent_kind: &'static str,
    },
    #[error("area `{0}` has {1} building nodes")]
    BuildingCount(String, usize),
    #[error("node `{0}` is missing attribute `{1}`")]
    MissingAttribute(String, &'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Building,
    Floor,
    Surface,
    Instance,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Building => "building",
            NodeKind::Floor => "floor",
            NodeKind::Surface => "surface",
            NodeKind::Instance => "instance",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        Some(match s {
            "building" => NodeKind::Building,
            "floor" => NodeKind::Floor,
            "surface" => NodeKind::Surface,
            "instance" => NodeKind::Instance,
            _ => return None,
        })
    }

    fn parent_kind(self) -> Option<NodeKind> {
        match self {
            NodeKind::Building => None,
            NodeKind::Floor => Some(NodeKind::Building),
            NodeKind::Surface | NodeKind::Instance => Some(NodeKind::Floor),
        }
    }
}

/// Attributes of a surface or instance node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectAttrs {
    pub class: ClassId,
    pub iso_name: String,
    pub category: Category,
    pub priority: Priority,
    pub confidence: f64,
    pub centroid: Point3,
    pub bbox: GravityAlignedBox,
    pub n_observations: u64,
    pub point_count: u64,
    pub source: String,
}

/// Attributes of a building or floor node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct AggregateAttrs {
    pub child_count: u64,
    /// `class:count` pairs joined by `;`, in class-id order.
    pub class_histogram: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum NodeAttrs {
    Aggregate(AggregateAttrs),
    Object(ObjectAttrs),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneNode {
    pub node_id: String,
    pub kind: NodeKind,
    pub area_id: String,
    pub floor_id: Option<u32>,
    pub attrs: NodeAttrs,
}

impl SceneNode {
    pub fn object(&self) -> Option<&ObjectAttrs> {
        match &self.attrs {
            NodeAttrs::Object(o) => Some(o),
            NodeAttrs::Aggregate(_) => None,
        }
    }

    pub fn class(&self) -> Option<ClassId> {
        self.object().map(|o| o.class)
    }
}

/// A forest with one Building root per area; edges point parent → child
/// and are stored as node indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SceneGraph {
    pub nodes: Vec<SceneNode>,
    pub edges: Vec<(usize, usize)>,
}

impl SceneGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn find(&self, node_id: &str) -> Option<&SceneNode> {
        self.nodes.iter().find(|n| n.node_id == node_id)
    }

    /// Checks the hierarchy: unique ids, one Building per area, and every
    /// other node has exactly one parent of the right kind in the same area.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if index.insert(&n.node_id, i).is_some() {
                return Err(GraphError::DuplicateNode(n.node_id.clone()));
            }
            let has_object = matches!(n.attrs, NodeAttrs::Object(_));
            let wants_object = matches!(n.kind, NodeKind::Surface | NodeKind::Instance);
            if has_object != wants_object {
                return Err(GraphError::MissingAttribute(n.node_id.clone(), "class"));
            }
        }
        let mut parents = vec![Vec::new(); self.nodes.len()];
        for &(p, c) in &self.edges {
            for i in [p, c] {
                if i >= self.nodes.len() {
                    return Err(GraphError::DanglingEdge(format!("#{i}")));
                }
            }
            parents[c].push(p);
        }
        let mut buildings: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.kind == NodeKind::Building {
                *buildings.entry(&n.area_id).or_default() += 1;
            }
            let expected = usize::from(n.kind != NodeKind::Building);
            if parents[i].len() != expected {
                return Err(GraphError::ParentCount(n.node_id.clone(), parents[i].len()));
            }
            if let (Some(want), Some(&p)) = (n.kind.parent_kind(), parents[i].first()) {
                let parent = &self.nodes[p];
                if parent.kind != want || parent.area_id != n.area_id {
                    return Err(GraphError::BadParent {
                        child: n.node_id.clone(),
                        child_kind: n.kind.as_str(),
                        parent: parent.node_id.clone(),
                        parent_kind: parent.kind.as_str(),
                    });
                }
            }
        }
        for n in &self.nodes {
            match buildings.get(n.area_id.as_str()) {
                Some(1) => {}
                Some(&k) => return Err(GraphError::BuildingCount(n.area_id.clone(), k)),
                None => return Err(GraphError::BuildingCount(n.area_id.clone(), 0)),
            }
        }
        Ok(())
    }

    /// Recomputes child counts and histograms on Building and Floor nodes.
    pub(crate) fn refresh_aggregates(&mut self) {
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for &(p, c) in &self.edges {
            children[p].push(c);
        }
        // floors first so buildings can read their object counts
        let mut floor_hist: Vec<BTreeMap<ClassId, u64>> = vec![BTreeMap::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if n.kind == NodeKind::Floor {
                for &c in &children[i] {
                    if let Some(class) = self.nodes[c].class() {
                        *floor_hist[i].entry(class).or_default() += 1;
                    }
                }
            }
        }
        for i in 0..self.nodes.len() {
            let (count, hist) = match self.nodes[i].kind {
                NodeKind::Floor => (children[i].len() as u64, floor_hist[i].clone()),
                NodeKind::Building => {
                    let mut h = BTreeMap::new();
                    for &f in &children[i] {
                        for (&c, &k) in &floor_hist[f] {
                            *h.entry(c).or_default() += k;
                        }
                    }
                    (children[i].len() as u64, h)
                }
                _ => continue,
            };
            self.nodes[i].attrs = NodeAttrs::Aggregate(AggregateAttrs {
                child_count: count,
                class_histogram: format_histogram(&hist),
            });
        }
    }
}

fn format_histogram(h: &BTreeMap<ClassId, u64>) -> String {
    h.iter()
        .map(|(c, k)| format!("{}:{k}", c.name()))
        .collect::<Vec<_>>()
        .join(";")
}

/// Role view: Building and Floor nodes always stay, Instance nodes stay when
/// the role retains their class, Surface nodes when structural context is on.
pub fn filter_role(graph: &SceneGraph, spec: &RoleFilterSpec) -> SceneGraph {
    let keep: Vec<bool> = graph
        .nodes
        .iter()
        .map(|n| match n.kind {
            NodeKind::Building | NodeKind::Floor => true,
            NodeKind::Surface => spec.keep_structural_context,
            NodeKind::Instance => n.class().is_some_and(|c| spec.retains(c)),
        })
        .collect();
    let mut remap = vec![usize::MAX; graph.nodes.len()];
    let mut nodes = Vec::new();
    for (i, n) in graph.nodes.iter().enumerate() {
        if keep[i] {
            remap[i] = nodes.len();
            nodes.push(n.clone());
        }
    }
    let edges = graph
        .edges
        .iter()
        .filter(|&&(p, c)| keep[p] && keep[c])
        .map(|&(p, c)| (remap[p], remap[c]))
        .collect();
    let mut out = SceneGraph { nodes, edges };
    out.refresh_aggregates();
    out
}
