use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{NodeAttrs, NodeKind, ObjectAttrs, SceneGraph, SceneNode};
use crate::fusion::FusedInstance;
use crate::taxonomy::Taxonomy;

/// How instance elevations map to floors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FloorModel {
    #[default]
    SingleFloor,
    /// Ascending floor base elevations, meters.
    Elevations(Vec<f64>),
}

impl FloorModel {
    pub fn validate(&self) -> Result<(), String> {
        if let FloorModel::Elevations(bases) = self {
            if bases.iter().any(|b| !b.is_finite()) || bases.windows(2).any(|w| w[0] >= w[1]) {
                return Err("floor elevations must be finite and strictly ascending".into());
            }
        }
        Ok(())
    }
}

/// Floor whose half-open band `[base, next)` holds `z`; below the lowest
/// base clamps to floor 0.
pub fn assign_floor(z: f64, model: &FloorModel) -> u32 {
    match model {
        FloorModel::SingleFloor => 0,
        FloorModel::Elevations(bases) => bases
            .iter()
            .rposition(|&b| b <= z)
            .map_or(0, |i| i as u32),
    }
}

#[derive(Debug, Clone, Default)]
pub struct BuildOutcome {
    pub graph: SceneGraph,
    /// One line per rejected instance.
    pub rejected: Vec<String>,
}

fn object_attrs(inst: &FusedInstance, tax: &Taxonomy) -> ObjectAttrs {
    let sources: BTreeSet<_> = inst.observations.iter().map(|o| o.source).collect();
    let source = sources
        .iter()
        .map(|s| s.as_str())
        .collect::<Vec<_>>()
        .join("+");
    ObjectAttrs {
        class: inst.class,
        iso_name: tax.iso_name(inst.class).to_string(),
        category: inst.class.category(),
        priority: inst.class.priority(),
        confidence: inst.confidence,
        centroid: inst.centroid,
        bbox: inst.bbox,
        n_observations: inst.observations.len() as u64,
        point_count: inst.point_count as u64,
        source,
    }
}

fn is_finite(inst: &FusedInstance) -> bool {
    let b = &inst.bbox;
    inst.centroid.iter().all(|v| v.is_finite())
        && b.center.iter().all(|v| v.is_finite())
        && b.extents.iter().all(|v| v.is_finite())
        && b.yaw.is_finite()
        && inst.confidence.is_finite()
}

fn add_area(
    graph: &mut SceneGraph,
    rejected: &mut Vec<String>,
    area_id: &str,
    instances: &[FusedInstance],
    floors: &FloorModel,
    tax: &Taxonomy,
) {
    let building = graph.nodes.len();
    graph.nodes.push(SceneNode {
        node_id: area_id.to_string(),
        kind: NodeKind::Building,
        area_id: area_id.to_string(),
        floor_id: None,
        attrs: NodeAttrs::Aggregate(Default::default()),
    });

    let mut sorted: Vec<&FusedInstance> = instances.iter().collect();
    sorted.sort_by_key(|i| i.instance_id);
    let mut per_floor: BTreeMap<u32, Vec<&FusedInstance>> = BTreeMap::new();
    for inst in sorted {
        if !is_finite(inst) {
            rejected.push(format!("{}: non-finite geometry", inst.token()));
            continue;
        }
        per_floor
            .entry(assign_floor(inst.centroid.z, floors))
            .or_default()
            .push(inst);
    }

    for (floor, members) in per_floor {
        let floor_idx = graph.nodes.len();
        let floor_id = format!("{area_id}/f{floor}");
        graph.nodes.push(SceneNode {
            node_id: floor_id.clone(),
            kind: NodeKind::Floor,
            area_id: area_id.to_string(),
            floor_id: Some(floor),
            attrs: NodeAttrs::Aggregate(Default::default()),
        });
        graph.edges.push((building, floor_idx));
        // surfaces before instances
        let (surfaces, objects): (Vec<_>, Vec<_>) =
            members.into_iter().partition(|i| i.class.is_structural_surface());
        for (kind, group) in [(NodeKind::Surface, surfaces), (NodeKind::Instance, objects)] {
            let mut seq: BTreeMap<_, u32> = BTreeMap::new();
            for inst in group {
                let n = seq.entry(inst.class).or_default();
                let node_id = format!("{floor_id}/{}/{}/{}", kind.as_str(), inst.class.name(), n);
                *n += 1;
                let idx = graph.nodes.len();
                graph.nodes.push(SceneNode {
                    node_id,
                    kind,
                    area_id: area_id.to_string(),
                    floor_id: Some(floor),
                    attrs: NodeAttrs::Object(object_attrs(inst, tax)),
                });
                graph.edges.push((floor_idx, idx));
            }
        }
    }
}

/// One Building per area, in area order. Surfaces are the structural-surface
/// instances; everything else becomes an Instance node.
pub fn build(
    areas: &BTreeMap<String, Vec<FusedInstance>>,
    floors: &FloorModel,
    tax: &Taxonomy,
) -> BuildOutcome {
    let mut out = BuildOutcome::default();
    for (area_id, instances) in areas {
        add_area(&mut out.graph, &mut out.rejected, area_id, instances, floors, tax);
    }
    out.graph.refresh_aggregates();
    out
}

pub fn build_area(area_id: &str, instances: &[FusedInstance], floors: &FloorModel, tax: &Taxonomy) -> BuildOutcome {
    let mut out = BuildOutcome::default();
    add_area(&mut out.graph, &mut out.rejected, area_id, instances, floors, tax);
    out.graph.refresh_aggregates();
    out
}
