//! GraphML 1.0 writer and reader.
//!
//! Every node attribute has a fixed key declaration. Data elements are
//! written in key order and only for attributes the node kind carries.

use std::collections::HashMap;
use std::io;

use quick_xml::events::{BytesDecl, BytesRef, BytesStart, BytesText, Event};
use quick_xml::{Reader, Writer};
use thiserror::Error;

use super::{AggregateAttrs, GraphError, NodeAttrs, NodeKind, ObjectAttrs, SceneGraph, SceneNode};
use crate::fusion::GravityAlignedBox;
use crate::taxonomy::{Category, ClassId, Priority};
use crate::Point3;

const NS: &str = "http://graphml.graphdrawing.org/xmlns";

#[derive(Clone, Copy, PartialEq)]
enum Ty {
    Str,
    Double,
    Long,
}

impl Ty {
    fn as_str(self) -> &'static str {
        match self {
            Ty::Str => "string",
            Ty::Double => "double",
            Ty::Long => "long",
        }
    }
}

const KEYS: &[(&str, Ty)] = &[
    ("kind", Ty::Str),
    ("area_id", Ty::Str),
    ("floor_id", Ty::Long),
    ("class", Ty::Str),
    ("iso_name", Ty::Str),
    ("category", Ty::Str),
    ("priority", Ty::Str),
    ("confidence", Ty::Double),
    ("centroid_x", Ty::Double),
    ("centroid_y", Ty::Double),
    ("centroid_z", Ty::Double),
    ("cx", Ty::Double),
    ("cy", Ty::Double),
    ("cz", Ty::Double),
    ("dx", Ty::Double),
    ("dy", Ty::Double),
    ("dz", Ty::Double),
    ("yaw", Ty::Double),
    ("n_observations", Ty::Long),
    ("point_count", Ty::Long),
    ("source", Ty::Str),
    ("child_count", Ty::Long),
    ("class_histogram", Ty::Str),
];

#[derive(Debug, Error)]
pub enum GraphmlError {
    #[error("xml: {0}")]
    Xml(String),
    #[error("graphml structure: {0}")]
    Structure(String),
    #[error("node `{node}`: bad value `{value}` for `{key}`")]
    BadValue { node: String, key: String, value: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn node_values(n: &SceneNode) -> Vec<(&'static str, String)> {
    let mut v = vec![("kind", n.kind.as_str().to_string()), ("area_id", n.area_id.clone())];
    if let Some(f) = n.floor_id {
        v.push(("floor_id", f.to_string()));
    }
    match &n.attrs {
        NodeAttrs::Object(o) => {
            let b = &o.bbox;
            v.extend([
                ("class", o.class.name().to_string()),
                ("iso_name", o.iso_name.clone()),
                ("category", o.category.as_str().to_string()),
                ("priority", o.priority.as_str().to_string()),
                ("confidence", o.confidence.to_string()),
                ("centroid_x", o.centroid.x.to_string()),
                ("centroid_y", o.centroid.y.to_string()),
                ("centroid_z", o.centroid.z.to_string()),
                ("cx", b.center.x.to_string()),
                ("cy", b.center.y.to_string()),
                ("cz", b.center.z.to_string()),
                ("dx", b.extents[0].to_string()),
                ("dy", b.extents[1].to_string()),
                ("dz", b.extents[2].to_string()),
                ("yaw", b.yaw.to_string()),
                ("n_observations", o.n_observations.to_string()),
                ("point_count", o.point_count.to_string()),
                ("source", o.source.clone()),
            ]);
        }
        NodeAttrs::Aggregate(a) => {
            v.push(("child_count", a.child_count.to_string()));
            v.push(("class_histogram", a.class_histogram.clone()));
        }
    }
    v
}

pub fn export_graphml(graph: &SceneGraph) -> Vec<u8> {
    export_graphml_with_comment(graph, None)
}

/// Same as [`export_graphml`] with an optional `<desc>` on the graph element.
pub fn export_graphml_with_comment(graph: &SceneGraph, desc: Option<&str>) -> Vec<u8> {
    let mut w = Writer::new_with_indent(Vec::new(), b' ', 2);
    write_document(&mut w, graph, desc).expect("writing to a Vec cannot fail");
    let mut out = w.into_inner();
    out.push(b'\n');
    out
}

fn write_document(w: &mut Writer<Vec<u8>>, graph: &SceneGraph, desc: Option<&str>) -> io::Result<()> {
    w.write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))?;
    w.create_element("graphml")
        .with_attribute(("xmlns", NS))
        .write_inner_content(|w| {
            for &(name, ty) in KEYS {
                w.create_element("key")
                    .with_attributes([
                        ("id", name),
                        ("for", "node"),
                        ("attr.name", name),
                        ("attr.type", ty.as_str()),
                    ])
                    .write_empty()?;
            }
            w.create_element("graph")
                .with_attributes([("id", "G"), ("edgedefault", "directed")])
                .write_inner_content(|w| {
                    if let Some(d) = desc {
                        w.create_element("desc").write_text_content(BytesText::new(d))?;
                    }
                    for n in &graph.nodes {
                        w.create_element("node")
                            .with_attribute(("id", n.node_id.as_str()))
                            .write_inner_content(|w| {
                                for (key, value) in node_values(n) {
                                    w.create_element("data")
                                        .with_attribute(("key", key))
                                        .write_text_content(BytesText::new(&value))?;
                                }
                                Ok(())
                            })?;
                    }
                    for &(p, c) in &graph.edges {
                        w.create_element("edge")
                            .with_attributes([
                                ("source", graph.nodes[p].node_id.as_str()),
                                ("target", graph.nodes[c].node_id.as_str()),
                            ])
                            .write_empty()?;
                    }
                    Ok(())
                })?;
            Ok(())
        })?;
    Ok(())
}

fn xml_err(e: impl std::fmt::Display) -> GraphmlError {
    GraphmlError::Xml(e.to_string())
}

fn attr(e: &BytesStart, name: &str) -> Result<Option<String>, GraphmlError> {
    for a in e.attributes() {
        let a = a.map_err(xml_err)?;
        if a.key.as_ref() == name {
            let v = a.normalized_value(quick_xml::XmlVersion::Implicit1_0).map_err(xml_err)?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn resolve_ref(r: &BytesRef) -> Result<String, GraphmlError> {
    if let Some(c) = r.resolve_char_ref().map_err(xml_err)? {
        return Ok(c.to_string());
    }
    quick_xml::escape::resolve_predefined_entity(r)
        .map(str::to_string)
        .ok_or_else(|| GraphmlError::Xml(format!("unknown entity `&{};`", &**r)))
}

struct RawNode {
    id: String,
    data: HashMap<String, String>,
}

/// Parses a document produced by [`export_graphml`] (or any GraphML using
/// the same keys) back into a validated graph.
pub fn parse_graphml(bytes: &[u8]) -> Result<SceneGraph, GraphmlError> {
    let text = std::str::from_utf8(bytes).map_err(xml_err)?;
    let mut reader = Reader::from_str(text);
    let mut nodes: Vec<RawNode> = Vec::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut graphs = 0usize;
    let mut current: Option<RawNode> = None;
    let mut data_key: Option<String> = None;
    let mut buf = String::new();
    let mut depth = 0usize;

    loop {
        let ev = reader.read_event().map_err(xml_err)?;
        match ev {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let empty = matches!(ev, Event::Empty(_));
                if !empty {
                    depth += 1;
                }
                match e.local_name().as_ref() {
                    "graph" => {
                        graphs += 1;
                        if attr(e, "edgedefault")?.as_deref() != Some("directed") {
                            return Err(GraphmlError::Structure("graph must be directed".into()));
                        }
                    }
                    "node" => {
                        let id = attr(e, "id")?.ok_or_else(|| GraphmlError::Structure("node without id".into()))?;
                        let n = RawNode { id, data: HashMap::new() };
                        if empty {
                            nodes.push(n);
                        } else {
                            current = Some(n);
                        }
                    }
                    "edge" => {
                        let s = attr(e, "source")?;
                        let t = attr(e, "target")?;
                        match (s, t) {
                            (Some(s), Some(t)) => edges.push((s, t)),
                            _ => return Err(GraphmlError::Structure("edge without endpoints".into())),
                        }
                    }
                    "data" if current.is_some() => {
                        let key = attr(e, "key")?.ok_or_else(|| GraphmlError::Structure("data without key".into()))?;
                        if empty {
                            current.as_mut().unwrap().data.insert(key, String::new());
                        } else {
                            data_key = Some(key);
                            buf.clear();
                        }
                    }
                    _ => {}
                }
            }
            Event::Text(t) if data_key.is_some() => buf.push_str(&t.xml10_content()),
            Event::CData(t) if data_key.is_some() => buf.push_str(&t),
            Event::GeneralRef(r) if data_key.is_some() => buf.push_str(&resolve_ref(&r)?),
            Event::End(e) => {
                depth -= 1;
                match e.local_name().as_ref() {
                    "data" => {
                        if let (Some(k), Some(n)) = (data_key.take(), current.as_mut()) {
                            n.data.insert(k, std::mem::take(&mut buf));
                        }
                    }
                    "node" => nodes.extend(current.take()),
                    _ => {}
                }
            }
            Event::Eof if depth == 0 => break,
            Event::Eof => return Err(GraphmlError::Xml("unexpected end of document".into())),
            _ => {}
        }
    }
    if graphs != 1 {
        return Err(GraphmlError::Structure(format!("expected one graph element, found {graphs}")));
    }

    let mut index = HashMap::new();
    let mut out = SceneGraph::default();
    for raw in nodes {
        index.insert(raw.id.clone(), out.nodes.len());
        out.nodes.push(to_node(raw)?);
    }
    for (s, t) in edges {
        let lookup = |id: &str| index.get(id).copied().ok_or_else(|| GraphError::DanglingEdge(id.to_string()));
        out.edges.push((lookup(&s)?, lookup(&t)?));
    }
    out.validate()?;
    Ok(out)
}

fn to_node(raw: RawNode) -> Result<SceneNode, GraphmlError> {
    let node = raw.id.clone();
    let get = |key: &str| -> Result<&str, GraphmlError> {
        raw.data
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| GraphmlError::Structure(format!("node `{node}` lacks `{key}`")))
    };
    let bad = |key: &str, value: &str| GraphmlError::BadValue {
        node: node.clone(),
        key: key.into(),
        value: value.into(),
    };
    let f64_of = |key: &str| -> Result<f64, GraphmlError> {
        let v = get(key)?;
        v.parse::<f64>().map_err(|_| bad(key, v))
    };
    let u64_of = |key: &str| -> Result<u64, GraphmlError> {
        let v = get(key)?;
        v.parse::<u64>().map_err(|_| bad(key, v))
    };

    let kind_token = get("kind")?;
    let kind = NodeKind::from_token(kind_token).ok_or_else(|| bad("kind", kind_token))?;
    let floor_id = match raw.data.get("floor_id") {
        Some(v) => Some(v.parse::<u32>().map_err(|_| bad("floor_id", v))?),
        None => None,
    };
    let attrs = match kind {
        NodeKind::Building | NodeKind::Floor => NodeAttrs::Aggregate(AggregateAttrs {
            child_count: u64_of("child_count")?,
            class_histogram: get("class_histogram")?.to_string(),
        }),
        NodeKind::Surface | NodeKind::Instance => {
            let class_token = get("class")?;
            let category_token = get("category")?;
            let priority_token = get("priority")?;
            NodeAttrs::Object(ObjectAttrs {
                class: ClassId::from_name(class_token).ok_or_else(|| bad("class", class_token))?,
                iso_name: get("iso_name")?.to_string(),
                category: Category::from_token(category_token).ok_or_else(|| bad("category", category_token))?,
                priority: Priority::from_token(priority_token).ok_or_else(|| bad("priority", priority_token))?,
                confidence: f64_of("confidence")?,
                centroid: Point3::new(f64_of("centroid_x")?, f64_of("centroid_y")?, f64_of("centroid_z")?),
                bbox: GravityAlignedBox {
                    center: Point3::new(f64_of("cx")?, f64_of("cy")?, f64_of("cz")?),
                    extents: [f64_of("dx")?, f64_of("dy")?, f64_of("dz")?],
                    yaw: f64_of("yaw")?,
                },
                n_observations: u64_of("n_observations")?,
                point_count: u64_of("point_count")?,
                source: get("source")?.to_string(),
            })
        }
    };
    Ok(SceneNode {
        node_id: raw.id,
        kind,
        area_id: get("area_id")?.to_string(),
        floor_id,
        attrs,
    })
}
