//! JSON wire format for the scene graph.
//!
//! Top level: `{version, nodes: [{id, layer, attrs}], edges: [{src, dst,
//! relation, t?}], mesh: {vertices, normals, colors, labels, faces}}`.
//! Positions are `[x, y, z]` float64 meters; quaternions are `[w, x, y, z]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DynamicSceneGraph, Layer, MeshVertexAttr, Node, NodeAttr, NodeId, Relation};
use crate::math::Vec3;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Error, Debug)]
pub enum GraphIoError {
    #[error("malformed graph JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported graph format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("graph JSON is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    id: u64,
    layer: Layer,
    attrs: NodeAttr,
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    src: u64,
    dst: u64,
    relation: Relation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
}

#[derive(Serialize, Deserialize, Default)]
struct MeshJson {
    vertices: Vec<[f64; 3]>,
    normals: Vec<[f64; 3]>,
    colors: Vec<[u8; 3]>,
    labels: Vec<u16>,
    faces: Vec<[u32; 3]>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    version: u32,
    nodes: Vec<NodeJson>,
    edges: Vec<EdgeJson>,
    mesh: MeshJson,
}

impl DynamicSceneGraph {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("graph serialization cannot fail")
    }

    pub fn to_json_string_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("graph serialization cannot fail")
    }

    fn to_json(&self) -> GraphJson {
        let nodes = self
            .nodes()
            .map(|n| NodeJson { id: n.id.id, layer: n.id.layer, attrs: n.attr.clone() })
            .collect();
        let edges = self
            .edges()
            .map(|(_, e)| EdgeJson { src: e.src.id, dst: e.dst.id, relation: e.relation, t: e.t })
            .collect();
        let mesh = MeshJson {
            vertices: self.mesh.vertices.iter().map(|v| [v.position.x, v.position.y, v.position.z]).collect(),
            normals: self.mesh.vertices.iter().map(|v| [v.normal.x, v.normal.y, v.normal.z]).collect(),
            colors: self.mesh.vertices.iter().map(|v| v.color).collect(),
            labels: self.mesh.vertices.iter().map(|v| v.label).collect(),
            faces: self.mesh.faces.clone(),
        };
        GraphJson { version: FORMAT_VERSION, nodes, edges, mesh }
    }

    pub fn from_json_str(s: &str) -> Result<Self, GraphIoError> {
        let parsed: GraphJson = serde_json::from_str(s)?;
        if parsed.version != FORMAT_VERSION {
            return Err(GraphIoError::VersionMismatch {
                found: parsed.version,
                expected: FORMAT_VERSION,
            });
        }
        let nv = parsed.mesh.vertices.len();
        if parsed.mesh.normals.len() != nv
            || parsed.mesh.colors.len() != nv
            || parsed.mesh.labels.len() != nv
        {
            return Err(GraphIoError::Inconsistent(
                "mesh vertex attribute arrays have mismatched lengths".into(),
            ));
        }

        let mut graph = DynamicSceneGraph::new();
        for (i, ((pos, nrm), (color, label))) in parsed
            .mesh
            .vertices
            .iter()
            .zip(&parsed.mesh.normals)
            .zip(parsed.mesh.colors.iter().zip(&parsed.mesh.labels))
            .enumerate()
        {
            graph
                .add_mesh_vertex(MeshVertexAttr {
                    position: Vec3::new(pos[0], pos[1], pos[2]),
                    normal: Vec3::new(nrm[0], nrm[1], nrm[2]),
                    color: *color,
                    label: *label,
                })
                .map_err(|e| GraphIoError::Inconsistent(format!("mesh vertex {i}: {e}")))?;
        }
        for f in &parsed.mesh.faces {
            graph
                .add_face(*f)
                .map_err(|e| GraphIoError::Inconsistent(e.to_string()))?;
        }

        let mut max_node_id = 0u64;
        for n in parsed.nodes {
            if n.attrs.expected_layer() != n.layer {
                return Err(GraphIoError::Inconsistent(format!(
                    "node {} attribute kind does not match layer {:?}",
                    n.id, n.layer
                )));
            }
            let id = NodeId { id: n.id, layer: n.layer };
            if graph.nodes.insert(n.id, Node { id, attr: n.attrs }).is_some() {
                return Err(GraphIoError::Inconsistent(format!("duplicate node id {}", n.id)));
            }
            max_node_id = max_node_id.max(n.id);
        }
        graph.next_node_id = max_node_id;

        for e in parsed.edges {
            let src = graph
                .node(e.src)
                .ok_or_else(|| GraphIoError::Inconsistent(format!("edge source {} missing", e.src)))?
                .id;
            let dst = graph
                .node(e.dst)
                .ok_or_else(|| GraphIoError::Inconsistent(format!("edge target {} missing", e.dst)))?
                .id;
            match e.t {
                Some(t) => graph.add_edge_at(src, dst, e.relation, t),
                None => graph.add_edge(src, dst, e.relation),
            }
            .map_err(|err| GraphIoError::Inconsistent(err.to_string()))?;
        }
        Ok(graph)
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<(), GraphIoError> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self, GraphIoError> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json_str(&s)
    }

    /// Deep structural equality over nodes, edges, and mesh arrays.
    pub fn structurally_equal(&self, other: &Self) -> bool {
        self.to_json_string() == other.to_json_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{PlaceAttr, RoomAttr};
    use crate::math::{Aabb, Pose};

    #[test]
    fn empty_graph_round_trip() {
        let g = DynamicSceneGraph::new();
        let s = g.to_json_string();
        let back = DynamicSceneGraph::from_json_str(&s).unwrap();
        assert!(g.structurally_equal(&back));
    }

    #[test]
    fn small_graph_round_trip() {
        let mut g = DynamicSceneGraph::new();
        let p1 = g
            .add_node(
                Layer::PlacesStructures,
                NodeAttr::Place(PlaceAttr { position: Vec3::new(1.0, 2.0, 0.5), room: None }),
            )
            .unwrap();
        let p2 = g
            .add_node(
                Layer::PlacesStructures,
                NodeAttr::Place(PlaceAttr { position: Vec3::new(2.0, 2.0, 0.5), room: None }),
            )
            .unwrap();
        let r = g
            .add_node(
                Layer::Rooms,
                NodeAttr::Room(RoomAttr {
                    pose: Pose::identity(),
                    aabb: Aabb::new(Vec3::zeros(), Vec3::new(4.0, 4.0, 3.0)).unwrap(),
                    class: 0,
                }),
            )
            .unwrap();
        g.add_edge(p1, p2, Relation::Traversable).unwrap();
        g.add_edge(p1, r, Relation::PlaceInRoom).unwrap();
        g.add_mesh_vertex(MeshVertexAttr {
            position: Vec3::new(0.1, 0.2, 0.3),
            normal: Vec3::new(0.0, 0.0, 1.0),
            color: [10, 20, 30],
            label: 2,
        })
        .unwrap();

        let back = DynamicSceneGraph::from_json_str(&g.to_json_string()).unwrap();
        assert!(g.structurally_equal(&back));
        assert_eq!(back.node_count(), 3);
        assert_eq!(back.edge_count(), 2);
        assert_eq!(back.mesh.vertices.len(), 1);
    }

    #[test]
    fn truncated_stream_is_parse_error() {
        let mut g = DynamicSceneGraph::new();
        g.add_node(
            Layer::PlacesStructures,
            NodeAttr::Place(PlaceAttr { position: Vec3::zeros(), room: None }),
        )
        .unwrap();
        let s = g.to_json_string();
        let truncated = &s[..s.len() / 2];
        assert!(matches!(
            DynamicSceneGraph::from_json_str(truncated),
            Err(GraphIoError::Parse(_))
        ));
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let s = r#"{"version": 99, "nodes": [], "edges": [], "mesh": {"vertices": [], "normals": [], "colors": [], "labels": [], "faces": []}}"#;
        assert!(matches!(
            DynamicSceneGraph::from_json_str(s),
            Err(GraphIoError::VersionMismatch { found: 99, .. })
        ));
    }
}
