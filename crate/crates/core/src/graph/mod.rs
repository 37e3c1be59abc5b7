//! Layered directed scene graph: node/edge model, legality checking,
//! validation, and the JSON wire format.
//!
//! Layers: 1 mesh (indexed vertex/face arrays), 2 objects + agents,
//! 3 places + structures, 4 rooms, 5 building. Mutation requires exclusive
//! access; all read queries take `&self` and the graph is `Send + Sync`.

mod attrs;
mod io;
mod validate;

pub use attrs::*;
pub use io::GraphIoError;
pub use validate::{ValidationReport, Violation};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::math::Vec3;

/// Containment slack for bounding-box checks: one voxel of the default grid,
/// since clustering and box fitting are voxel-quantized.
pub const EPS_BOX: f64 = 0.05;

#[derive(Error, Debug)]
pub enum GraphError {
    #[error("attribute kind `{kind}` is not legal in layer {layer:?}")]
    LayerMismatch { kind: &'static str, layer: Layer },
    #[error("nodes cannot be created in the mesh layer; use add_mesh_vertex")]
    MeshLayerNode,
    #[error("node {0} not found")]
    NodeNotFound(u64),
    #[error("relation {relation:?} is not legal from layer {src:?} to layer {dst:?}")]
    IllegalRelation { relation: Relation, src: Layer, dst: Layer },
    #[error("relation {0:?} is represented structurally and cannot be added as an edge")]
    StructuralRelation(Relation),
    #[error("agent-at-place edges require a timestamp")]
    MissingTimestamp,
    #[error("invalid attribute: {0}")]
    InvalidAttribute(String),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub id: NodeId,
    pub attr: NodeAttr,
}

/// The layered directed scene graph.
///
/// Node and edge ids are unique and never reused. All maps are ordered so
/// iteration and serialization are deterministic.
#[derive(Clone, Debug, Default)]
pub struct DynamicSceneGraph {
    next_node_id: u64,
    next_edge_id: u64,
    nodes: BTreeMap<u64, Node>,
    edges: BTreeMap<EdgeId, Edge>,
    pub mesh: Mesh,
}

impl DynamicSceneGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Whether `relation` is legal from `src` to `dst` layers.
    ///
    /// Legality table:
    /// - traversable: place -> place
    /// - proximal: object -> place
    /// - place-in-room: place -> room
    /// - room-adjacent: room -> room
    /// - room-in-building: room -> building
    /// - agent-at-place: agent -> place (timestamped)
    ///
    /// Mesh-face membership and object-vertex membership are structural and
    /// never legal as edges.
    fn relation_legal(&self, relation: Relation, src: &Node, dst: &Node) -> bool {
        use Relation::*;
        match relation {
            MeshFaceMembership | ObjectContainsVertices => false,
            Traversable => {
                matches!(src.attr, NodeAttr::Place(_)) && matches!(dst.attr, NodeAttr::Place(_))
            }
            Proximal => {
                matches!(src.attr, NodeAttr::Object(_)) && matches!(dst.attr, NodeAttr::Place(_))
            }
            PlaceInRoom => {
                matches!(src.attr, NodeAttr::Place(_)) && matches!(dst.attr, NodeAttr::Room(_))
            }
            RoomAdjacent => {
                matches!(src.attr, NodeAttr::Room(_)) && matches!(dst.attr, NodeAttr::Room(_))
            }
            RoomInBuilding => {
                matches!(src.attr, NodeAttr::Room(_)) && matches!(dst.attr, NodeAttr::Building(_))
            }
            AgentAtPlace => {
                matches!(src.attr, NodeAttr::Agent(_)) && matches!(dst.attr, NodeAttr::Place(_))
            }
        }
    }

    fn check_attr(attr: &NodeAttr) -> Result<(), GraphError> {
        match attr {
            NodeAttr::Agent(a) => {
                let mono = |states: &[TimedPose]| states.windows(2).all(|w| w[1].t > w[0].t);
                if !mono(&a.states) || !mono(&a.raw_states) {
                    return Err(GraphError::InvalidAttribute(
                        "agent timestamps must be strictly increasing".into(),
                    ));
                }
            }
            NodeAttr::Object(o) => {
                if !(o.aabb.min.x <= o.aabb.max.x
                    && o.aabb.min.y <= o.aabb.max.y
                    && o.aabb.min.z <= o.aabb.max.z)
                {
                    return Err(GraphError::InvalidAttribute("object aabb min > max".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn add_node(&mut self, layer: Layer, attr: NodeAttr) -> Result<NodeId, GraphError> {
        if layer == Layer::Mesh {
            return Err(GraphError::MeshLayerNode);
        }
        if attr.expected_layer() != layer {
            return Err(GraphError::LayerMismatch { kind: attr.kind_name(), layer });
        }
        Self::check_attr(&attr)?;
        self.next_node_id += 1;
        let id = NodeId { id: self.next_node_id, layer };
        self.nodes.insert(id.id, Node { id, attr });
        Ok(id)
    }

    /// Append one Layer-1 mesh vertex, returning its index.
    pub fn add_mesh_vertex(&mut self, v: MeshVertexAttr) -> Result<u32, GraphError> {
        if (v.normal.norm() - 1.0).abs() > 1e-6 {
            return Err(GraphError::InvalidAttribute(format!(
                "mesh vertex normal must be unit length, got |n| = {}",
                v.normal.norm()
            )));
        }
        if !v.position.iter().all(|c| c.is_finite()) {
            return Err(GraphError::InvalidAttribute("non-finite vertex position".into()));
        }
        self.mesh.vertices.push(v);
        Ok((self.mesh.vertices.len() - 1) as u32)
    }

    pub fn add_face(&mut self, face: [u32; 3]) -> Result<(), GraphError> {
        let n = self.mesh.vertices.len() as u32;
        if face.iter().any(|&i| i >= n) {
            return Err(GraphError::InvalidAttribute(format!(
                "face index out of range (have {n} vertices)"
            )));
        }
        self.mesh.faces.push(face);
        Ok(())
    }

    pub fn add_edge(
        &mut self,
        src: NodeId,
        dst: NodeId,
        relation: Relation,
    ) -> Result<EdgeId, GraphError> {
        self.add_edge_impl(src, dst, relation, None)
    }

    /// Timestamped edge; required form for agent-at-place relations.
    pub fn add_edge_at(
        &mut self,
        src: NodeId,
        dst: NodeId,
        relation: Relation,
        t: f64,
    ) -> Result<EdgeId, GraphError> {
        self.add_edge_impl(src, dst, relation, Some(t))
    }

    fn add_edge_impl(
        &mut self,
        src: NodeId,
        dst: NodeId,
        relation: Relation,
        t: Option<f64>,
    ) -> Result<EdgeId, GraphError> {
        if matches!(relation, Relation::MeshFaceMembership | Relation::ObjectContainsVertices) {
            return Err(GraphError::StructuralRelation(relation));
        }
        let src_node = self.nodes.get(&src.id).ok_or(GraphError::NodeNotFound(src.id))?;
        let dst_node = self.nodes.get(&dst.id).ok_or(GraphError::NodeNotFound(dst.id))?;
        if !self.relation_legal(relation, src_node, dst_node) {
            return Err(GraphError::IllegalRelation {
                relation,
                src: src_node.id.layer,
                dst: dst_node.id.layer,
            });
        }
        if relation == Relation::AgentAtPlace && t.is_none() {
            return Err(GraphError::MissingTimestamp);
        }
        let src = src_node.id;
        let dst = dst_node.id;
        self.next_edge_id += 1;
        let eid = self.next_edge_id;
        self.edges.insert(eid, Edge { src, dst, relation, t });
        Ok(eid)
    }

    pub fn node(&self, id: u64) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&EdgeId, &Edge)> {
        self.edges.iter()
    }

    pub fn nodes_in_layer(&self, layer: Layer) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(move |n| n.id.layer == layer)
    }

    pub fn places(&self) -> impl Iterator<Item = (&Node, &PlaceAttr)> {
        self.nodes.values().filter_map(|n| match &n.attr {
            NodeAttr::Place(p) => Some((n, p)),
            _ => None,
        })
    }

    pub fn objects(&self) -> impl Iterator<Item = (&Node, &ObjectAttr)> {
        self.nodes.values().filter_map(|n| match &n.attr {
            NodeAttr::Object(o) => Some((n, o)),
            _ => None,
        })
    }

    pub fn agents(&self) -> impl Iterator<Item = (&Node, &AgentAttr)> {
        self.nodes.values().filter_map(|n| match &n.attr {
            NodeAttr::Agent(a) => Some((n, a)),
            _ => None,
        })
    }

    pub fn rooms(&self) -> impl Iterator<Item = (&Node, &RoomAttr)> {
        self.nodes.values().filter_map(|n| match &n.attr {
            NodeAttr::Room(r) => Some((n, r)),
            _ => None,
        })
    }

    pub fn structures(&self) -> impl Iterator<Item = (&Node, &StructureAttr)> {
        self.nodes.values().filter_map(|n| match &n.attr {
            NodeAttr::Structure(s) => Some((n, s)),
            _ => None,
        })
    }

    pub fn building(&self) -> Option<(&Node, &BuildingAttr)> {
        self.nodes.values().find_map(|n| match &n.attr {
            NodeAttr::Building(b) => Some((n, b)),
            _ => None,
        })
    }

    /// The place an object is proximal to, if any.
    pub fn parent_place(&self, object: u64) -> Option<NodeId> {
        self.edges
            .values()
            .find(|e| e.relation == Relation::Proximal && e.src.id == object)
            .map(|e| e.dst)
    }

    /// The room a place belongs to (via its place-in-room edge), if any.
    pub fn place_room(&self, place: u64) -> Option<NodeId> {
        self.edges
            .values()
            .find(|e| e.relation == Relation::PlaceInRoom && e.src.id == place)
            .map(|e| e.dst)
    }

    /// Traversable neighbors of a place (edges treated as bidirectional).
    pub fn traversable_neighbors(&self, place: u64) -> Vec<u64> {
        let mut out = Vec::new();
        for e in self.edges.values() {
            if e.relation != Relation::Traversable {
                continue;
            }
            if e.src.id == place {
                out.push(e.dst.id);
            } else if e.dst.id == place {
                out.push(e.src.id);
            }
        }
        out
    }

    /// Remove a set of nodes and every edge touching them. Mesh vertices
    /// listed in removed objects' member lists are dropped and faces remapped.
    pub(crate) fn remove_nodes(&mut self, ids: &[u64]) {
        use std::collections::BTreeSet;
        let dead: BTreeSet<u64> = ids.iter().copied().collect();

        // Collect mesh vertices owned by removed objects.
        let mut dead_vertices: BTreeSet<u32> = BTreeSet::new();
        for id in &dead {
            if let Some(node) = self.nodes.get(id) {
                if let NodeAttr::Object(o) = &node.attr {
                    dead_vertices.extend(o.vertices.iter().copied());
                }
            }
        }

        self.nodes.retain(|id, _| !dead.contains(id));
        self.edges.retain(|_, e| !dead.contains(&e.src.id) && !dead.contains(&e.dst.id));

        // Clear room back-references on surviving places.
        for node in self.nodes.values_mut() {
            if let NodeAttr::Place(p) = &mut node.attr {
                if let Some(r) = p.room {
                    if dead.contains(&r) {
                        p.room = None;
                    }
                }
            }
        }

        if dead_vertices.is_empty() {
            return;
        }
        // Compact the vertex array and remap faces and member lists.
        let old_len = self.mesh.vertices.len();
        let mut remap = vec![u32::MAX; old_len];
        let mut kept = Vec::with_capacity(old_len - dead_vertices.len());
        for (i, v) in self.mesh.vertices.drain(..).enumerate() {
            if !dead_vertices.contains(&(i as u32)) {
                remap[i] = kept.len() as u32;
                kept.push(v);
            }
        }
        self.mesh.vertices = kept;
        self.mesh.faces.retain(|f| f.iter().all(|&i| remap[i as usize] != u32::MAX));
        for f in &mut self.mesh.faces {
            for i in f.iter_mut() {
                *i = remap[*i as usize];
            }
        }
        for node in self.nodes.values_mut() {
            if let NodeAttr::Object(o) = &mut node.attr {
                o.vertices.retain(|&v| remap[v as usize] != u32::MAX);
                for v in &mut o.vertices {
                    *v = remap[*v as usize];
                }
            }
        }
    }

    /// Centroid of an object's member mesh vertices, if it has any.
    pub fn object_vertex_centroid(&self, o: &ObjectAttr) -> Option<Vec3> {
        if o.vertices.is_empty() {
            return None;
        }
        let mut sum = Vec3::zeros();
        let mut n = 0usize;
        for &vi in &o.vertices {
            if let Some(v) = self.mesh.vertices.get(vi as usize) {
                sum += v.position;
                n += 1;
            }
        }
        if n == 0 {
            None
        } else {
            Some(sum / n as f64)
        }
    }
}
