//! Node attribute types for the five graph layers.

use serde::{Deserialize, Serialize};

use crate::math::{Aabb, Pose, Vec3};

/// Layer tag. Mesh vertices live in a dedicated indexed array rather than as
/// graph nodes, so `Mesh` never appears on a `NodeId`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Layer {
    Mesh = 1,
    ObjectsAgents = 2,
    PlacesStructures = 3,
    Rooms = 4,
    Building = 5,
}

impl From<Layer> for u8 {
    fn from(l: Layer) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for Layer {
    type Error = String;
    fn try_from(v: u8) -> Result<Layer, String> {
        match v {
            1 => Ok(Layer::Mesh),
            2 => Ok(Layer::ObjectsAgents),
            3 => Ok(Layer::PlacesStructures),
            4 => Ok(Layer::Rooms),
            5 => Ok(Layer::Building),
            other => Err(format!("unknown layer tag {other}")),
        }
    }
}

/// Graph-unique node identifier plus the (immutable) layer it was created in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub id: u64,
    pub layer: Layer,
}

pub type EdgeId = u64;

/// Semantic class identifier (world-model specific registry).
pub type ClassId = u16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentClass {
    Human,
    Robot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureClass {
    Wall,
    Floor,
    Ceiling,
    Pillar,
}

/// One vertex of the Layer-1 metric-semantic mesh.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MeshVertexAttr {
    pub position: Vec3,
    /// Unit normal, |n| = 1 within 1e-6.
    pub normal: Vec3,
    pub color: [u8; 3],
    pub label: ClassId,
}

/// Indexed Layer-1 mesh: vertices plus triangle index triples.
#[derive(Clone, Debug, Default)]
pub struct Mesh {
    pub vertices: Vec<MeshVertexAttr>,
    pub faces: Vec<[u32; 3]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObjectAttr {
    pub pose: Pose,
    pub aabb: Aabb,
    pub class: ClassId,
    /// CAD catalog id when the object was fit to a known shape.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_shape: Option<String>,
    /// Member vertices in the Layer-1 mesh.
    #[serde(default)]
    pub vertices: Vec<u32>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TimedPose {
    pub t: f64,
    #[serde(flatten)]
    pub pose: Pose,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SkeletonFrame {
    pub t: f64,
    pub joints: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AgentAttr {
    pub class: AgentClass,
    /// Smoothed pose-graph states, strictly increasing timestamps.
    pub states: Vec<TimedPose>,
    /// Accepted raw detections backing the states, same timestamps.
    #[serde(default)]
    pub raw_states: Vec<TimedPose>,
    /// Per-timestamp skeleton snapshots.
    #[serde(default)]
    pub skeletons: Vec<SkeletonFrame>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlaceAttr {
    pub position: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StructureAttr {
    pub pose: Pose,
    pub aabb: Aabb,
    pub class: StructureClass,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoomAttr {
    pub pose: Pose,
    pub aabb: Aabb,
    pub class: ClassId,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BuildingAttr {
    pub pose: Pose,
    pub aabb: Aabb,
    pub class: ClassId,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeAttr {
    Object(ObjectAttr),
    Agent(AgentAttr),
    Place(PlaceAttr),
    Structure(StructureAttr),
    Room(RoomAttr),
    Building(BuildingAttr),
}

impl NodeAttr {
    /// The single layer this attribute variant is legal in.
    pub fn expected_layer(&self) -> Layer {
        match self {
            NodeAttr::Object(_) | NodeAttr::Agent(_) => Layer::ObjectsAgents,
            NodeAttr::Place(_) | NodeAttr::Structure(_) => Layer::PlacesStructures,
            NodeAttr::Room(_) => Layer::Rooms,
            NodeAttr::Building(_) => Layer::Building,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            NodeAttr::Object(_) => "object",
            NodeAttr::Agent(_) => "agent",
            NodeAttr::Place(_) => "place",
            NodeAttr::Structure(_) => "structure",
            NodeAttr::Room(_) => "room",
            NodeAttr::Building(_) => "building",
        }
    }
}

/// Edge relation vocabulary. Mesh-face membership and object-vertex
/// membership are represented structurally (face index triples, member-vertex
/// lists) and are never legal as node-to-node edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    MeshFaceMembership,
    ObjectContainsVertices,
    Traversable,
    Proximal,
    PlaceInRoom,
    RoomAdjacent,
    RoomInBuilding,
    AgentAtPlace,
}

#[derive(Clone, Copy, Debug)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub relation: Relation,
    /// Timestamp, required for (and only for) agent-at-place edges.
    pub t: Option<f64>,
}
