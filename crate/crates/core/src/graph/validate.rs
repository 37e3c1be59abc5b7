//! Report-only structural validation of a scene graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{DynamicSceneGraph, NodeAttr, Relation, EPS_BOX};

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// Object node with no proximal place edge.
    ObjectWithoutPlace(u64),
    /// Place node with no place-in-room edge.
    PlaceWithoutRoom(u64),
    /// Room AABB does not contain a member object's AABB beyond the slack.
    ObjectOutsideRoomBox { object: u64, room: u64 },
    /// Agent pose at a timestamp falls outside the room box of its place.
    AgentPoseOutsideRoomBox { agent: u64, room: u64, t: f64 },
    /// Agent state timestamps are not strictly increasing.
    AgentTimestampsNotMonotone(u64),
    /// Room with no room-in-building edge.
    RoomNotConnectedToBuilding(u64),
    /// Room AABB not contained in the building AABB beyond the slack.
    RoomOutsideBuildingBox(u64),
    /// Centroid of an object's member mesh vertices lies outside its AABB.
    ObjectCentroidOutsideBox(u64),
    /// Edge endpoint no longer exists.
    DanglingEdge(u64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ObjectWithoutPlace(id) => write!(f, "object {id} has no proximal place"),
            Violation::PlaceWithoutRoom(id) => write!(f, "place {id} has no room"),
            Violation::ObjectOutsideRoomBox { object, room } => {
                write!(f, "object {object} box not contained in room {room} box")
            }
            Violation::AgentPoseOutsideRoomBox { agent, room, t } => {
                write!(f, "agent {agent} pose at t={t} outside room {room} box")
            }
            Violation::AgentTimestampsNotMonotone(id) => {
                write!(f, "agent {id} timestamps are not strictly increasing")
            }
            Violation::RoomNotConnectedToBuilding(id) => {
                write!(f, "room {id} not connected to the building")
            }
            Violation::RoomOutsideBuildingBox(id) => {
                write!(f, "room {id} box not contained in the building box")
            }
            Violation::ObjectCentroidOutsideBox(id) => {
                write!(f, "object {id} vertex centroid outside its box")
            }
            Violation::DanglingEdge(id) => write!(f, "edge {id} references a missing node"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid (no violations)");
        }
        writeln!(f, "{} violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl DynamicSceneGraph {
    /// Check every graph-level invariant and report each violation. Never
    /// fails; an empty report means the graph is structurally valid.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();

        // Edge referential integrity (edges are checked at insertion, but
        // mutation paths such as prune must not leave danglers).
        for (eid, e) in self.edges() {
            if self.node(e.src.id).is_none() || self.node(e.dst.id).is_none() {
                report.violations.push(Violation::DanglingEdge(*eid));
            }
        }

        // Gather edge indexes once.
        let mut object_place: BTreeMap<u64, u64> = BTreeMap::new();
        let mut place_room: BTreeMap<u64, u64> = BTreeMap::new();
        let mut rooms_with_building: BTreeSet<u64> = BTreeSet::new();
        let mut agent_at: Vec<(u64, u64, f64)> = Vec::new();
        for e in self.edges().map(|(_, e)| e) {
            match e.relation {
                Relation::Proximal => {
                    object_place.insert(e.src.id, e.dst.id);
                }
                Relation::PlaceInRoom => {
                    place_room.insert(e.src.id, e.dst.id);
                }
                Relation::RoomInBuilding => {
                    rooms_with_building.insert(e.src.id);
                }
                Relation::AgentAtPlace => {
                    if let Some(t) = e.t {
                        agent_at.push((e.src.id, e.dst.id, t));
                    }
                }
                _ => {}
            }
        }

        let building_box = self.building().map(|(_, b)| b.aabb);

        for node in self.nodes() {
            match &node.attr {
                NodeAttr::Object(o) => {
                    match object_place.get(&node.id.id) {
                        None => report.violations.push(Violation::ObjectWithoutPlace(node.id.id)),
                        Some(place) => {
                            if let Some(&room) = place_room.get(place) {
                                if let Some(r) = self.node(room).and_then(|n| match &n.attr {
                                    NodeAttr::Room(r) => Some(r),
                                    _ => None,
                                }) {
                                    if !r.aabb.contains_box(&o.aabb, EPS_BOX) {
                                        report.violations.push(Violation::ObjectOutsideRoomBox {
                                            object: node.id.id,
                                            room,
                                        });
                                    }
                                }
                            }
                        }
                    }
                    if let Some(c) = self.object_vertex_centroid(o) {
                        if !o.aabb.contains_point(&c, EPS_BOX) {
                            report.violations.push(Violation::ObjectCentroidOutsideBox(node.id.id));
                        }
                    }
                }
                NodeAttr::Agent(a) => {
                    if !a.states.windows(2).all(|w| w[1].t > w[0].t) {
                        report
                            .violations
                            .push(Violation::AgentTimestampsNotMonotone(node.id.id));
                    }
                }
                NodeAttr::Place(_) => {
                    if !place_room.contains_key(&node.id.id) {
                        report.violations.push(Violation::PlaceWithoutRoom(node.id.id));
                    }
                }
                NodeAttr::Room(r) => {
                    if !rooms_with_building.contains(&node.id.id) {
                        report.violations.push(Violation::RoomNotConnectedToBuilding(node.id.id));
                    }
                    if let Some(bb) = &building_box {
                        if !bb.contains_box(&r.aabb, EPS_BOX) {
                            report.violations.push(Violation::RoomOutsideBuildingBox(node.id.id));
                        }
                    }
                }
                _ => {}
            }
        }

        // Agent-pose containment: each timestamped pose must fall inside the
        // box of the room its place belongs to.
        for (agent, place, t) in agent_at {
            let Some(&room) = place_room.get(&place) else { continue };
            let Some(r) = self.node(room).and_then(|n| match &n.attr {
                NodeAttr::Room(r) => Some(r),
                _ => None,
            }) else {
                continue;
            };
            let Some(a) = self.node(agent).and_then(|n| match &n.attr {
                NodeAttr::Agent(a) => Some(a),
                _ => None,
            }) else {
                continue;
            };
            let Some(state) = a.states.iter().find(|s| s.t == t) else { continue };
            if !r.aabb.contains_point(&state.pose.translation, EPS_BOX) {
                report
                    .violations
                    .push(Violation::AgentPoseOutsideRoomBox { agent, room, t });
            }
        }

        report
    }
}
