//! Bounding volume hierarchy mirroring the graph's containment structure:
//! building -> rooms -> places-with-objects -> objects, with structures as
//! direct children of the root.

use std::collections::BTreeMap;

use super::QueryError;
use crate::graph::{DynamicSceneGraph, NodeAttr, Relation, EPS_BOX};
use crate::math::{Aabb, Vec3};

#[derive(Clone, Debug)]
pub enum BvhNode {
    Internal { aabb: Aabb, graph_node: Option<u64>, children: Vec<usize> },
    Leaf { aabb: Aabb, graph_node: u64 },
}

impl BvhNode {
    pub fn aabb(&self) -> &Aabb {
        match self {
            BvhNode::Internal { aabb, .. } | BvhNode::Leaf { aabb, .. } => aabb,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Bvh {
    pub nodes: Vec<BvhNode>,
    pub root: usize,
}

#[derive(Clone, Copy, Debug)]
pub enum QueryShape {
    Box(Aabb),
    Segment(Vec3, Vec3),
}

impl QueryShape {
    fn hits(&self, aabb: &Aabb) -> bool {
        match self {
            QueryShape::Box(b) => aabb.intersects(b),
            QueryShape::Segment(a, b) => aabb.intersects_segment(a, b),
        }
    }
}

/// Build the containment-mirroring hierarchy. Every object node becomes a
/// leaf under its proximal place's group node inside its room; structures
/// are leaves directly under the building root. Internal boxes are the union
/// of their children inflated by the containment slack.
pub fn build_bvh(graph: &DynamicSceneGraph) -> Result<Bvh, QueryError> {
    let (building_node, building_attr) = graph.building().ok_or(QueryError::NoBuilding)?;

    let mut place_room: BTreeMap<u64, u64> = BTreeMap::new();
    let mut object_place: BTreeMap<u64, u64> = BTreeMap::new();
    for (_, e) in graph.edges() {
        match e.relation {
            Relation::PlaceInRoom => {
                place_room.insert(e.src.id, e.dst.id);
            }
            Relation::Proximal => {
                object_place.insert(e.src.id, e.dst.id);
            }
            _ => {}
        }
    }

    // room -> place -> objects (ordered maps for determinism).
    let mut by_room: BTreeMap<u64, BTreeMap<u64, Vec<u64>>> = BTreeMap::new();
    for (node, _) in graph.objects() {
        let Some(&place) = object_place.get(&node.id.id) else { continue };
        let Some(&room) = place_room.get(&place) else { continue };
        by_room.entry(room).or_default().entry(place).or_default().push(node.id.id);
    }

    let mut nodes: Vec<BvhNode> = Vec::new();
    let mut room_children: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (room, places) in &by_room {
        for (place, objects) in places {
            let mut child_ids = Vec::new();
            let mut group_box: Option<Aabb> = None;
            for &obj in objects {
                let NodeAttr::Object(attr) = &graph.node(obj).expect("object exists").attr else {
                    continue;
                };
                nodes.push(BvhNode::Leaf { aabb: attr.aabb, graph_node: obj });
                child_ids.push(nodes.len() - 1);
                group_box = Some(match group_box {
                    None => attr.aabb,
                    Some(b) => b.union(&attr.aabb),
                });
            }
            if let Some(b) = group_box {
                nodes.push(BvhNode::Internal {
                    aabb: b.inflate(EPS_BOX),
                    graph_node: Some(*place),
                    children: child_ids,
                });
                room_children.entry(*room).or_default().push(nodes.len() - 1);
            }
        }
    }

    let mut root_children = Vec::new();
    for (node, attr) in graph.rooms() {
        let children = room_children.remove(&node.id.id).unwrap_or_default();
        nodes.push(BvhNode::Internal {
            aabb: attr.aabb.inflate(EPS_BOX),
            graph_node: Some(node.id.id),
            children,
        });
        root_children.push(nodes.len() - 1);
    }
    for (node, attr) in graph.structures() {
        nodes.push(BvhNode::Leaf { aabb: attr.aabb, graph_node: node.id.id });
        root_children.push(nodes.len() - 1);
    }

    nodes.push(BvhNode::Internal {
        aabb: building_attr.aabb.inflate(EPS_BOX),
        graph_node: Some(building_node.id.id),
        children: root_children,
    });
    let root = nodes.len() - 1;
    Ok(Bvh { nodes, root })
}

/// Exactly the object/structure leaves whose box intersects the query, in
/// ascending node-id order. Internal pruning cannot change the answer
/// because internal boxes contain their children.
pub fn collision_query(bvh: &Bvh, shape: &QueryShape) -> Vec<u64> {
    let mut hits = Vec::new();
    let mut stack = vec![bvh.root];
    while let Some(i) = stack.pop() {
        match &bvh.nodes[i] {
            BvhNode::Leaf { aabb, graph_node } => {
                if shape.hits(aabb) {
                    hits.push(*graph_node);
                }
            }
            BvhNode::Internal { aabb, children, .. } => {
                if shape.hits(aabb) {
                    stack.extend(children.iter().copied());
                }
            }
        }
    }
    hits.sort_unstable();
    hits
}
