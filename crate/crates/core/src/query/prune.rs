//! Branch pruning: forget a node and everything it contains.

use std::collections::BTreeSet;

use super::QueryError;
use crate::graph::{DynamicSceneGraph, Layer, NodeAttr, Relation};

#[derive(Clone, Debug, Default)]
pub struct PruneReport {
    /// Node ids removed, ascending.
    pub removed: Vec<u64>,
    /// Mesh vertices dropped along with removed objects.
    pub removed_vertices: usize,
}

/// Remove a node (layers 2-4 only) and its descendants along containment
/// edges: a room takes its places and their proximal objects; a place takes
/// its objects; an object takes its member mesh vertices. Higher layers and
/// sibling branches are untouched and no dangling edges remain.
pub fn prune_branch(graph: &mut DynamicSceneGraph, id: u64) -> Result<PruneReport, QueryError> {
    let node = graph.node(id).ok_or(QueryError::NodeNotFound(id))?;
    match node.id.layer {
        Layer::ObjectsAgents | Layer::PlacesStructures | Layer::Rooms => {}
        other => return Err(QueryError::UnprunableLayer(other)),
    }

    let mut doomed: BTreeSet<u64> = BTreeSet::new();
    doomed.insert(id);
    if node.id.layer == Layer::Rooms {
        for (_, e) in graph.edges() {
            if e.relation == Relation::PlaceInRoom && e.dst.id == id {
                doomed.insert(e.src.id);
            }
        }
    }
    // Objects proximal to any doomed place.
    let places: Vec<u64> = doomed
        .iter()
        .copied()
        .filter(|&n| graph.node(n).is_some_and(|n| matches!(n.attr, NodeAttr::Place(_))))
        .collect();
    for (_, e) in graph.edges() {
        if e.relation == Relation::Proximal && places.contains(&e.dst.id) {
            doomed.insert(e.src.id);
        }
    }

    let removed_vertices: usize = doomed
        .iter()
        .filter_map(|&n| match &graph.node(n)?.attr {
            NodeAttr::Object(o) => Some(o.vertices.len()),
            _ => None,
        })
        .sum();

    let removed: Vec<u64> = doomed.iter().copied().collect();
    graph.remove_nodes(&removed);
    Ok(PruneReport { removed, removed_vertices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::*;
    use crate::math::{Aabb, Pose, Vec3};
    use crate::query::bvh::tests::small_scene;

    #[test]
    fn prune_leaf_object_removes_only_it() {
        let (mut g, object_ids) = small_scene();
        let before_nodes = g.node_count();
        let report = prune_branch(&mut g, object_ids[0]).unwrap();
        assert_eq!(report.removed, vec![object_ids[0]]);
        assert_eq!(g.node_count(), before_nodes - 1);
        // No dangling edges remain.
        for (_, e) in g.edges() {
            assert!(g.node(e.src.id).is_some() && g.node(e.dst.id).is_some());
        }
    }

    #[test]
    fn prune_room_takes_places_and_objects() {
        let (mut g, object_ids) = small_scene();
        // Room 1 contains objects 0 and 1 via its place.
        let room = g
            .rooms()
            .map(|(n, _)| n.id.id)
            .min()
            .expect("scene has rooms");
        let report = prune_branch(&mut g, room).unwrap();
        assert!(report.removed.contains(&room));
        assert!(report.removed.contains(&object_ids[0]));
        assert!(report.removed.contains(&object_ids[1]));
        assert!(!report.removed.contains(&object_ids[2]));
        // The other room survives with its building edge.
        assert_eq!(g.rooms().count(), 1);
        assert!(g
            .edges()
            .any(|(_, e)| e.relation == Relation::RoomInBuilding));
        for (_, e) in g.edges() {
            assert!(g.node(e.src.id).is_some() && g.node(e.dst.id).is_some());
        }
    }

    #[test]
    fn prune_building_or_mesh_is_error() {
        let (mut g, _) = small_scene();
        let building = g.building().unwrap().0.id.id;
        assert!(matches!(
            prune_branch(&mut g, building),
            Err(QueryError::UnprunableLayer(Layer::Building))
        ));
    }

    #[test]
    fn pruned_object_drops_its_mesh_vertices() {
        let mut g = DynamicSceneGraph::new();
        let mut vids = Vec::new();
        for i in 0..6 {
            vids.push(
                g.add_mesh_vertex(MeshVertexAttr {
                    position: Vec3::new(i as f64, 0.0, 0.0),
                    normal: Vec3::new(0.0, 0.0, 1.0),
                    color: [0, 0, 0],
                    label: 10,
                })
                .unwrap(),
            );
        }
        g.add_face([vids[0], vids[1], vids[2]]).unwrap();
        g.add_face([vids[3], vids[4], vids[5]]).unwrap();
        let place = g
            .add_node(
                Layer::PlacesStructures,
                NodeAttr::Place(PlaceAttr { position: Vec3::zeros(), room: None }),
            )
            .unwrap();
        let obj = g
            .add_node(
                Layer::ObjectsAgents,
                NodeAttr::Object(ObjectAttr {
                    pose: Pose::identity(),
                    aabb: Aabb::new(Vec3::zeros(), Vec3::new(3.0, 1.0, 1.0)).unwrap(),
                    class: 10,
                    known_shape: None,
                    vertices: vec![vids[0], vids[1], vids[2]],
                }),
            )
            .unwrap();
        let keeper = g
            .add_node(
                Layer::ObjectsAgents,
                NodeAttr::Object(ObjectAttr {
                    pose: Pose::identity(),
                    aabb: Aabb::new(Vec3::new(3.0, 0.0, 0.0), Vec3::new(6.0, 1.0, 1.0)).unwrap(),
                    class: 10,
                    known_shape: None,
                    vertices: vec![vids[3], vids[4], vids[5]],
                }),
            )
            .unwrap();
        g.add_edge(obj, place, Relation::Proximal).unwrap();
        g.add_edge(keeper, place, Relation::Proximal).unwrap();

        let report = prune_branch(&mut g, obj.id).unwrap();
        assert_eq!(report.removed_vertices, 3);
        assert_eq!(g.mesh.vertices.len(), 3);
        assert_eq!(g.mesh.faces.len(), 1);
        // The surviving object's member indices were remapped.
        let survivor = g.objects().next().unwrap().1;
        assert_eq!(survivor.vertices, vec![0, 1, 2]);
        assert_eq!(g.mesh.faces[0], [0, 1, 2]);
    }
}
