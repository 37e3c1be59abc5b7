//! Structure nodes (walls, floor, ceiling) from the labeled surface.

use crate::graph::{StructureAttr, StructureClass};
use crate::math::{Aabb, Pose, Vec3};
use crate::objects::euclidean_cluster;
use crate::voxel::Surface;

/// Extract one structure node per spatial cluster of each structural class.
/// Pose is the cluster centroid with world-aligned orientation; the box is
/// the cluster's axis-aligned hull. Returns each structure with its member
/// vertex indices.
pub fn extract_structures(
    surface: &Surface,
    classes: &[(u16, StructureClass)],
    cluster_threshold: f64,
) -> Vec<(StructureAttr, Vec<u32>)> {
    let mut out = Vec::new();
    for &(class_id, class) in classes {
        let member_indices: Vec<u32> = surface
            .vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.label == class_id)
            .map(|(i, _)| i as u32)
            .collect();
        if member_indices.is_empty() {
            continue;
        }
        let points: Vec<Vec3> =
            member_indices.iter().map(|&i| surface.vertices[i as usize].position).collect();
        for cluster in euclidean_cluster(&points, cluster_threshold) {
            let members: Vec<u32> = cluster.iter().map(|&i| member_indices[i]).collect();
            let pts: Vec<Vec3> = cluster.iter().map(|&i| points[i]).collect();
            let centroid = pts.iter().sum::<Vec3>() / pts.len() as f64;
            let aabb = Aabb::from_points(pts.iter()).expect("non-empty cluster");
            out.push((
                StructureAttr { pose: Pose::from_translation(centroid), aabb, class },
                members,
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::SurfaceVertex;

    fn vertex(p: [f64; 3], label: u16) -> SurfaceVertex {
        SurfaceVertex {
            position: Vec3::new(p[0], p[1], p[2]),
            normal: Vec3::new(0.0, 0.0, 1.0),
            label,
            color: [0, 0, 0],
        }
    }

    #[test]
    fn single_floor_is_one_thin_node() {
        let mut surface = Surface::default();
        for i in 0..30 {
            for j in 0..30 {
                surface.vertices.push(vertex([i as f64 * 0.05, j as f64 * 0.05, 0.01], 1));
            }
        }
        let nodes = extract_structures(&surface, &[(1, StructureClass::Floor)], 0.1);
        assert_eq!(nodes.len(), 1);
        let (attr, members) = &nodes[0];
        assert_eq!(attr.class, StructureClass::Floor);
        assert_eq!(members.len(), 900);
        assert!(attr.aabb.max.z - attr.aabb.min.z <= 0.1, "floor box must stay thin");
    }

    #[test]
    fn four_disjoint_walls_make_four_nodes() {
        let mut surface = Surface::default();
        // Four wall strips far apart.
        for w in 0..4 {
            let base = w as f64 * 5.0;
            for i in 0..20 {
                for k in 0..10 {
                    surface.vertices.push(vertex([base + i as f64 * 0.05, 0.0, k as f64 * 0.05], 2));
                }
            }
        }
        let nodes = extract_structures(&surface, &[(2, StructureClass::Wall)], 0.1);
        assert_eq!(nodes.len(), 4);
    }

    #[test]
    fn every_class_vertex_is_inside_some_structure_box() {
        let mut surface = Surface::default();
        for i in 0..15 {
            surface.vertices.push(vertex([i as f64 * 0.05, 0.2, 0.0], 1));
            surface.vertices.push(vertex([i as f64 * 0.05, 3.0 + i as f64 * 0.04, 1.0], 2));
        }
        let nodes = extract_structures(
            &surface,
            &[(1, StructureClass::Floor), (2, StructureClass::Wall)],
            0.1,
        );
        for v in &surface.vertices {
            let contained = nodes.iter().any(|(attr, _)| attr.aabb.contains_point(&v.position, 1e-9));
            assert!(contained, "vertex {:?} outside all structure boxes", v.position);
        }
    }
}
