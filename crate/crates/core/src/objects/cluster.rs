//! Single-linkage Euclidean clustering over a uniform grid hash, and
//! canonical centroid/box fitting.

use std::collections::HashMap;

use super::PointCluster;
use crate::graph::ObjectAttr;
use crate::math::{Aabb, Pose, Vec3};

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect() }
    }
    fn find(&mut self, i: u32) -> u32 {
        let mut root = i;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = i;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }
    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins, keeping component ids stable.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Connected components of the graph linking points within `threshold`
/// (inclusive), computed with a uniform grid hash at cell = threshold.
/// Clusters are ordered by their smallest member index; members ascend.
pub fn euclidean_cluster(points: &[Vec3], threshold: f64) -> Vec<Vec<usize>> {
    assert!(threshold > 0.0);
    if points.is_empty() {
        return Vec::new();
    }
    let cell = threshold;
    let key = |p: &Vec3| {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i as u32);
    }

    let mut uf = UnionFind::new(points.len());
    let t2 = threshold * threshold;
    for (i, p) in points.iter().enumerate() {
        let (cx, cy, cz) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(ids) = grid.get(&(cx + dx, cy + dy, cz + dz)) else { continue };
                    for &j in ids {
                        if (j as usize) <= i {
                            continue;
                        }
                        if (points[j as usize] - p).norm_squared() <= t2 {
                            uf.union(i as u32, j);
                        }
                    }
                }
            }
        }
    }

    let mut by_root: HashMap<u32, Vec<usize>> = HashMap::new();
    for i in 0..points.len() {
        by_root.entry(uf.find(i as u32)).or_default().push(i);
    }
    let mut clusters: Vec<Vec<usize>> = by_root.into_values().collect();
    clusters.sort_by_key(|c| c[0]);
    clusters
}

/// Canonical fit for an unknown shape: world-aligned orientation at the point
/// centroid, box as the componentwise min/max.
pub fn fit_centroid_aabb(cluster: &PointCluster) -> ObjectAttr {
    assert!(!cluster.points.is_empty(), "cluster must have at least one point");
    let centroid = cluster.points.iter().sum::<Vec3>() / cluster.points.len() as f64;
    let aabb = Aabb::from_points(cluster.points.iter()).expect("non-empty");
    ObjectAttr {
        pose: Pose::from_translation(centroid),
        aabb,
        class: cluster.class,
        known_shape: None,
        vertices: Vec::new(),
    }
}
