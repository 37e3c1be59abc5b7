//! Place extraction: sparse sampling of the free space plus straight-line
//! traversability edges.

use std::collections::HashMap;

use crate::math::Vec3;
use crate::voxel::EsdfGrid;

#[derive(Clone, Copy, Debug)]
pub struct PlaceNode {
    pub position: Vec3,
    /// Clearance (distance-field value) at extraction time.
    pub clearance: f64,
}

/// Sparse free-space graph: nodes prefer high clearance, edges certify
/// straight-line traversability.
#[derive(Clone, Debug, Default)]
pub struct PlaceGraph {
    pub nodes: Vec<PlaceNode>,
    /// Undirected edges as (i, j) with i < j.
    pub edges: Vec<(u32, u32)>,
}

impl PlaceGraph {
    pub fn neighbors(&self, i: u32) -> Vec<u32> {
        let mut out = Vec::new();
        for &(a, b) in &self.edges {
            if a == i {
                out.push(b);
            } else if b == i {
                out.push(a);
            }
        }
        out
    }

    /// Connected components over traversability edges, as a component id per
    /// node (0-based, ordered by smallest member).
    pub fn components(&self) -> Vec<u32> {
        let n = self.nodes.len();
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        let mut comp = vec![u32::MAX; n];
        let mut next = 0u32;
        for start in 0..n {
            if comp[start] != u32::MAX {
                continue;
            }
            let mut stack = vec![start as u32];
            comp[start] = next;
            while let Some(v) = stack.pop() {
                for &w in &adj[v as usize] {
                    if comp[w as usize] == u32::MAX {
                        comp[w as usize] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

/// Straight-segment clearance check. The segment is sampled at quarter-voxel
/// steps (endpoints included) so that the contract survives re-checking at
/// any coarser or equal density.
pub fn segment_clear(esdf: &EsdfGrid, a: &Vec3, b: &Vec3, min_clearance: f64) -> bool {
    let step = esdf.grid.voxel_size * 0.25;
    let len = (b - a).norm();
    let n = (len / step).ceil().max(1.0) as usize;
    for k in 0..=n {
        let p = a + (b - a) * (k as f64 / n as f64);
        if esdf.distance_at_point(&p) < min_clearance {
            return false;
        }
    }
    true
}

/// Extract the place graph from a distance field.
///
/// Candidate voxels have clearance at least `min_clearance`; a greedy sweep
/// in decreasing clearance order keeps a candidate only when no kept node
/// lies within `spacing`. Edges connect node pairs within `3 * spacing`
/// whose straight segment keeps the clearance everywhere.
pub fn extract_places(esdf: &EsdfGrid, min_clearance: f64, spacing: f64) -> PlaceGraph {
    let grid = &esdf.grid;
    let mut candidates: Vec<(f32, usize)> = (0..grid.len())
        .filter_map(|lin| {
            let d = esdf.distance(lin);
            if (d as f64) >= min_clearance {
                Some((d, lin))
            } else {
                None
            }
        })
        .collect();
    // Highest clearance first; scan order breaks ties.
    candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let cell = spacing;
    let key = |p: &Vec3| {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    };
    let mut hash: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    let mut nodes: Vec<PlaceNode> = Vec::new();
    let sp2 = spacing * spacing;
    for (d, lin) in candidates {
        let p = grid.center(grid.unlinear(lin));
        let (cx, cy, cz) = key(&p);
        let mut blocked = false;
        'scan: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = hash.get(&(cx + dx, cy + dy, cz + dz)) {
                        for &i in ids {
                            if (nodes[i as usize].position - p).norm_squared() < sp2 {
                                blocked = true;
                                break 'scan;
                            }
                        }
                    }
                }
            }
        }
        if blocked {
            continue;
        }
        let id = nodes.len() as u32;
        nodes.push(PlaceNode { position: p, clearance: d as f64 });
        hash.entry((cx, cy, cz)).or_default().push(id);
    }

    // Edges between pairs within 3 x spacing with a clear straight segment.
    let reach = 3.0 * spacing;
    let reach_cells = (reach / cell).ceil() as i64;
    let mut edges = Vec::new();
    for (i, node) in nodes.iter().enumerate() {
        let (cx, cy, cz) = key(&node.position);
        for dx in -reach_cells..=reach_cells {
            for dy in -reach_cells..=reach_cells {
                for dz in -reach_cells..=reach_cells {
                    let Some(ids) = hash.get(&(cx + dx, cy + dy, cz + dz)) else { continue };
                    for &j in ids {
                        if (j as usize) <= i {
                            continue;
                        }
                        let other = &nodes[j as usize];
                        if (other.position - node.position).norm() > reach {
                            continue;
                        }
                        if segment_clear(esdf, &node.position, &other.position, min_clearance) {
                            edges.push((i as u32, j));
                        }
                    }
                }
            }
        }
    }
    edges.sort_unstable();
    PlaceGraph { nodes, edges }
}
