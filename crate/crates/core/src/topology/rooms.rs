//! Room segmentation from a horizontal section of the distance field taken
//! just below the ceiling, plus place labeling by component and majority
//! voting.

use serde::{Deserialize, Serialize};

use super::{PlaceGraph, TopologyError};
use crate::voxel::{EsdfGrid, Surface};

/// Median height of ceiling-labeled surface vertices.
pub fn detect_ceiling(surface: &Surface, ceiling_class: u16) -> Result<f64, TopologyError> {
    let mut zs: Vec<f64> = surface
        .vertices
        .iter()
        .filter(|v| v.label == ceiling_class)
        .map(|v| v.position.z)
        .collect();
    if zs.is_empty() {
        return Err(TopologyError::NoCeiling);
    }
    zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = zs.len();
    Ok(if n % 2 == 1 { zs[n / 2] } else { 0.5 * (zs[n / 2 - 1] + zs[n / 2]) })
}

/// Horizontal 2D section of the 3D distance field at the voxel layer nearest
/// `z_cut`.
#[derive(Clone, Debug)]
pub struct EsdfSection {
    pub z_cut: f64,
    /// World origin of cell (0, 0) (minimum corner).
    pub origin: [f64; 2],
    pub cell: f64,
    pub dims: [usize; 2],
    pub values: Vec<f32>,
}

impl EsdfSection {
    #[inline]
    pub fn linear(&self, x: usize, y: usize) -> usize {
        x + self.dims[0] * y
    }

    /// Cell containing a world (x, y) position.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<[usize; 2]> {
        let cx = (x - self.origin[0]) / self.cell;
        let cy = (y - self.origin[1]) / self.cell;
        if cx < 0.0 || cy < 0.0 {
            return None;
        }
        let (cx, cy) = (cx as usize, cy as usize);
        if cx >= self.dims[0] || cy >= self.dims[1] {
            return None;
        }
        Some([cx, cy])
    }
}

pub fn esdf_section(esdf: &EsdfGrid, z_cut: f64) -> Result<EsdfSection, TopologyError> {
    let grid = &esdf.grid;
    let lo = grid.origin.z;
    let hi = grid.origin.z + grid.dims[2] as f64 * grid.voxel_size;
    if z_cut < lo || z_cut > hi {
        return Err(TopologyError::SectionOutOfBounds { z: z_cut, lo, hi });
    }
    let layer = (((z_cut - lo) / grid.voxel_size - 0.5).round().max(0.0) as usize)
        .min(grid.dims[2] - 1);
    let mut values = Vec::with_capacity(grid.dims[0] * grid.dims[1]);
    for y in 0..grid.dims[1] {
        for x in 0..grid.dims[0] {
            values.push(esdf.distance(grid.linear([x, y, layer])));
        }
    }
    Ok(EsdfSection {
        z_cut,
        origin: [grid.origin.x, grid.origin.y],
        cell: grid.voxel_size,
        dims: [grid.dims[0], grid.dims[1]],
        values,
    })
}

/// Room partition of a section: 0 = unassigned, 1..=room_count are room
/// component ids, numbered in scan order of first encounter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoomPartition {
    pub dims: [usize; 2],
    pub cells: Vec<u32>,
    pub room_count: u32,
}

impl RoomPartition {
    #[inline]
    pub fn id_at(&self, x: usize, y: usize) -> u32 {
        self.cells[x + self.dims[0] * y]
    }
}

/// Partition the section into rooms: cells strictly above `cutoff` form the
/// free mask; 4-connected components of the mask become rooms; components
/// smaller than `min_cells` are dropped back to id 0.
pub fn segment_rooms(section: &EsdfSection, cutoff: f64, min_cells: usize) -> RoomPartition {
    let [nx, ny] = section.dims;
    let free: Vec<bool> = section.values.iter().map(|&v| v as f64 > cutoff).collect();
    let mut cells = vec![0u32; nx * ny];
    let mut next = 0u32;
    let mut sizes: Vec<usize> = Vec::new();
    for start in 0..nx * ny {
        if !free[start] || cells[start] != 0 {
            continue;
        }
        next += 1;
        let mut size = 0usize;
        let mut stack = vec![start];
        cells[start] = next;
        while let Some(c) = stack.pop() {
            size += 1;
            let (x, y) = (c % nx, c / nx);
            let mut push = |n: usize| {
                if free[n] && cells[n] == 0 {
                    cells[n] = next;
                    stack.push(n);
                }
            };
            if x > 0 {
                push(c - 1);
            }
            if x + 1 < nx {
                push(c + 1);
            }
            if y > 0 {
                push(c - nx);
            }
            if y + 1 < ny {
                push(c + nx);
            }
        }
        sizes.push(size);
    }
    // Drop specks, renumber survivors compactly in scan order.
    let mut remap = vec![0u32; next as usize + 1];
    let mut kept = 0u32;
    for (i, &size) in sizes.iter().enumerate() {
        if size >= min_cells {
            kept += 1;
            remap[i + 1] = kept;
        }
    }
    for c in cells.iter_mut() {
        *c = remap[*c as usize];
    }
    RoomPartition { dims: [nx, ny], cells, room_count: kept }
}

#[derive(Clone, Debug, Default)]
pub struct LabelReport {
    /// Places labeled directly from their section cell.
    pub direct: usize,
    /// Places labeled by neighborhood majority, per voting pass.
    pub voted_per_pass: Vec<usize>,
    /// Places that could not be labeled at all.
    pub unlabeled: Vec<u32>,
}

/// Room label per place (0 = unlabeled).
///
/// Pass 1 reads the partition at each place's horizontal cell. Later passes
/// give each unlabeled place the majority label among its labeled graph
/// neighbors (ties to the smallest id), repeating to fixpoint. Places whose
/// component never touches a labeled place stay unlabeled and are reported.
pub fn label_places(
    places: &PlaceGraph,
    partition: &RoomPartition,
    section: &EsdfSection,
) -> (Vec<u32>, LabelReport) {
    let n = places.nodes.len();
    let mut labels = vec![0u32; n];
    let mut report = LabelReport::default();

    for (i, node) in places.nodes.iter().enumerate() {
        if let Some([cx, cy]) = section.cell_of(node.position.x, node.position.y) {
            let id = partition.id_at(cx, cy);
            if id != 0 {
                labels[i] = id;
                report.direct += 1;
            }
        }
    }

    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &(a, b) in &places.edges {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    }

    // Synchronous majority-vote passes; each pass labels at least one place
    // or the vote has converged.
    for _pass in 0..n.max(1) {
        let snapshot = labels.clone();
        let mut newly = 0usize;
        for i in 0..n {
            if snapshot[i] != 0 {
                continue;
            }
            let mut votes: Vec<(u32, usize)> = Vec::new();
            for &j in &adj[i] {
                let l = snapshot[j as usize];
                if l == 0 {
                    continue;
                }
                match votes.iter_mut().find(|(id, _)| *id == l) {
                    Some(v) => v.1 += 1,
                    None => votes.push((l, 1)),
                }
            }
            if let Some(&(id, _)) = votes
                .iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            {
                labels[i] = id;
                newly += 1;
            }
        }
        if newly == 0 {
            break;
        }
        report.voted_per_pass.push(newly);
    }

    report.unlabeled = (0..n as u32).filter(|&i| labels[i as usize] == 0).collect();
    (labels, report)
}

/// Binary PGM (P5) debug image of a section, values scaled by 100 into u8.
pub fn write_section_pgm(section: &EsdfSection, path: &std::path::Path) -> Result<(), TopologyError> {
    let [nx, ny] = section.dims;
    let mut data = Vec::with_capacity(nx * ny);
    // Top row first so the image reads like a floor plan.
    for y in (0..ny).rev() {
        for x in 0..nx {
            let v = section.values[section.linear(x, y)] as f64 * 100.0;
            data.push(v.clamp(0.0, 255.0) as u8);
        }
    }
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    out.extend_from_slice(&data);
    std::fs::write(path, out)?;
    Ok(())
}
