//! Volumetric mapping: truncated signed-distance fusion with dynamic
//! masking, Bayesian (count-based) semantic labels, voxel-face surface
//! extraction, and an exact Euclidean distance field.

mod esdf;
mod io;
mod surface;
mod tsdf;

pub use esdf::EsdfGrid;
pub use io::{read_grid_dump, read_scans, write_grid_dump, write_scans};
pub use surface::{extract_surface, mesh_error, rmse_to_nearest, PointGrid, Surface, SurfaceVertex};
pub use tsdf::integrate_scan;

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

use crate::math::{Pose, Vec3};

#[derive(Error, Debug)]
pub enum VoxelError {
    #[error("non-finite ray data ({0})")]
    NonFinite(&'static str),
    #[error("ray direction must be unit length")]
    BadDirection,
    #[error("ray range must be positive and finite")]
    BadRange,
    #[error("surface has no vertices")]
    EmptySurface,
    #[error("esdf max_distance must be >= 0.5 m (room sectioning depends on it), got {0}")]
    MaxDistanceTooSmall(f64),
    #[error("grid io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad grid dump: {0}")]
    BadDump(String),
    #[error("scan stream line {line}: {source}")]
    ScanParse { line: usize, source: serde_json::Error },
}

/// Dense voxel lattice geometry. `origin` is the minimum corner; voxel
/// centers sit at `origin + (index + 0.5) * voxel_size`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub voxel_size: f64,
    pub dims: [usize; 3],
}

impl VoxelGrid {
    pub fn new(origin: Vec3, voxel_size: f64, dims: [usize; 3]) -> Self {
        assert!(voxel_size > 0.0, "voxel_size must be positive");
        assert!(dims.iter().all(|&d| d > 0), "dims must be positive");
        Self { origin, voxel_size, dims }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn linear(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    #[inline]
    pub fn unlinear(&self, lin: usize) -> [usize; 3] {
        let x = lin % self.dims[0];
        let rest = lin / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    /// Voxel containing the point, or None when out of bounds.
    #[inline]
    pub fn index_of_point(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for ax in 0..3 {
            let c = (p[ax] - self.origin[ax]) / self.voxel_size;
            if c < 0.0 {
                return None;
            }
            let i = c as usize;
            if i >= self.dims[ax] {
                return None;
            }
            idx[ax] = i;
        }
        Some(idx)
    }

    #[inline]
    pub fn center(&self, idx: [usize; 3]) -> Vec3 {
        Vec3::new(
            self.origin.x + (idx[0] as f64 + 0.5) * self.voxel_size,
            self.origin.y + (idx[1] as f64 + 0.5) * self.voxel_size,
            self.origin.z + (idx[2] as f64 + 0.5) * self.voxel_size,
        )
    }
}

/// One simulated depth+semantics ray, direction in the sensor frame.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Ray {
    pub dir: Vec3,
    pub range: f64,
    pub label: u16,
    pub mask: bool,
}

/// One sensor frame: a timestamped pose and a ray bundle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scan {
    pub t: f64,
    pub pose: Pose,
    pub rays: Vec<Ray>,
}

/// Dense TSDF volume with per-voxel fusion weight, semantic label counts,
/// and color. Labels are stored as one inline (class, count) slot per voxel
/// plus an overflow table for the minority of voxels observed under more
/// than one class.
#[derive(Clone, Debug)]
pub struct TsdfGrid {
    pub grid: VoxelGrid,
    pub truncation: f64,
    distance: Vec<f32>,
    weight: Vec<f32>,
    color: Vec<[u8; 3]>,
    label_primary: Vec<(u16, u16)>,
    label_extra: HashMap<u32, Vec<(u16, u16)>>,
}

impl TsdfGrid {
    pub fn new(grid: VoxelGrid, truncation: f64) -> Self {
        assert!(truncation > 0.0, "truncation must be positive");
        let n = grid.len();
        Self {
            grid,
            truncation,
            distance: vec![truncation as f32; n],
            weight: vec![0.0; n],
            color: vec![[0, 0, 0]; n],
            label_primary: vec![(0, 0); n],
            label_extra: HashMap::new(),
        }
    }

    #[inline]
    pub fn distance(&self, lin: usize) -> f32 {
        self.distance[lin]
    }

    #[inline]
    pub fn weight(&self, lin: usize) -> f32 {
        self.weight[lin]
    }

    #[inline]
    pub fn color(&self, lin: usize) -> [u8; 3] {
        self.color[lin]
    }

    pub fn distances(&self) -> &[f32] {
        &self.distance
    }

    pub fn weights(&self) -> &[f32] {
        &self.weight
    }

    #[inline]
    pub(crate) fn fuse(&mut self, lin: usize, sdf: f64) {
        let w = self.weight[lin];
        self.distance[lin] =
            ((self.distance[lin] as f64 * w as f64 + sdf) / (w as f64 + 1.0)) as f32;
        self.weight[lin] = w + 1.0;
    }

    pub(crate) fn bump_label(&mut self, lin: usize, label: u16) {
        let slot = &mut self.label_primary[lin];
        if slot.1 == 0 {
            *slot = (label, 1);
        } else if slot.0 == label {
            slot.1 = slot.1.saturating_add(1);
        } else {
            let extra = self.label_extra.entry(lin as u32).or_default();
            match extra.iter_mut().find(|(c, _)| *c == label) {
                Some(entry) => entry.1 = entry.1.saturating_add(1),
                None => extra.push((label, 1)),
            }
        }
        self.color[lin] = class_color(label);
    }

    /// Observation count for a (voxel, class) pair.
    pub fn label_count(&self, lin: usize, label: u16) -> u32 {
        let mut n = 0u32;
        let slot = self.label_primary[lin];
        if slot.1 > 0 && slot.0 == label {
            n += slot.1 as u32;
        }
        if let Some(extra) = self.label_extra.get(&(lin as u32)) {
            if let Some((_, c)) = extra.iter().find(|(c, _)| *c == label) {
                n += *c as u32;
            }
        }
        n
    }

    /// Fold a voxel's label counts into `acc`.
    pub(crate) fn accumulate_labels(&self, lin: usize, acc: &mut Vec<(u16, u32)>) {
        let mut add = |class: u16, count: u32| match acc.iter_mut().find(|(c, _)| *c == class) {
            Some(entry) => entry.1 += count,
            None => acc.push((class, count)),
        };
        let slot = self.label_primary[lin];
        if slot.1 > 0 {
            add(slot.0, slot.1 as u32);
        }
        if let Some(extra) = self.label_extra.get(&(lin as u32)) {
            for (c, n) in extra {
                add(*c, *n as u32);
            }
        }
    }

    /// Most-observed class at a voxel; ties resolve to the lowest class id.
    pub fn label_argmax(&self, lin: usize) -> Option<u16> {
        let mut acc = Vec::new();
        self.accumulate_labels(lin, &mut acc);
        argmax_label(&acc)
    }

    /// Occupancy used for the distance field: negative fused distance, or
    /// never observed (conservative for planning).
    #[inline]
    pub fn occupied_for_esdf(&self, lin: usize) -> bool {
        self.weight[lin] == 0.0 || self.distance[lin] < 0.0
    }
}

/// Argmax by count with ties to the lowest class id.
pub(crate) fn argmax_label(counts: &[(u16, u32)]) -> Option<u16> {
    counts
        .iter()
        .filter(|(_, n)| *n > 0)
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(c, _)| *c)
}

/// Deterministic display color for a semantic class.
pub fn class_color(label: u16) -> [u8; 3] {
    // Golden-ratio hue walk, fixed saturation/value.
    let hue = (label as f64 * 0.618_033_988_75).fract() * 6.0;
    let sector = hue as usize % 6;
    let f = hue.fract();
    let (v, p) = (230.0, 60.0);
    let q = v - (v - p) * f;
    let t = p + (v - p) * f;
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r as u8, g as u8, b as u8]
}
