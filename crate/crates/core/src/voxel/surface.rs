//! Labeled surface extraction from the fused volume, and the vertex-based
//! RMSE error metric between two surfaces.
//!
//! One vertex is placed per sign-change lattice edge at the interpolated
//! zero crossing. Faces come from voxel-face quads: whenever the four
//! parallel sign-change edges of a grid cell agree in orientation, the quad
//! of their vertices is emitted as two triangles.

use std::collections::HashMap;

use super::{argmax_label, TsdfGrid, VoxelError};
use crate::math::Vec3;

#[derive(Clone, Copy, Debug)]
pub struct SurfaceVertex {
    pub position: Vec3,
    /// Unit normal from the normalized TSDF gradient, pointing out of the
    /// surface (toward increasing distance).
    pub normal: Vec3,
    pub label: u16,
    pub color: [u8; 3],
}

#[derive(Clone, Debug, Default)]
pub struct Surface {
    pub vertices: Vec<SurfaceVertex>,
    pub faces: Vec<[u32; 3]>,
}

impl Surface {
    pub fn positions(&self) -> Vec<Vec3> {
        self.vertices.iter().map(|v| v.position).collect()
    }
}

#[inline]
fn observed_inside(tsdf: &TsdfGrid, lin: usize) -> Option<bool> {
    if tsdf.weight(lin) > 0.0 {
        Some(tsdf.distance(lin) < 0.0)
    } else {
        None
    }
}

/// TSDF gradient at a voxel by central differences, falling back to one-sided
/// differences against observed neighbors.
fn gradient(tsdf: &TsdfGrid, idx: [usize; 3]) -> Vec3 {
    let grid = &tsdf.grid;
    let mut g = Vec3::zeros();
    for ax in 0..3 {
        let mut lo = idx;
        let mut hi = idx;
        let mut span = 0.0;
        if idx[ax] > 0 {
            lo[ax] -= 1;
            span += grid.voxel_size;
        }
        if idx[ax] + 1 < grid.dims[ax] {
            hi[ax] += 1;
            span += grid.voxel_size;
        }
        let lo_lin = grid.linear(lo);
        let hi_lin = grid.linear(hi);
        if span > 0.0 && tsdf.weight(lo_lin) > 0.0 && tsdf.weight(hi_lin) > 0.0 {
            g[ax] = (tsdf.distance(hi_lin) as f64 - tsdf.distance(lo_lin) as f64) / span;
        }
    }
    g
}

/// Extract the labeled surface point set and face list. Empty output is
/// allowed when the volume has no observed zero crossing.
pub fn extract_surface(tsdf: &TsdfGrid) -> Surface {
    let grid = &tsdf.grid;
    let [nx, ny, nz] = grid.dims;
    let mut surface = Surface::default();
    // Edge key: (linear index of the low voxel, axis) -> vertex index.
    let mut edge_vertex: HashMap<(usize, u8), u32> = HashMap::new();

    let axis_offsets = [[1usize, 0, 0], [0, 1, 0], [0, 0, 1]];

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let idx = [x, y, z];
                let lin = grid.linear(idx);
                let Some(inside_lo) = observed_inside(tsdf, lin) else { continue };
                for (ax, off) in axis_offsets.iter().enumerate() {
                    let hi = [x + off[0], y + off[1], z + off[2]];
                    if hi[0] >= nx || hi[1] >= ny || hi[2] >= nz {
                        continue;
                    }
                    let hi_lin = grid.linear(hi);
                    let Some(inside_hi) = observed_inside(tsdf, hi_lin) else { continue };
                    if inside_lo == inside_hi {
                        continue;
                    }

                    let d_lo = tsdf.distance(lin) as f64;
                    let d_hi = tsdf.distance(hi_lin) as f64;
                    let denom = d_lo - d_hi;
                    let frac = if denom.abs() < 1e-12 { 0.5 } else { (d_lo / denom).clamp(0.0, 1.0) };
                    let p_lo = grid.center(idx);
                    let p_hi = grid.center(hi);
                    let position = p_lo + (p_hi - p_lo) * frac;

                    // Label: argmax of the two incident voxels' combined
                    // counts, ties to the lowest class id.
                    let mut counts = Vec::new();
                    tsdf.accumulate_labels(lin, &mut counts);
                    tsdf.accumulate_labels(hi_lin, &mut counts);
                    let label = argmax_label(&counts).unwrap_or(0);

                    let mut normal = gradient(tsdf, idx) + gradient(tsdf, hi);
                    if normal.norm() < 1e-12 {
                        // Degenerate gradient: use the edge direction, out of
                        // the occupied side.
                        let mut n = Vec3::zeros();
                        n[ax] = if inside_lo { 1.0 } else { -1.0 };
                        normal = n;
                    }
                    normal.normalize_mut();

                    let color = if inside_lo { tsdf.color(lin) } else { tsdf.color(hi_lin) };

                    let vid = surface.vertices.len() as u32;
                    surface.vertices.push(SurfaceVertex { position, normal, label, color });
                    edge_vertex.insert((lin, ax as u8), vid);
                }
            }
        }
    }

    // Faces: per cell and axis, the four parallel edges must all cross with
    // the same orientation.
    for z in 0..nz.saturating_sub(1) {
        for y in 0..ny.saturating_sub(1) {
            for x in 0..nx.saturating_sub(1) {
                for ax in 0..3usize {
                    let (o1, o2) = match ax {
                        0 => (1usize, 2usize),
                        1 => (0, 2),
                        _ => (0, 1),
                    };
                    let mut quad = [0u32; 4];
                    let mut ok = true;
                    let mut orient = None;
                    // Corners in (o1, o2) order (0,0), (1,0), (1,1), (0,1).
                    for (slot, (b1, b2)) in
                        [(0usize, (0usize, 0usize)), (1, (1, 0)), (2, (1, 1)), (3, (0, 1))]
                    {
                        let mut corner = [x, y, z];
                        corner[o1] += b1;
                        corner[o2] += b2;
                        let lin = grid.linear(corner);
                        match edge_vertex.get(&(lin, ax as u8)) {
                            Some(&vid) => {
                                quad[slot] = vid;
                                let inside_lo = observed_inside(tsdf, lin).unwrap_or(false);
                                match orient {
                                    None => orient = Some(inside_lo),
                                    Some(o) if o != inside_lo => {
                                        ok = false;
                                    }
                                    _ => {}
                                }
                            }
                            None => {
                                ok = false;
                            }
                        }
                        if !ok {
                            break;
                        }
                    }
                    if !ok {
                        continue;
                    }
                    if orient == Some(false) {
                        quad.swap(1, 3);
                    }
                    surface.faces.push([quad[0], quad[1], quad[2]]);
                    surface.faces.push([quad[0], quad[2], quad[3]]);
                }
            }
        }
    }

    surface
}

/// Uniform hash grid over a point set with exact nearest-neighbor queries.
pub struct PointGrid {
    cell: f64,
    map: HashMap<(i32, i32, i32), Vec<u32>>,
    points: Vec<Vec3>,
}

impl PointGrid {
    pub fn build(points: Vec<Vec3>, cell: f64) -> Self {
        assert!(cell > 0.0);
        let mut map: HashMap<(i32, i32, i32), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::key(p, cell)).or_default().push(i as u32);
        }
        Self { cell, map, points }
    }

    #[inline]
    fn key(p: &Vec3, cell: f64) -> (i32, i32, i32) {
        (
            (p.x / cell).floor() as i32,
            (p.y / cell).floor() as i32,
            (p.z / cell).floor() as i32,
        )
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distance to the nearest stored point (exact; expanding ring search).
    pub fn nearest_distance(&self, p: &Vec3) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let (cx, cy, cz) = Self::key(p, self.cell);
        let mut best = f64::INFINITY;
        let mut ring = 0i32;
        loop {
            // Cells at Chebyshev distance exactly `ring` can still contain a
            // point closer than `best` only while (ring - 1) * cell < best.
            if ring > 0 && (ring - 1) as f64 * self.cell > best {
                return Some(best);
            }
            let mut any_cell = false;
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        if let Some(ids) = self.map.get(&(cx + dx, cy + dy, cz + dz)) {
                            any_cell = true;
                            for &i in ids {
                                let d = (self.points[i as usize] - p).norm();
                                best = best.min(d);
                            }
                        }
                    }
                }
            }
            let _ = any_cell;
            ring += 1;
            if ring > 100_000 {
                return Some(best);
            }
        }
    }
}

/// RMSE over `est` of the distance to the nearest point in `gt`.
pub fn mesh_error(est: &[Vec3], gt: &[Vec3]) -> Result<f64, VoxelError> {
    if est.is_empty() || gt.is_empty() {
        return Err(VoxelError::EmptySurface);
    }
    let grid = PointGrid::build(gt.to_vec(), 0.1);
    Ok(rmse_to_nearest(est, &grid))
}

pub fn rmse_to_nearest(est: &[Vec3], gt: &PointGrid) -> f64 {
    let mut sum_sq = 0.0;
    for p in est {
        let d = gt.nearest_distance(p).unwrap_or(0.0);
        sum_sq += d * d;
    }
    (sum_sq / est.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::{Ray, Scan, VoxelGrid};
    use crate::math::Pose;

    /// Analytic sphere SDF sampled into a TSDF (weight 1 everywhere).
    fn sphere_tsdf(center: Vec3, radius: f64) -> TsdfGrid {
        let grid = VoxelGrid::new(Vec3::zeros(), 0.05, [40, 40, 40]);
        let mut tsdf = TsdfGrid::new(grid, 0.2);
        for lin in 0..tsdf.grid.len() {
            let p = tsdf.grid.center(tsdf.grid.unlinear(lin));
            let sdf = ((p - center).norm() - radius).clamp(-0.2, 0.2);
            tsdf.fuse(lin, sdf);
        }
        tsdf
    }

    fn wall_scene() -> TsdfGrid {
        // Wall plane at x = 1.0 observed head-on from a grid of rays.
        let grid = VoxelGrid::new(Vec3::zeros(), 0.05, [30, 20, 20]);
        let mut tsdf = TsdfGrid::new(grid, 0.2);
        let mut rays = Vec::new();
        for y in 0..20 {
            for z in 0..20 {
                let dy = (y as f64 + 0.5) * 0.05;
                let dz = (z as f64 + 0.5) * 0.05;
                let origin = Vec3::new(0.0, dy, dz);
                let dir = Vec3::new(1.0, 0.0, 0.0);
                rays.push((origin, Ray { dir, range: 1.0, label: 2, mask: false }));
            }
        }
        for (origin, ray) in rays {
            let scan = Scan { t: 0.0, pose: Pose::from_translation(origin), rays: vec![ray] };
            integrate_scan(&mut tsdf, &scan).unwrap();
        }
        tsdf
    }

    use crate::voxel::integrate_scan;

    #[test]
    fn wall_vertices_lie_on_plane() {
        let tsdf = wall_scene();
        let surface = extract_surface(&tsdf);
        assert!(!surface.vertices.is_empty());
        let mut on_plane = 0;
        for v in &surface.vertices {
            if (v.position.x - 1.0).abs() <= 0.025 + 1e-9 {
                on_plane += 1;
            }
        }
        assert_eq!(on_plane, surface.vertices.len(), "all vertices within half a voxel of the wall");
        // All scans labeled wall (class 2).
        assert!(surface.vertices.iter().all(|v| v.label == 2));
        // Normals point back toward the sensor (outward = -x ... TSDF grows
        // toward the camera, so gradient points to -x side? distance
        // decreases along +x, so gradient ~ -x).
        for v in &surface.vertices {
            assert!((v.normal.norm() - 1.0).abs() < 1e-6);
            assert!(v.normal.x < -0.9);
        }
        assert!(!surface.faces.is_empty());
    }

    #[test]
    fn sphere_vertices_near_analytic_surface() {
        let center = Vec3::new(1.0, 1.0, 1.0);
        let radius = 0.6;
        let tsdf = sphere_tsdf(center, radius);
        let surface = extract_surface(&tsdf);
        assert!(surface.vertices.len() > 100);
        let mut sum_sq = 0.0;
        for v in &surface.vertices {
            let err = (v.position - center).norm() - radius;
            sum_sq += err * err;
        }
        let rmse = (sum_sq / surface.vertices.len() as f64).sqrt();
        assert!(rmse < 0.05, "sphere rmse {rmse} must be below one voxel");
    }

    #[test]
    fn mesh_error_identical_and_offset_planes() {
        let plane: Vec<Vec3> = (0..20)
            .flat_map(|i| (0..20).map(move |j| Vec3::new(i as f64 * 0.05, j as f64 * 0.05, 0.0)))
            .collect();
        assert!(mesh_error(&plane, &plane).unwrap() < 1e-12);
        let offset: Vec<Vec3> = plane.iter().map(|p| p + Vec3::new(0.0, 0.0, 0.05)).collect();
        let err = mesh_error(&offset, &plane).unwrap();
        assert!((err - 0.05).abs() < 1e-9, "uniform offset RMSE = {err}");
    }

    #[test]
    fn mesh_error_rejects_empty_inputs() {
        let pts = vec![Vec3::zeros()];
        assert!(mesh_error(&[], &pts).is_err());
        assert!(mesh_error(&pts, &[]).is_err());
    }

    #[test]
    fn point_grid_nearest_matches_linear_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec3> = (0..300)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let grid = PointGrid::build(pts.clone(), 0.13);
        for _ in 0..200 {
            let q = Vec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let brute = pts.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min);
            let fast = grid.nearest_distance(&q).unwrap();
            assert!((brute - fast).abs() < 1e-12);
        }
    }
}
