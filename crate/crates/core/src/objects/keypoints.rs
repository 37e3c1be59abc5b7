//! 3D corner keypoints from the scatter of estimated surface normals.
//!
//! Per-point response: with C the neighborhood mean of n n^T over estimated
//! unit normals inside the radius, r = det(C) - k tr(C)^3. C has unit trace,
//! so by AM-GM det(C) <= 1/27: k must stay below 1/27 for any corner to
//! score positive. Planes and straight edges leave C rank-deficient
//! (r <= 0) while corners mix three face orientations, so a small positive
//! threshold keeps exactly the corner regions; non-maximum suppression then
//! keeps the strongest response per radius neighborhood.

use std::collections::HashMap;

use nalgebra::Matrix3;

use crate::math::Vec3;

#[derive(Clone, Copy, Debug)]
pub struct HarrisConfig {
    pub radius: f64,
    pub nms_threshold: f64,
    /// Neighbor count for the normal-estimation plane fits.
    pub normal_neighbors: usize,
    /// Harris trace coefficient; must be below 1/27 (det bound at unit
    /// trace) for corner responses to be positive.
    pub k: f64,
}

impl Default for HarrisConfig {
    fn default() -> Self {
        Self { radius: 0.15, nms_threshold: 1e-4, normal_neighbors: 10, k: 0.01 }
    }
}

struct NeighborGrid {
    cell: f64,
    map: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl NeighborGrid {
    fn build(points: &[Vec3], cell: f64) -> Self {
        let mut map: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::key(p, cell)).or_default().push(i as u32);
        }
        Self { cell, map }
    }

    fn key(p: &Vec3, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    /// Indices within `radius` of `p` (excluding `skip`), ascending.
    fn within(&self, points: &[Vec3], p: &Vec3, radius: f64, skip: Option<usize>) -> Vec<usize> {
        let reach = (radius / self.cell).ceil() as i64;
        let (cx, cy, cz) = Self::key(p, self.cell);
        let r2 = radius * radius;
        let mut out = Vec::new();
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    let Some(ids) = self.map.get(&(cx + dx, cy + dy, cz + dz)) else { continue };
                    for &i in ids {
                        let i = i as usize;
                        if Some(i) == skip {
                            continue;
                        }
                        if (points[i] - p).norm_squared() <= r2 {
                            out.push(i);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// The k nearest neighbors of point `i` (excluding itself), by distance
    /// then index.
    fn knn(&self, points: &[Vec3], i: usize, k: usize) -> Vec<usize> {
        let p = points[i];
        let mut reach = 1i64;
        loop {
            let radius = reach as f64 * self.cell;
            let mut cands = self.within(points, &p, radius, Some(i));
            if cands.len() >= k || radius > 1e6 {
                cands.sort_by(|&a, &b| {
                    let da = (points[a] - p).norm_squared();
                    let db = (points[b] - p).norm_squared();
                    da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                });
                cands.truncate(k);
                // Candidates beyond the searched radius could still be
                // nearer than the kth; widen once more if the kth distance
                // exceeds the guaranteed-complete radius.
                if let Some(&kth) = cands.last() {
                    if (points[kth] - p).norm() > radius && cands.len() == k {
                        reach += 1;
                        continue;
                    }
                }
                return cands;
            }
            reach += 1;
            if reach > 64 {
                let mut all: Vec<usize> =
                    (0..points.len()).filter(|&j| j != i).collect();
                all.sort_by(|&a, &b| {
                    let da = (points[a] - p).norm_squared();
                    let db = (points[b] - p).norm_squared();
                    da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                });
                all.truncate(k);
                return all;
            }
        }
    }
}

/// Per-point unit normals from k-nearest-neighbor plane fits (smallest
/// eigenvector of the neighborhood position covariance). Sign is arbitrary;
/// downstream uses are sign-invariant.
pub fn estimate_normals(points: &[Vec3], neighbors: usize) -> Vec<Vec3> {
    let grid = NeighborGrid::build(points, 0.08);
    let mut normals = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        let nn = grid.knn(points, i, neighbors.min(points.len().saturating_sub(1)));
        if nn.len() < 2 {
            normals.push(Vec3::new(0.0, 0.0, 1.0));
            continue;
        }
        let mut mean = points[i];
        for &j in &nn {
            mean += points[j];
        }
        mean /= (nn.len() + 1) as f64;
        let mut cov = Matrix3::zeros();
        let mut add = |p: &Vec3| {
            let d = p - mean;
            cov += d * d.transpose();
        };
        add(&points[i]);
        for &j in &nn {
            add(&points[j]);
        }
        let eig = nalgebra::SymmetricEigen::new(cov);
        // Smallest-eigenvalue eigenvector.
        let mut min_idx = 0;
        for k in 1..3 {
            if eig.eigenvalues[k] < eig.eigenvalues[min_idx] {
                min_idx = k;
            }
        }
        let n = eig.eigenvectors.column(min_idx).into_owned();
        let norm = n.norm();
        normals.push(if norm > 1e-12 { n / norm } else { Vec3::new(0.0, 0.0, 1.0) });
    }
    normals
}

/// Corner keypoints: indices of points whose response exceeds the threshold
/// and is maximal within the radius (ties to the lower index). Neighborhoods
/// with fewer than 3 neighbors get response zero.
pub fn harris_keypoints_3d(points: &[Vec3], cfg: &HarrisConfig) -> Vec<usize> {
    if points.len() < 5 {
        return Vec::new();
    }
    let normals = estimate_normals(points, cfg.normal_neighbors);
    let grid = NeighborGrid::build(points, cfg.radius);

    let mut response = vec![0.0f64; points.len()];
    let mut hoods: Vec<Vec<usize>> = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        let hood = grid.within(points, &points[i], cfg.radius, None);
        if hood.len() < 4 {
            // Fewer than 3 neighbors besides the point itself.
            hoods.push(hood);
            continue;
        }
        let mut c = Matrix3::zeros();
        for &j in &hood {
            let n = normals[j];
            c += n * n.transpose();
        }
        c /= hood.len() as f64;
        let det = c.determinant();
        let tr = c.trace();
        response[i] = det - cfg.k * tr * tr * tr;
        hoods.push(hood);
    }

    let mut keypoints = Vec::new();
    for i in 0..points.len() {
        if response[i] <= cfg.nms_threshold {
            continue;
        }
        let mut is_max = true;
        for &j in &hoods[i] {
            if j == i {
                continue;
            }
            if response[j] > response[i] || (response[j] == response[i] && j < i) {
                is_max = false;
                break;
            }
        }
        if is_max {
            keypoints.push(i);
        }
    }
    keypoints
}

/// Points sampled on the surface of an axis-aligned box (test fixture).
#[cfg(test)]
pub(crate) fn box_surface(min: Vec3, max: Vec3, step: f64) -> Vec<Vec3> {
        let mut pts = Vec::new();
        let n = |a: f64, b: f64| ((b - a) / step).round() as usize;
        let (nx, ny, nz) = (n(min.x, max.x), n(min.y, max.y), n(min.z, max.z));
        for i in 0..=nx {
            for j in 0..=ny {
                for k in 0..=nz {
                    let on_face = i == 0 || i == nx || j == 0 || j == ny || k == 0 || k == nz;
                    if on_face {
                        pts.push(Vec3::new(
                            min.x + i as f64 * step,
                            min.y + j as f64 * step,
                            min.z + k as f64 * step,
                        ));
                    }
                }
            }
        }
        pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_plane_has_no_keypoints() {
        let mut pts = Vec::new();
        for i in 0..30 {
            for j in 0..30 {
                pts.push(Vec3::new(i as f64 * 0.05, j as f64 * 0.05, 0.0));
            }
        }
        let kp = harris_keypoints_3d(&pts, &HarrisConfig::default());
        assert!(kp.is_empty(), "plane produced {} keypoints", kp.len());
    }

    #[test]
    fn cube_keypoints_concentrate_at_corners() {
        let min = Vec3::zeros();
        let max = Vec3::new(0.8, 0.8, 0.8);
        let pts = box_surface(min, max, 0.04);
        let cfg = HarrisConfig::default();
        let kp = harris_keypoints_3d(&pts, &cfg);
        assert!(!kp.is_empty(), "cube must have corner keypoints");
        let corners: Vec<Vec3> = (0..8)
            .map(|b| {
                Vec3::new(
                    if b & 1 == 0 { min.x } else { max.x },
                    if b & 2 == 0 { min.y } else { max.y },
                    if b & 4 == 0 { min.z } else { max.z },
                )
            })
            .collect();
        for &i in &kp {
            let d = corners.iter().map(|c| (pts[i] - c).norm()).fold(f64::INFINITY, f64::min);
            assert!(
                d <= cfg.radius,
                "keypoint at {:?} is {d} m from the nearest corner",
                pts[i]
            );
        }
    }

    #[test]
    fn disjoint_cubes_keypoints_are_union_of_parts() {
        let a = box_surface(Vec3::zeros(), Vec3::new(0.6, 0.6, 0.6), 0.04);
        let offset = Vec3::new(2.0, 0.0, 0.0); // farther than 2 x radius
        let b: Vec<Vec3> = box_surface(Vec3::zeros(), Vec3::new(0.5, 0.7, 0.6), 0.04)
            .into_iter()
            .map(|p| p + offset)
            .collect();
        let cfg = HarrisConfig::default();
        let kp_a = harris_keypoints_3d(&a, &cfg);
        let kp_b = harris_keypoints_3d(&b, &cfg);
        let mut joint: Vec<Vec3> = a.clone();
        joint.extend(b.iter().copied());
        let kp_joint = harris_keypoints_3d(&joint, &cfg);

        let mut expect: Vec<Vec3> = kp_a.iter().map(|&i| a[i]).collect();
        expect.extend(kp_b.iter().map(|&i| b[i]));
        let got: Vec<Vec3> = kp_joint.iter().map(|&i| joint[i]).collect();
        assert_eq!(got.len(), expect.len());
        for g in &got {
            assert!(expect.iter().any(|e| (e - g).norm() < 1e-12));
        }
    }

    #[test]
    fn degenerate_neighborhoods_have_zero_response() {
        // Five far-apart points: every neighborhood has < 3 neighbors.
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(3.0, 0.0, 0.0),
            Vec3::new(4.0, 0.0, 0.0),
        ];
        assert!(harris_keypoints_3d(&pts, &HarrisConfig::default()).is_empty());
    }
}
