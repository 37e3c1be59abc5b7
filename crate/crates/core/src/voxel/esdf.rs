//! Exact Euclidean distance field over voxel centers.
//!
//! Computed with the separable squared-distance transform (per-axis lower
//! envelope of parabolas), which is exact in integer lattice units. A
//! quasi-Euclidean chamfer or wavefront sweep would not satisfy the
//! brute-force-equality contract.

use super::{TsdfGrid, VoxelError, VoxelGrid};
use crate::math::Vec3;

const INF_1D: i64 = 1 << 20;
const INF_SQ: i64 = INF_1D * INF_1D;

/// Unsigned distance field on the same lattice as the source volume:
/// 0 at occupied voxels, Euclidean distance to the nearest occupied voxel
/// center elsewhere, capped at `max_distance`.
#[derive(Clone, Debug)]
pub struct EsdfGrid {
    pub grid: VoxelGrid,
    pub max_distance: f64,
    distance: Vec<f32>,
}

impl EsdfGrid {
    /// Distance field of an explicit occupancy mask.
    pub fn from_occupancy(
        grid: VoxelGrid,
        occupied: &[bool],
        max_distance: f64,
    ) -> Result<Self, VoxelError> {
        if max_distance < 0.5 {
            return Err(VoxelError::MaxDistanceTooSmall(max_distance));
        }
        assert_eq!(occupied.len(), grid.len());
        let sq = squared_edt(occupied, grid.dims);
        let h = grid.voxel_size;
        let distance = sq
            .into_iter()
            .map(|s| {
                if s >= INF_SQ {
                    max_distance as f32
                } else {
                    ((s as f64).sqrt() * h).min(max_distance) as f32
                }
            })
            .collect();
        Ok(Self { grid, max_distance, distance })
    }

    /// Distance field of a fused TSDF volume. Occupied means fused distance
    /// below zero or never observed.
    pub fn compute(tsdf: &TsdfGrid, max_distance: f64) -> Result<Self, VoxelError> {
        let occ: Vec<bool> = (0..tsdf.grid.len()).map(|lin| tsdf.occupied_for_esdf(lin)).collect();
        Self::from_occupancy(tsdf.grid.clone(), &occ, max_distance)
    }

    #[inline]
    pub fn distance(&self, lin: usize) -> f32 {
        self.distance[lin]
    }

    pub fn distances(&self) -> &[f32] {
        &self.distance
    }

    /// Clearance at an arbitrary point, looked up at the containing voxel.
    /// Points outside the grid report zero clearance.
    #[inline]
    pub fn distance_at_point(&self, p: &Vec3) -> f64 {
        match self.grid.index_of_point(p) {
            Some(idx) => self.distance[self.grid.linear(idx)] as f64,
            None => 0.0,
        }
    }
}

/// Exact squared Euclidean distance transform in lattice units.
fn squared_edt(occupied: &[bool], dims: [usize; 3]) -> Vec<i64> {
    let [nx, ny, nz] = dims;
    let mut f = vec![0i64; occupied.len()];

    // Pass 1, x axis: two linear sweeps give per-row distances in voxels.
    for z in 0..nz {
        for y in 0..ny {
            let base = nx * (y + ny * z);
            let mut d = INF_1D;
            for x in 0..nx {
                d = if occupied[base + x] { 0 } else { (d + 1).min(INF_1D) };
                f[base + x] = d;
            }
            d = INF_1D;
            for x in (0..nx).rev() {
                d = if occupied[base + x] { 0 } else { (d + 1).min(INF_1D) };
                let v = f[base + x].min(d);
                f[base + x] = (v * v).min(INF_SQ);
            }
        }
    }

    // Passes 2 and 3: lower envelope over columns.
    let mut scratch_f = vec![0i64; ny.max(nz)];
    let mut scratch_o = vec![0i64; ny.max(nz)];
    let mut v = vec![0usize; ny.max(nz)];
    let mut zb = vec![0f64; ny.max(nz) + 1];

    for z in 0..nz {
        for x in 0..nx {
            for y in 0..ny {
                scratch_f[y] = f[x + nx * (y + ny * z)];
            }
            envelope_1d(&scratch_f[..ny], &mut scratch_o, &mut v, &mut zb);
            for y in 0..ny {
                f[x + nx * (y + ny * z)] = scratch_o[y];
            }
        }
    }
    for y in 0..ny {
        for x in 0..nx {
            for z in 0..nz {
                scratch_f[z] = f[x + nx * (y + ny * z)];
            }
            envelope_1d(&scratch_f[..nz], &mut scratch_o, &mut v, &mut zb);
            for z in 0..nz {
                f[x + nx * (y + ny * z)] = scratch_o[z];
            }
        }
    }
    f
}

/// One-dimensional squared-distance transform: out[i] = min_q (i-q)^2 + f[q].
fn envelope_1d(f: &[i64], out: &mut [i64], v: &mut [usize], zb: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    let mut started = false;
    for q in 0..n {
        if f[q] >= INF_SQ {
            continue;
        }
        if !started {
            v[0] = q;
            zb[0] = f64::NEG_INFINITY;
            zb[1] = f64::INFINITY;
            started = true;
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as i64) - (f[p] + (p * p) as i64)) as f64
                / (2 * q - 2 * p) as f64;
            if s <= zb[k] {
                if k == 0 {
                    // Replace the only parabola.
                    v[0] = q;
                    zb[0] = f64::NEG_INFINITY;
                    zb[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                zb[k] = s;
                zb[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    if !started {
        out[..n].fill(INF_SQ);
        return;
    }
    let mut k = 0usize;
    for i in 0..n {
        while zb[k + 1] < i as f64 {
            k += 1;
        }
        let q = v[k];
        let d = i as i64 - q as i64;
        out[i] = (d * d + f[q]).min(INF_SQ);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(n * occupied) reference transform.
    fn brute_force_sq(occupied: &[bool], dims: [usize; 3]) -> Vec<i64> {
        let [nx, ny, nz] = dims;
        let occ: Vec<[i64; 3]> = (0..occupied.len())
            .filter(|&i| occupied[i])
            .map(|i| {
                let x = i % nx;
                let r = i / nx;
                [x as i64, (r % ny) as i64, (r / ny) as i64]
            })
            .collect();
        let mut out = vec![INF_SQ; occupied.len()];
        for z in 0..nz as i64 {
            for y in 0..ny as i64 {
                for x in 0..nx as i64 {
                    let mut best = INF_SQ;
                    for o in &occ {
                        let d = (x - o[0]) * (x - o[0])
                            + (y - o[1]) * (y - o[1])
                            + (z - o[2]) * (z - o[2]);
                        best = best.min(d);
                    }
                    out[(x + nx as i64 * (y + ny as i64 * z)) as usize] = best;
                }
            }
        }
        out
    }

    #[test]
    fn single_occupied_voxel_gives_euclidean_norms() {
        let grid = VoxelGrid::new(Vec3::zeros(), 0.05, [9, 9, 9]);
        let mut occ = vec![false; grid.len()];
        let seed = grid.linear([4, 4, 4]);
        occ[seed] = true;
        let esdf = EsdfGrid::from_occupancy(grid.clone(), &occ, 10.0).unwrap();
        for lin in 0..grid.len() {
            let idx = grid.unlinear(lin);
            let expect = ((idx[0] as f64 - 4.0).powi(2)
                + (idx[1] as f64 - 4.0).powi(2)
                + (idx[2] as f64 - 4.0).powi(2))
            .sqrt()
                * 0.05;
            assert!((esdf.distance(lin) as f64 - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn corridor_midline_is_half_width() {
        // Two walls 1 m apart along x; midline distance 0.5 within half a voxel.
        let grid = VoxelGrid::new(Vec3::zeros(), 0.05, [23, 5, 5]);
        // Walls exactly 20 voxels (1.0 m) apart.
        let mut occ = vec![false; grid.len()];
        for z in 0..5 {
            for y in 0..5 {
                occ[grid.linear([1, y, z])] = true;
                occ[grid.linear([21, y, z])] = true;
            }
        }
        let esdf = EsdfGrid::from_occupancy(grid.clone(), &occ, 10.0).unwrap();
        let mid = grid.linear([11, 2, 2]);
        assert!((esdf.distance(mid) as f64 - 0.5).abs() <= 0.025 + 1e-9);
    }

    #[test]
    fn no_occupied_voxels_caps_everywhere() {
        let grid = VoxelGrid::new(Vec3::zeros(), 0.05, [6, 6, 6]);
        let occ = vec![false; grid.len()];
        let esdf = EsdfGrid::from_occupancy(grid, &occ, 2.0).unwrap();
        assert!(esdf.distances().iter().all(|&d| d == 2.0));
    }

    #[test]
    fn max_distance_below_half_meter_rejected() {
        let grid = VoxelGrid::new(Vec3::zeros(), 0.05, [4, 4, 4]);
        let occ = vec![false; grid.len()];
        assert!(matches!(
            EsdfGrid::from_occupancy(grid, &occ, 0.3),
            Err(VoxelError::MaxDistanceTooSmall(_))
        ));
    }

    #[test]
    fn random_grids_match_brute_force_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..40 {
            let dims = [
                rng.random_range(3..14usize),
                rng.random_range(3..14usize),
                rng.random_range(3..14usize),
            ];
            let grid = VoxelGrid::new(Vec3::zeros(), 0.05, dims);
            let p: f64 = if case % 4 == 0 { 0.02 } else { rng.random_range(0.05..0.4) };
            let occ: Vec<bool> = (0..grid.len()).map(|_| rng.random_bool(p)).collect();
            let esdf = EsdfGrid::from_occupancy(grid.clone(), &occ, 50.0).unwrap();
            let brute = brute_force_sq(&occ, dims);
            for lin in 0..grid.len() {
                let expect = if brute[lin] >= INF_SQ {
                    50.0f32
                } else {
                    (((brute[lin] as f64).sqrt() * 0.05).min(50.0)) as f32
                };
                assert_eq!(esdf.distance(lin), expect, "mismatch at {lin} dims {dims:?}");
            }
        }
    }

    #[test]
    fn lattice_lipschitz_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = VoxelGrid::new(Vec3::zeros(), 0.05, [16, 12, 10]);
        let occ: Vec<bool> = (0..grid.len()).map(|_| rng.random_bool(0.08)).collect();
        let esdf = EsdfGrid::from_occupancy(grid.clone(), &occ, 5.0).unwrap();
        let h = grid.voxel_size;
        for lin in 0..grid.len() {
            let [x, y, z] = grid.unlinear(lin);
            for (dx, dy, dz) in [(1i64, 0i64, 0i64), (0, 1, 0), (0, 0, 1), (1, 1, 0), (1, 1, 1)] {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                let nz = z as i64 + dz;
                if nx >= grid.dims[0] as i64 || ny >= grid.dims[1] as i64 || nz >= grid.dims[2] as i64
                {
                    continue;
                }
                let nlin = grid.linear([nx as usize, ny as usize, nz as usize]);
                let step = ((dx * dx + dy * dy + dz * dz) as f64).sqrt() * h;
                let diff = (esdf.distance(lin) as f64 - esdf.distance(nlin) as f64).abs();
                // Slack covers single-precision storage rounding only.
                assert!(diff <= step + 1e-6, "lipschitz violated: {diff} > {step}");
            }
        }
    }
}
