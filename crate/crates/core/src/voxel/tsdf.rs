//! Raycast TSDF fusion with dynamic masking.

use super::{Scan, TsdfGrid, VoxelError};

/// Integrate one scan into the volume.
///
/// Unmasked rays apply the standard truncated update: every traversed voxel
/// out to `range + truncation` receives a weighted running average of the
/// clamped along-ray distance (weight +1 per observation), and voxels inside
/// the truncation band additionally accumulate the ray's semantic label.
///
/// Rays flagged as dynamic apply free-space updates only, strictly in front
/// of `range - truncation`; nothing inside the band of the masked surface is
/// touched, so moving agents never burn into the map.
///
/// The ray is marched at half-voxel steps with consecutive-voxel
/// deduplication, so each ray updates any given voxel at most once.
/// Out-of-bounds samples are skipped.
pub fn integrate_scan(tsdf: &mut TsdfGrid, scan: &Scan) -> Result<(), VoxelError> {
    let tau = tsdf.truncation;
    let step = tsdf.grid.voxel_size * 0.5;
    let origin = scan.pose.translation;
    if !origin.iter().all(|c| c.is_finite()) {
        return Err(VoxelError::NonFinite("sensor position"));
    }

    for ray in &scan.rays {
        if !ray.dir.iter().all(|c| c.is_finite()) {
            return Err(VoxelError::NonFinite("ray direction"));
        }
        if !ray.range.is_finite() || ray.range <= 0.0 {
            return Err(VoxelError::BadRange);
        }
        if (ray.dir.norm() - 1.0).abs() > 1e-6 {
            return Err(VoxelError::BadDirection);
        }
        let dir = scan.pose.rotation * ray.dir;

        let t_end = if ray.mask { ray.range - tau } else { ray.range + tau };
        if t_end <= 0.0 {
            continue;
        }

        let mut last_lin = usize::MAX;
        let mut k = 0u32;
        loop {
            let t = k as f64 * step;
            // Masked rays stop strictly before the band; unmasked rays
            // traverse through it.
            if ray.mask {
                if t >= t_end {
                    break;
                }
            } else if t > t_end {
                break;
            }
            k += 1;

            let p = origin + dir * t;
            let Some(idx) = tsdf.grid.index_of_point(&p) else { continue };
            let lin = tsdf.grid.linear(idx);
            if lin == last_lin {
                continue;
            }
            last_lin = lin;

            let sdf = (ray.range - t).clamp(-tau, tau);
            tsdf.fuse(lin, sdf);
            if !ray.mask && (ray.range - t).abs() <= tau {
                tsdf.bump_label(lin, ray.label);
            }
        }
    }
    Ok(())
}
