//! Scan streams (JSON-lines, one scan per line) and binary grid dumps.
//!
//! Dump layout, little-endian: magic `VGD1`, origin (3 x f64), voxel_size
//! (f64), dims (3 x u32), then float32 distance and uint16 weight arrays.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Scan, TsdfGrid, VoxelError, VoxelGrid};
use crate::math::Vec3;

const DUMP_MAGIC: &[u8; 4] = b"VGD1";

pub fn write_scans(path: &Path, scans: &[Scan]) -> Result<(), VoxelError> {
    let mut w = BufWriter::new(File::create(path)?);
    for scan in scans {
        serde_json::to_writer(&mut w, scan)
            .map_err(|e| VoxelError::ScanParse { line: 0, source: e })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scans(path: &Path) -> Result<Vec<Scan>, VoxelError> {
    let r = BufReader::new(File::open(path)?);
    let mut scans = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let scan = serde_json::from_str(&line)
            .map_err(|e| VoxelError::ScanParse { line: i + 1, source: e })?;
        scans.push(scan);
    }
    Ok(scans)
}

/// Write a grid's distance and weight fields.
pub fn write_grid_dump(
    path: &Path,
    grid: &VoxelGrid,
    distance: &[f32],
    weight: &[u16],
) -> Result<(), VoxelError> {
    assert_eq!(distance.len(), grid.len());
    assert_eq!(weight.len(), grid.len());
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DUMP_MAGIC)?;
    for ax in 0..3 {
        w.write_f64::<LittleEndian>(grid.origin[ax])?;
    }
    w.write_f64::<LittleEndian>(grid.voxel_size)?;
    for &d in &grid.dims {
        w.write_u32::<LittleEndian>(d as u32)?;
    }
    for &d in distance {
        w.write_f32::<LittleEndian>(d)?;
    }
    for &wt in weight {
        w.write_u16::<LittleEndian>(wt)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_dump(path: &Path) -> Result<(VoxelGrid, Vec<f32>, Vec<u16>), VoxelError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(VoxelError::BadDump("bad magic".into()));
    }
    let origin = Vec3::new(
        r.read_f64::<LittleEndian>()?,
        r.read_f64::<LittleEndian>()?,
        r.read_f64::<LittleEndian>()?,
    );
    let voxel_size = r.read_f64::<LittleEndian>()?;
    if !(voxel_size.is_finite() && voxel_size > 0.0) {
        return Err(VoxelError::BadDump(format!("bad voxel size {voxel_size}")));
    }
    let dims = [
        r.read_u32::<LittleEndian>()? as usize,
        r.read_u32::<LittleEndian>()? as usize,
        r.read_u32::<LittleEndian>()? as usize,
    ];
    if dims.iter().any(|&d| d == 0) || dims.iter().product::<usize>() > (1 << 31) {
        return Err(VoxelError::BadDump(format!("bad dims {dims:?}")));
    }
    let grid = VoxelGrid::new(origin, voxel_size, dims);
    let n = grid.len();
    let mut distance = vec![0f32; n];
    r.read_f32_into::<LittleEndian>(&mut distance)
        .map_err(|_| VoxelError::BadDump("truncated distance array".into()))?;
    let mut weight = vec![0u16; n];
    r.read_u16_into::<LittleEndian>(&mut weight)
        .map_err(|_| VoxelError::BadDump("truncated weight array".into()))?;
    Ok((grid, distance, weight))
}

impl TsdfGrid {
    pub fn write_dump(&self, path: &Path) -> Result<(), VoxelError> {
        let weights: Vec<u16> = self.weights().iter().map(|&w| w.min(65535.0) as u16).collect();
        write_grid_dump(path, &self.grid, self.distances(), &weights)
    }
}
