//! Object parsing: instance clustering, centroid/box estimation, 3D corner
//! keypoints, and outlier-robust rigid registration against a CAD catalog.

mod cluster;
mod keypoints;
mod register;

pub use cluster::{euclidean_cluster, fit_centroid_aabb};
pub use keypoints::{estimate_normals, harris_keypoints_3d, HarrisConfig};
pub use register::{
    fit_known_shape, match_all, max_clique, robust_register, FitOutcome, RegisterError,
    Registration,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;

/// Default clustering threshold: twice the default voxel size.
pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 0.1;
/// Default registration noise bound: twice the default voxel size.
pub const DEFAULT_NOISE_BOUND: f64 = 0.1;

#[derive(Error, Debug)]
pub enum ObjectError {
    #[error("cad catalog io: {0}")]
    Io(#[from] std::io::Error),
    #[error("cad model parse ({path}): {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("cad model {0} has fewer than 10 points")]
    TooFewCadPoints(String),
}

/// Connected set of same-class surface points.
#[derive(Clone, Debug)]
pub struct PointCluster {
    pub points: Vec<Vec3>,
    pub class: u16,
}

/// Catalog entry: a point-sampled model in its own frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CadModel {
    pub id: String,
    pub class: u16,
    pub points: Vec<Vec3>,
}

impl CadModel {
    pub fn validate(&self) -> Result<(), ObjectError> {
        if self.points.len() < 10 {
            return Err(ObjectError::TooFewCadPoints(self.id.clone()));
        }
        Ok(())
    }
}

/// Load every `*.json` point model in a directory, sorted by id.
pub fn load_catalog(dir: &std::path::Path) -> Result<Vec<CadModel>, ObjectError> {
    let mut models = Vec::new();
    if !dir.exists() {
        return Ok(models);
    }
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let text = std::fs::read_to_string(&path)?;
        let model: CadModel = serde_json::from_str(&text).map_err(|source| ObjectError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        model.validate()?;
        models.push(model);
    }
    models.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(models)
}
