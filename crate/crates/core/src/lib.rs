//! Library for building, validating, and querying layered 3D dynamic scene
//! graphs from desk-scale simulated sensor streams.
//!
//! The pipeline runs: volumetric fusion with dynamic masking -> labeled
//! surface + Euclidean distance field -> object parsing (clustering,
//! keypoints, robust registration) -> place/structure/room topology ->
//! agent pose-graph tracking -> an actionable scene graph supporting
//! collision, planning, and time-aware queries.

pub mod agents;
pub mod graph;
pub mod math;
pub mod objects;
pub mod query;
pub mod sim;
pub mod topology;
pub mod voxel;
