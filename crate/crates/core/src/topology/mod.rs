//! Topology parsing: free-space place graphs, the near-ceiling distance-field
//! section, room segmentation and labeling, and structure extraction.

mod places;
mod rooms;
mod structures;

pub use places::{extract_places, PlaceGraph, PlaceNode};
pub use rooms::{
    detect_ceiling, esdf_section, label_places, segment_rooms, write_section_pgm, EsdfSection,
    LabelReport, RoomPartition,
};
pub use structures::extract_structures;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum TopologyError {
    #[error("no vertices labeled as ceiling")]
    NoCeiling,
    #[error("section height {z} outside the grid [{lo}, {hi}]")]
    SectionOutOfBounds { z: f64, lo: f64, hi: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
