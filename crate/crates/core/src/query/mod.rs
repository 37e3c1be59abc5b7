//! Actionable queries over a built scene graph: hierarchical collision
//! checks, topological path planning, time-aware agent lookup, object
//! search, and branch pruning.

mod bvh;
mod plan;
mod prune;
mod temporal;

pub use bvh::{build_bvh, collision_query, Bvh, QueryShape};
pub use plan::{plan_path, plan_to_object, PathResult};
pub use prune::{prune_branch, PruneReport};
pub use temporal::agent_at_time;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum QueryError {
    #[error("node {0} not found")]
    NodeNotFound(u64),
    #[error("node {0} is not a place")]
    NotAPlace(u64),
    #[error("node {0} is not an agent")]
    NotAnAgent(u64),
    #[error("no object matches the query")]
    NoMatchingObject,
    #[error("no path: target is unreachable")]
    Unreachable,
    #[error("timestamp {t} outside the track span [{lo}, {hi}]")]
    OutsideTrackSpan { t: f64, lo: f64, hi: f64 },
    #[error("agent {0} has no states")]
    EmptyTrack(u64),
    #[error("cannot prune from layer {0:?}; only layers 2-4 can be pruned")]
    UnprunableLayer(crate::graph::Layer),
    #[error("graph has no building node")]
    NoBuilding,
}
