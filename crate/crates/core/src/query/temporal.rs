//! Time-aware agent queries.

use super::QueryError;
use crate::graph::{DynamicSceneGraph, NodeAttr, NodeId};
use crate::math::Pose;

/// Agent pose at time `t` (smoothed states; linear translation, shortest-arc
/// rotation interpolation between the bracketing states), plus the nearest
/// place and that place's room.
pub fn agent_at_time(
    graph: &DynamicSceneGraph,
    agent: u64,
    t: f64,
) -> Result<(Pose, Option<NodeId>, Option<NodeId>), QueryError> {
    let node = graph.node(agent).ok_or(QueryError::NodeNotFound(agent))?;
    let NodeAttr::Agent(attr) = &node.attr else {
        return Err(QueryError::NotAnAgent(agent));
    };
    if attr.states.is_empty() {
        return Err(QueryError::EmptyTrack(agent));
    }
    let (lo, hi) = (attr.states[0].t, attr.states[attr.states.len() - 1].t);
    if t < lo || t > hi {
        return Err(QueryError::OutsideTrackSpan { t, lo, hi });
    }
    let pose = match attr.states.binary_search_by(|s| s.t.partial_cmp(&t).unwrap()) {
        Ok(i) => attr.states[i].pose,
        Err(i) => {
            let (a, b) = (&attr.states[i - 1], &attr.states[i]);
            let alpha = (t - a.t) / (b.t - a.t);
            a.pose.interpolate(&b.pose, alpha)
        }
    };

    // Nearest place to the interpolated position (ties to the lowest id).
    let mut nearest: Option<(f64, NodeId)> = None;
    for (pnode, pattr) in graph.places() {
        let d = (pattr.position - pose.translation).norm();
        let better = match &nearest {
            None => true,
            Some((bd, bid)) => d < *bd || (d == *bd && pnode.id.id < bid.id),
        };
        if better {
            nearest = Some((d, pnode.id));
        }
    }
    let place = nearest.map(|(_, id)| id);
    let room = place.and_then(|p| graph.place_room(p.id));
    Ok((pose, place, room))
}
