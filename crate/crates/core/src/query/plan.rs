//! Shortest-path planning over the place graph and object search.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use super::QueryError;
use crate::graph::{DynamicSceneGraph, NodeAttr, Relation};
use crate::math::Vec3;

#[derive(Clone, Debug, PartialEq)]
pub struct PathResult {
    /// Place node ids from start to goal inclusive.
    pub places: Vec<u64>,
    /// Total Euclidean length in meters.
    pub length: f64,
}

struct HeapEntry {
    cost: f64,
    node: u64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.node == other.node
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap: reverse on cost, then node id for determinism.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

fn place_position(graph: &DynamicSceneGraph, id: u64) -> Result<Vec3, QueryError> {
    match graph.node(id) {
        Some(node) => match &node.attr {
            NodeAttr::Place(p) => Ok(p.position),
            _ => Err(QueryError::NotAPlace(id)),
        },
        None => Err(QueryError::NodeNotFound(id)),
    }
}

/// Dijkstra over traversable edges from one source; returns distance and
/// predecessor maps over all reachable places.
fn dijkstra(
    graph: &DynamicSceneGraph,
    from: u64,
) -> (BTreeMap<u64, f64>, BTreeMap<u64, u64>) {
    let mut adjacency: BTreeMap<u64, Vec<(u64, f64)>> = BTreeMap::new();
    for (_, e) in graph.edges() {
        if e.relation != Relation::Traversable {
            continue;
        }
        let (a, b) = (e.src.id, e.dst.id);
        let (pa, pb) = match (place_position(graph, a), place_position(graph, b)) {
            (Ok(pa), Ok(pb)) => (pa, pb),
            _ => continue,
        };
        let w = (pa - pb).norm();
        adjacency.entry(a).or_default().push((b, w));
        adjacency.entry(b).or_default().push((a, w));
    }

    let mut dist: BTreeMap<u64, f64> = BTreeMap::new();
    let mut prev: BTreeMap<u64, u64> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(from, 0.0);
    heap.push(HeapEntry { cost: 0.0, node: from });
    while let Some(HeapEntry { cost, node }) = heap.pop() {
        if cost > dist[&node] {
            continue;
        }
        if let Some(neighbors) = adjacency.get(&node) {
            for &(next, w) in neighbors {
                let candidate = cost + w;
                if dist.get(&next).is_none_or(|&d| candidate < d) {
                    dist.insert(next, candidate);
                    prev.insert(next, node);
                    heap.push(HeapEntry { cost: candidate, node: next });
                }
            }
        }
    }
    (dist, prev)
}

fn reconstruct(prev: &BTreeMap<u64, u64>, from: u64, to: u64) -> Vec<u64> {
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = prev[&cur];
        path.push(cur);
    }
    path.reverse();
    path
}

/// Shortest path between two places by Euclidean edge weights.
pub fn plan_path(graph: &DynamicSceneGraph, from: u64, to: u64) -> Result<PathResult, QueryError> {
    place_position(graph, from)?;
    place_position(graph, to)?;
    if from == to {
        return Ok(PathResult { places: vec![from], length: 0.0 });
    }
    let (dist, prev) = dijkstra(graph, from);
    match dist.get(&to) {
        Some(&length) => Ok(PathResult { places: reconstruct(&prev, from, to), length }),
        None => Err(QueryError::Unreachable),
    }
}

/// Plan to the closest object matching an id or class: among matching
/// objects, the one whose proximal place has the shortest path wins (ties to
/// the lowest object id). Returns the path and the chosen object.
pub fn plan_to_object(
    graph: &DynamicSceneGraph,
    object: Option<u64>,
    class: Option<u16>,
    from: u64,
) -> Result<(PathResult, u64), QueryError> {
    place_position(graph, from)?;
    let mut candidates: Vec<(u64, u64)> = Vec::new(); // (object, place)
    for (node, attr) in graph.objects() {
        if let Some(id) = object {
            if node.id.id != id {
                continue;
            }
        }
        if let Some(c) = class {
            if attr.class != c {
                continue;
            }
        }
        if let Some(place) = graph.parent_place(node.id.id) {
            candidates.push((node.id.id, place.id));
        }
    }
    if candidates.is_empty() {
        return Err(QueryError::NoMatchingObject);
    }

    let (dist, prev) = dijkstra(graph, from);
    let mut best: Option<(f64, u64, u64)> = None;
    for (obj, place) in candidates {
        let Some(&d) = dist.get(&place) else { continue };
        let better = match &best {
            None => true,
            Some((bd, bo, _)) => d < *bd || (d == *bd && obj < *bo),
        };
        if better {
            best = Some((d, obj, place));
        }
    }
    match best {
        Some((length, obj, place)) => Ok((
            PathResult { places: reconstruct(&prev, from, place), length },
            obj,
        )),
        None => Err(QueryError::Unreachable),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::*;
    use crate::math::Pose;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn add_place(g: &mut DynamicSceneGraph, p: [f64; 3]) -> NodeId {
        g.add_node(
            Layer::PlacesStructures,
            NodeAttr::Place(PlaceAttr { position: Vec3::new(p[0], p[1], p[2]), room: None }),
        )
        .unwrap()
    }

    #[test]
    fn trivial_and_corridor_paths() {
        let mut g = DynamicSceneGraph::new();
        let ids: Vec<NodeId> =
            (0..5).map(|i| add_place(&mut g, [i as f64, 0.0, 0.0])).collect();
        for w in ids.windows(2) {
            g.add_edge(w[0], w[1], Relation::Traversable).unwrap();
        }
        let same = plan_path(&g, ids[2].id, ids[2].id).unwrap();
        assert_eq!(same.places, vec![ids[2].id]);
        assert_eq!(same.length, 0.0);

        let path = plan_path(&g, ids[0].id, ids[4].id).unwrap();
        assert_eq!(path.places, ids.iter().map(|n| n.id).collect::<Vec<_>>());
        assert!((path.length - 4.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_place_is_error() {
        let g = DynamicSceneGraph::new();
        assert!(matches!(plan_path(&g, 1, 2), Err(QueryError::NodeNotFound(1))));
    }

    /// Bellman-Ford oracle over the same adjacency.
    fn bellman_ford(g: &DynamicSceneGraph, from: u64, to: u64) -> Option<f64> {
        let places: Vec<u64> = g.places().map(|(n, _)| n.id.id).collect();
        let index: BTreeMap<u64, usize> =
            places.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut edges = Vec::new();
        for (_, e) in g.edges() {
            if e.relation != Relation::Traversable {
                continue;
            }
            let (pa, pb) = match (&g.node(e.src.id).unwrap().attr, &g.node(e.dst.id).unwrap().attr)
            {
                (NodeAttr::Place(a), NodeAttr::Place(b)) => (a.position, b.position),
                _ => continue,
            };
            let w = (pa - pb).norm();
            edges.push((index[&e.src.id], index[&e.dst.id], w));
            edges.push((index[&e.dst.id], index[&e.src.id], w));
        }
        let mut dist = vec![f64::INFINITY; places.len()];
        dist[index[&from]] = 0.0;
        for _ in 0..places.len() {
            let mut changed = false;
            for &(a, b, w) in &edges {
                if dist[a] + w < dist[b] {
                    dist[b] = dist[a] + w;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let d = dist[index[&to]];
        d.is_finite().then_some(d)
    }

    #[test]
    fn random_graphs_match_bellman_ford() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..25 {
            let mut g = DynamicSceneGraph::new();
            let n = rng.random_range(2..60);
            let ids: Vec<NodeId> = (0..n)
                .map(|_| {
                    add_place(
                        &mut g,
                        [
                            rng.random_range(-10.0..10.0),
                            rng.random_range(-10.0..10.0),
                            rng.random_range(0.0..3.0),
                        ],
                    )
                })
                .collect();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(0.15) {
                        g.add_edge(ids[i], ids[j], Relation::Traversable).unwrap();
                    }
                }
            }
            let from = ids[rng.random_range(0..n)].id;
            let to = ids[rng.random_range(0..n)].id;
            match (plan_path(&g, from, to), bellman_ford(&g, from, to)) {
                (Ok(path), Some(oracle)) => {
                    assert!((path.length - oracle).abs() <= 1e-9, "length mismatch");
                    // The returned walk must be valid and consistent.
                    let mut walked = 0.0;
                    for w in path.places.windows(2) {
                        assert!(g.traversable_neighbors(w[0]).contains(&w[1]));
                        let (pa, pb) = match (
                            &g.node(w[0]).unwrap().attr,
                            &g.node(w[1]).unwrap().attr,
                        ) {
                            (NodeAttr::Place(a), NodeAttr::Place(b)) => (a.position, b.position),
                            _ => unreachable!(),
                        };
                        walked += (pa - pb).norm();
                    }
                    if path.places.len() > 1 {
                        assert!((walked - path.length).abs() < 1e-9);
                    }
                }
                (Err(QueryError::Unreachable), None) => {}
                (ours, oracle) => {
                    panic!("disagreement: ours = {ours:?}, oracle = {oracle:?}")
                }
            }
        }
    }

    fn scene_with_two_cups() -> (DynamicSceneGraph, Vec<u64>, Vec<u64>) {
        let mut g = DynamicSceneGraph::new();
        // Chain of 3 places; a cup near each end.
        let p0 = add_place(&mut g, [0.0, 0.0, 1.0]);
        let p1 = add_place(&mut g, [2.0, 0.0, 1.0]);
        let p2 = add_place(&mut g, [4.0, 0.0, 1.0]);
        g.add_edge(p0, p1, Relation::Traversable).unwrap();
        g.add_edge(p1, p2, Relation::Traversable).unwrap();
        let mut cups = Vec::new();
        for (place, x) in [(p0, 0.3), (p2, 4.3)] {
            let cup = g
                .add_node(
                    Layer::ObjectsAgents,
                    NodeAttr::Object(ObjectAttr {
                        pose: Pose::from_translation(Vec3::new(x, 0.3, 0.8)),
                        aabb: crate::math::Aabb::new(
                            Vec3::new(x - 0.05, 0.25, 0.75),
                            Vec3::new(x + 0.05, 0.35, 0.9),
                        )
                        .unwrap(),
                        class: 12,
                        known_shape: None,
                        vertices: vec![],
                    }),
                )
                .unwrap();
            g.add_edge(cup, place, Relation::Proximal).unwrap();
            cups.push(cup.id);
        }
        (g, vec![p0.id, p1.id, p2.id], cups)
    }

    #[test]
    fn nearest_object_by_path_wins() {
        let (g, places, cups) = scene_with_two_cups();
        // From the middle place both cups are 2 m away; the lower id wins.
        let (_, obj) = plan_to_object(&g, None, Some(12), places[1]).unwrap();
        assert_eq!(obj, cups[0]);
        // From the far end the nearer-by-path cup wins (exhaustive check of
        // both candidates).
        let (path, obj) = plan_to_object(&g, None, Some(12), places[2]).unwrap();
        assert_eq!(obj, cups[1]);
        assert_eq!(path.length, 0.0);
        let (path0, _) = plan_path(&g, places[2], places[0])
            .map(|p| (p, ()))
            .unwrap();
        assert!(path0.length > 0.0);
    }

    #[test]
    fn disconnected_object_is_unreachable() {
        let (mut g, places, _) = scene_with_two_cups();
        let lonely_place = add_place(&mut g, [100.0, 0.0, 1.0]);
        let obj = g
            .add_node(
                Layer::ObjectsAgents,
                NodeAttr::Object(ObjectAttr {
                    pose: Pose::from_translation(Vec3::new(100.0, 0.0, 0.5)),
                    aabb: crate::math::Aabb::new(
                        Vec3::new(99.9, -0.1, 0.4),
                        Vec3::new(100.1, 0.1, 0.6),
                    )
                    .unwrap(),
                    class: 77,
                    known_shape: None,
                    vertices: vec![],
                }),
            )
            .unwrap();
        g.add_edge(obj, lonely_place, Relation::Proximal).unwrap();
        assert!(matches!(
            plan_to_object(&g, None, Some(77), places[0]),
            Err(QueryError::Unreachable)
        ));
        assert!(matches!(
            plan_to_object(&g, None, Some(99), places[0]),
            Err(QueryError::NoMatchingObject)
        ));
    }
}
