//! Routing-path selection over the bus-density graph.
//!
//! Candidates are the `k` lightest loopless paths (Yen's algorithm). Among
//! them the planner picks the path with the highest consistency score.
//!
//! All orderings are total: paths compare by total weight, then by their
//! street-id sequence. Spur searches return the smallest path under that order
//! so the enumeration is reproducible even with tied weights.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::bus_network::{LineCoverage, RoutingGraph, W_MAX};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::ids::{IntersectionId, StreetId};
use crate::street_map::StreetGraph;

pub const DEFAULT_K: usize = 5;

/// Consistency assigned to single-street paths, which have no transitions
/// and therefore cannot deviate at a turn.
pub const SINGLE_STREET_PPC: f64 = 2.0;

/// Loopless vertex-to-vertex path with its summed weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPath {
    pub streets: Vec<StreetId>,
    pub vertices: Vec<IntersectionId>,
    pub total_weight: f64,
}

impl WeightedPath {
    fn order(&self, other: &Self) -> Ordering {
        self.total_weight
            .total_cmp(&other.total_weight)
            .then_with(|| self.streets.cmp(&other.streets))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutingPath {
    pub streets: Vec<StreetId>,
    pub total_weight: f64,
    pub ppc: f64,
    pub src_vertex: IntersectionId,
    pub dst_vertex: IntersectionId,
}

fn path_weight(graph: &RoutingGraph, streets: &[StreetId]) -> f64 {
    streets
        .iter()
        .map(|&s| graph.weight(s).expect("street from graph"))
        .sum()
}

struct Dist(f64);

impl PartialEq for Dist {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for Dist {}
impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn same_length(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Lightest path from `from` to `to` avoiding banned vertices and streets,
/// smallest in street-id order among equally light paths.
fn lightest_path(
    graph: &RoutingGraph,
    from: IntersectionId,
    to: IntersectionId,
    banned_vertices: &HashSet<IntersectionId>,
    banned_streets: &HashSet<StreetId>,
) -> Option<WeightedPath> {
    let map = graph.map();
    // Distances to `to`, computed backwards.
    let mut dist: BTreeMap<IntersectionId, f64> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(to, 0.0);
    heap.push(Reverse((Dist(0.0), to)));
    while let Some(Reverse((Dist(d), u))) = heap.pop() {
        if d > dist[&u] {
            continue;
        }
        for &sid in map.incident(u) {
            if banned_streets.contains(&sid) {
                continue;
            }
            let v = map.street(sid).ok()?.other_end(u)?;
            if banned_vertices.contains(&v) {
                continue;
            }
            let nd = d + graph.weight(sid).ok()?;
            if dist.get(&v).is_none_or(|&old| nd < old) {
                dist.insert(v, nd);
                heap.push(Reverse((Dist(nd), v)));
            }
        }
    }
    dist.get(&from)?;

    // Greedy descent along the shortest-path DAG, smallest street id first.
    let mut streets = Vec::new();
    let mut vertices = vec![from];
    let mut at = from;
    while at != to {
        let here = dist[&at];
        let step = map.incident(at).iter().find_map(|&sid| {
            if banned_streets.contains(&sid) {
                return None;
            }
            let v = map.street(sid).ok()?.other_end(at)?;
            if banned_vertices.contains(&v) || vertices.contains(&v) {
                return None;
            }
            let dv = *dist.get(&v)?;
            let w = graph.weight(sid).ok()?;
            (dv < here && same_length(here, w + dv)).then_some((sid, v))
        })?;
        streets.push(step.0);
        vertices.push(step.1);
        at = step.1;
    }
    let total_weight = path_weight(graph, &streets);
    Some(WeightedPath {
        streets,
        vertices,
        total_weight,
    })
}

/// Up to `k` loopless paths from `src` to `dst` in nondecreasing weight order.
///
/// An empty result means the endpoints are disconnected.
pub fn k_min_weight_paths(
    graph: &RoutingGraph,
    src: IntersectionId,
    dst: IntersectionId,
    k: usize,
) -> Result<Vec<WeightedPath>> {
    let map = graph.map();
    for v in [src, dst] {
        map.intersection(v)?;
    }
    if src == dst {
        return Err(Error::SameEndpoints(src));
    }
    if k == 0 {
        return Err(Error::InvalidK);
    }

    let none_v = HashSet::new();
    let none_s = HashSet::new();
    let Some(first) = lightest_path(graph, src, dst, &none_v, &none_s) else {
        return Ok(Vec::new());
    };
    let mut found = vec![first];
    let mut candidates: Vec<WeightedPath> = Vec::new();
    let mut seen: HashSet<Vec<StreetId>> = HashSet::new();
    seen.insert(found[0].streets.clone());

    while found.len() < k {
        let last = found.last().expect("non-empty").clone();
        for i in 0..last.streets.len() {
            let spur = last.vertices[i];
            let root_streets = &last.streets[..i];
            let banned_streets: HashSet<StreetId> = found
                .iter()
                .filter(|p| p.streets.len() > i && &p.streets[..i] == root_streets)
                .map(|p| p.streets[i])
                .collect();
            let banned_vertices: HashSet<IntersectionId> =
                last.vertices[..i].iter().copied().collect();
            let Some(tail) = lightest_path(graph, spur, dst, &banned_vertices, &banned_streets)
            else {
                continue;
            };
            let mut streets = root_streets.to_vec();
            streets.extend_from_slice(&tail.streets);
            if !seen.insert(streets.clone()) {
                continue;
            }
            let mut vertices = last.vertices[..i].to_vec();
            vertices.extend_from_slice(&tail.vertices);
            let total_weight = path_weight(graph, &streets);
            candidates.push(WeightedPath {
                streets,
                vertices,
                total_weight,
            });
        }
        let Some(best) = candidates
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.order(b.1))
            .map(|(i, _)| i)
        else {
            break;
        };
        found.push(candidates.swap_remove(best));
    }
    Ok(found)
}

/// Consistency of a candidate path, treating single-street paths as fully
/// consistent.
pub fn path_consistency(coverage: &LineCoverage, streets: &[StreetId]) -> Result<f64> {
    if streets.len() == 1 {
        return Ok(SINGLE_STREET_PPC);
    }
    coverage.ppc(streets)
}

/// Picks the candidate with maximal consistency among the `k` lightest paths.
///
/// Candidates crossing an uncovered street ([`W_MAX`]) are only eligible when
/// every candidate does. Ties go to the lighter path, then to the smaller
/// street-id sequence.
pub fn select_routing_path(
    graph: &RoutingGraph,
    coverage: &LineCoverage,
    src: IntersectionId,
    dst: IntersectionId,
    k: usize,
) -> Result<RoutingPath> {
    let mut candidates = k_min_weight_paths(graph, src, dst, k)?;
    if candidates.iter().any(|c| c.total_weight < W_MAX) {
        candidates.retain(|c| c.total_weight < W_MAX);
    }
    let scored = candidates
        .into_iter()
        .map(|c| Ok((path_consistency(coverage, &c.streets)?, c)))
        .collect::<Result<Vec<_>>>()?;
    let (ppc, best) = scored
        .into_iter()
        .max_by(|(pa, a), (pb, b)| pa.total_cmp(pb).then_with(|| b.order(a)))
        .ok_or(Error::NoPath(src, dst))?;
    Ok(RoutingPath {
        streets: best.streets,
        total_weight: best.total_weight,
        ppc,
        src_vertex: src,
        dst_vertex: dst,
    })
}

/// Nearest intersection to `p`, lowest id on ties.
pub fn nearest_intersection(map: &StreetGraph, p: Vec2) -> Result<IntersectionId> {
    map.intersections()
        .map(|i| (i.position.distance(p), i.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
        .ok_or(Error::EmptyMap)
}

/// Maps source and destination positions onto their nearest intersections.
pub fn resolve_endpoints(
    map: &StreetGraph,
    src_pos: Vec2,
    dst_pos: Vec2,
) -> Result<(IntersectionId, IntersectionId)> {
    if !src_pos.is_finite() || !dst_pos.is_finite() {
        return Err(Error::InvalidPath("non-finite endpoint position".into()));
    }
    Ok((
        nearest_intersection(map, src_pos)?,
        nearest_intersection(map, dst_pos)?,
    ))
}
