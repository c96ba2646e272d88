//! Bus lines and the static probability model built on their trajectories.
//!
//! For a line `b` and street `r`, the appearance probability is
//! `P_b(r) = L_r / L_b` when `r` is on the trajectory and 0 otherwise. The
//! street probability averages this over all lines, `P_r = Σ_{b ∈ B_r}
//! P_b(r) / N_BUS`, and the routing-graph weight is its reciprocal.
//!
//! Street consistency `PSC(i→j) = n_ij / N_i` counts lines through both
//! adjoining streets against lines through `i`; path consistency combines the
//! mean and the product of the transition scores along a street sequence.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{IntersectionId, LineId, StreetId};
use crate::street_map::StreetGraph;

/// Weight assigned to streets that no bus line covers.
pub const W_MAX: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusLine {
    pub id: LineId,
    /// Street ids in driving order; a walk in the street graph.
    #[serde(rename = "streets")]
    pub trajectory: Vec<StreetId>,
    #[serde(rename = "headway_s")]
    pub headway: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinesFile {
    pub lines: Vec<BusLine>,
}

pub fn load_lines(source: &str) -> Result<Vec<BusLine>> {
    let file: LinesFile = serde_json::from_str(source)?;
    Ok(file.lines)
}

pub fn lines_to_json(lines: &[BusLine]) -> String {
    serde_json::to_string_pretty(&LinesFile {
        lines: lines.to_vec(),
    })
    .expect("line serialization is infallible")
}

impl BusLine {
    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidLine {
            line: self.id,
            reason: reason.into(),
        }
    }

    /// Intersections visited by the trajectory, one more than the number of
    /// streets. Fails when the street sequence is not a walk on `graph`.
    pub fn walk(&self, graph: &StreetGraph) -> Result<Vec<IntersectionId>> {
        let Some(&first) = self.trajectory.first() else {
            return Err(self.invalid("empty trajectory"));
        };
        let s0 = graph
            .street(first)
            .map_err(|_| self.invalid(format!("unknown street {first}")))?;
        let start = match self.trajectory.get(1) {
            None => s0.a,
            Some(&next) => {
                let s1 = graph
                    .street(next)
                    .map_err(|_| self.invalid(format!("unknown street {next}")))?;
                if s1.touches(s0.b) && next != first {
                    s0.a
                } else if s1.touches(s0.a) && next != first {
                    s0.b
                } else {
                    return Err(self.invalid(format!("streets {first} and {next} do not adjoin")));
                }
            }
        };
        let mut vertices = Vec::with_capacity(self.trajectory.len() + 1);
        vertices.push(start);
        let mut at = start;
        let mut prev: Option<StreetId> = None;
        for &sid in &self.trajectory {
            let s = graph
                .street(sid)
                .map_err(|_| self.invalid(format!("unknown street {sid}")))?;
            if prev == Some(sid) {
                return Err(self.invalid(format!("street {sid} repeated back to back")));
            }
            at = s.other_end(at).ok_or_else(|| {
                self.invalid(format!(
                    "street {sid} does not continue the walk at {at} (after {})",
                    prev.map(|p| p.to_string()).unwrap_or_default()
                ))
            })?;
            vertices.push(at);
            prev = Some(sid);
        }
        Ok(vertices)
    }

    /// `L_b`: total length of the walk, counting repeated streets each time.
    pub fn length(&self, graph: &StreetGraph) -> Result<f64> {
        self.trajectory
            .iter()
            .map(|&s| graph.street(s).map(|s| s.length()))
            .sum()
    }

    pub fn repeats_streets(&self) -> bool {
        let mut seen = HashSet::new();
        !self.trajectory.iter().all(|s| seen.insert(*s))
    }

    pub fn passes(&self, street: StreetId) -> bool {
        self.trajectory.contains(&street)
    }
}

/// `P_b(r)`: probability of bus line `line` appearing on `street`.
pub fn prob_bus_on_street(graph: &StreetGraph, line: &BusLine, street: StreetId) -> Result<f64> {
    let l_r = graph.street(street)?.length();
    if !line.passes(street) {
        return Ok(0.0);
    }
    Ok(l_r / line.length(graph)?)
}

/// `ω`: reciprocal of the street probability, or [`W_MAX`] for uncovered
/// streets.
pub fn edge_weight(p_r: f64) -> f64 {
    if p_r > 0.0 {
        1.0 / p_r
    } else {
        W_MAX
    }
}

#[derive(Clone, Debug)]
struct LineInfo {
    length: f64,
    streets: BTreeSet<StreetId>,
}

/// Which lines pass which streets (`B_r`, `N_i`, `n_ij`).
#[derive(Clone, Debug)]
pub struct LineCoverage {
    map: Arc<StreetGraph>,
    lines: BTreeMap<LineId, LineInfo>,
    members: BTreeMap<StreetId, BTreeSet<LineId>>,
    warnings: Vec<String>,
}

impl LineCoverage {
    /// Validates every trajectory against `map` and indexes street membership.
    pub fn new(map: Arc<StreetGraph>, lines: &[BusLine]) -> Result<Self> {
        let mut infos = BTreeMap::new();
        let mut members: BTreeMap<StreetId, BTreeSet<LineId>> =
            map.streets().map(|s| (s.id, BTreeSet::new())).collect();
        let mut warnings = Vec::new();
        for line in lines {
            line.walk(&map)?;
            if line.repeats_streets() {
                warnings.push(format!(
                    "line {} repeats a street; its appearance probabilities sum to less than 1",
                    line.id
                ));
            }
            let info = LineInfo {
                length: line.length(&map)?,
                streets: line.trajectory.iter().copied().collect(),
            };
            for s in &info.streets {
                members
                    .get_mut(s)
                    .expect("walk validated streets")
                    .insert(line.id);
            }
            if infos.insert(line.id, info).is_some() {
                return Err(Error::InvalidLine {
                    line: line.id,
                    reason: "duplicate line id".into(),
                });
            }
        }
        Ok(Self {
            map,
            lines: infos,
            members,
            warnings,
        })
    }

    pub fn map(&self) -> &Arc<StreetGraph> {
        &self.map
    }

    /// `N_BUS`.
    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `B_r`: lines passing `street`.
    pub fn lines_on(&self, street: StreetId) -> Result<&BTreeSet<LineId>> {
        self.members
            .get(&street)
            .ok_or(Error::UnknownStreet(street))
    }

    pub fn is_covered(&self, street: StreetId) -> bool {
        self.members.get(&street).is_some_and(|m| !m.is_empty())
    }

    /// `P_r`: probability of buses appearing on `street`.
    pub fn prob_street(&self, street: StreetId) -> Result<f64> {
        if self.lines.is_empty() {
            return Err(Error::NoLines);
        }
        let l_r = self.map.street(street)?.length();
        let sum: f64 = self
            .lines_on(street)?
            .iter()
            .map(|id| l_r / self.lines[id].length)
            .sum();
        Ok(sum / self.lines.len() as f64)
    }

    /// `n_ij`: lines passing both streets. Symmetric.
    pub fn shared_lines(&self, i: StreetId, j: StreetId) -> Result<usize> {
        let a = self.lines_on(i)?;
        let b = self.lines_on(j)?;
        Ok(a.intersection(b).count())
    }

    /// Consistency from street `i` to the adjoining street `j`.
    pub fn psc(&self, i: StreetId, j: StreetId) -> Result<f64> {
        if !self.map.adjoin(i, j)? {
            return Err(Error::NotAdjacent(i, j));
        }
        let n_i = self.lines_on(i)?.len();
        if n_i == 0 {
            return Ok(0.0);
        }
        Ok(self.shared_lines(i, j)? as f64 / n_i as f64)
    }

    /// Path consistency: mean plus product of the transition scores.
    pub fn ppc(&self, path: &[StreetId]) -> Result<f64> {
        if path.len() < 2 {
            return Err(Error::InvalidPath(format!(
                "consistency needs at least two streets, got {}",
                path.len()
            )));
        }
        let mut sum = 0.0;
        let mut product = 1.0;
        for w in path.windows(2) {
            let p = self.psc(w[0], w[1])?;
            sum += p;
            product *= p;
        }
        Ok(sum / (path.len() - 1) as f64 + product)
    }

    /// Every ordered pair of adjoining streets with its consistency score.
    pub fn psc_table(&self) -> Vec<PscEntry> {
        let mut out = Vec::new();
        for s in self.map.streets() {
            for t in self.map.adjacent_streets(s.id).expect("street from map") {
                out.push(PscEntry {
                    from: s.id,
                    to: t,
                    psc: self.psc(s.id, t).expect("adjoining by construction"),
                });
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PscEntry {
    pub from: StreetId,
    pub to: StreetId,
    pub psc: f64,
}

/// Street graph weighted by bus density.
#[derive(Clone, Debug)]
pub struct RoutingGraph {
    map: Arc<StreetGraph>,
    weights: BTreeMap<StreetId, f64>,
}

impl RoutingGraph {
    pub fn new(coverage: &LineCoverage) -> Self {
        let map = coverage.map().clone();
        let weights = map
            .streets()
            .map(|s| {
                let p = if coverage.line_count() == 0 {
                    0.0
                } else {
                    coverage.prob_street(s.id).expect("street from map")
                };
                (s.id, edge_weight(p))
            })
            .collect();
        Self { map, weights }
    }

    /// Builds a routing graph with explicit weights; every street of `map`
    /// must be weighted.
    pub fn with_weights(map: Arc<StreetGraph>, weights: BTreeMap<StreetId, f64>) -> Result<Self> {
        for s in map.streets() {
            match weights.get(&s.id) {
                Some(w) if *w > 0.0 && !w.is_nan() => {}
                Some(w) => {
                    return Err(Error::InvalidPath(format!(
                        "street {} has non-positive weight {w}",
                        s.id
                    )))
                }
                None => return Err(Error::UnknownStreet(s.id)),
            }
        }
        Ok(Self { map, weights })
    }

    pub fn map(&self) -> &Arc<StreetGraph> {
        &self.map
    }

    pub fn weight(&self, street: StreetId) -> Result<f64> {
        self.weights
            .get(&street)
            .copied()
            .ok_or(Error::UnknownStreet(street))
    }

    pub fn weights(&self) -> &BTreeMap<StreetId, f64> {
        &self.weights
    }
}

/// Validates `lines` on `map` and weights every street.
pub fn build_routing_graph(
    map: Arc<StreetGraph>,
    lines: &[BusLine],
) -> Result<(RoutingGraph, LineCoverage)> {
    let coverage = LineCoverage::new(map, lines)?;
    Ok((RoutingGraph::new(&coverage), coverage))
}

/// Generates `count` loop-free lines between far-apart intersections.
///
/// Each line follows a shortest route under randomly jittered street lengths,
/// so lines on a grid become staircase corridors rather than identical
/// straight runs.
pub fn synthesize_lines<R: Rng>(
    map: &StreetGraph,
    count: usize,
    headway: f64,
    rng: &mut R,
) -> Result<Vec<BusLine>> {
    let nodes: Vec<_> = map.intersections().map(|i| (i.id, i.position)).collect();
    if nodes.len() < 2 {
        return Err(Error::EmptyMap);
    }
    let (lo, hi) = map.bounds().ok_or(Error::EmptyMap)?;
    let span = lo.distance(hi);
    let mut lines = Vec::with_capacity(count);
    let mut attempts = 0;
    while lines.len() < count {
        attempts += 1;
        if attempts > 1000 * (count + 1) {
            return Err(Error::InvalidMap(
                "could not place bus lines; map too fragmented".into(),
            ));
        }
        let (a, pa) = nodes[rng.random_range(0..nodes.len())];
        let (b, pb) = nodes[rng.random_range(0..nodes.len())];
        let min_sep = if attempts < 200 * (count + 1) {
            0.5 * span
        } else {
            0.0
        };
        if a == b || pa.distance(pb) < min_sep {
            continue;
        }
        let jitter: BTreeMap<StreetId, f64> = map
            .streets()
            .map(|s| (s.id, s.length() * rng.random_range(1.0..1.5)))
            .collect();
        if let Some(streets) = jittered_route(map, &jitter, a, b) {
            lines.push(BusLine {
                id: LineId(lines.len() as u32),
                trajectory: streets,
                headway,
            });
        }
    }
    Ok(lines)
}

fn jittered_route(
    map: &StreetGraph,
    cost: &BTreeMap<StreetId, f64>,
    from: IntersectionId,
    to: IntersectionId,
) -> Option<Vec<StreetId>> {
    struct Key(f64);
    impl PartialEq for Key {
        fn eq(&self, other: &Self) -> bool {
            self.cmp(other).is_eq()
        }
    }
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Key {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }

    let mut dist: BTreeMap<IntersectionId, f64> = BTreeMap::new();
    let mut via: BTreeMap<IntersectionId, StreetId> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(from, 0.0);
    heap.push(Reverse((Key(0.0), from)));
    while let Some(Reverse((Key(d), u))) = heap.pop() {
        if u == to {
            break;
        }
        if d > dist[&u] {
            continue;
        }
        for &sid in map.incident(u) {
            let v = map.street(sid).ok()?.other_end(u)?;
            let nd = d + cost[&sid];
            if dist.get(&v).is_none_or(|&old| nd < old) {
                dist.insert(v, nd);
                via.insert(v, sid);
                heap.push(Reverse((Key(nd), v)));
            }
        }
    }
    let mut streets = Vec::new();
    let mut at = to;
    while at != from {
        let sid = *via.get(&at)?;
        streets.push(sid);
        at = map.street(sid).ok()?.other_end(at)?;
    }
    streets.reverse();
    Some(streets)
}
