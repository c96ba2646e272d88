//! Static road topology.
//!
//! Streets are straight segments between two intersections. A street's
//! length is always derived from its endpoint coordinates.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::ids::{IntersectionId, StreetId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub id: IntersectionId,
    pub position: Vec2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Street {
    pub id: StreetId,
    pub a: IntersectionId,
    pub b: IntersectionId,
    length: f64,
}

impl Street {
    /// Length in meters (`L_r`).
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn touches(&self, v: IntersectionId) -> bool {
        self.a == v || self.b == v
    }

    /// Endpoint opposite `v`, or `None` when `v` is not an endpoint.
    pub fn other_end(&self, v: IntersectionId) -> Option<IntersectionId> {
        if v == self.a {
            Some(self.b)
        } else if v == self.b {
            Some(self.a)
        } else {
            None
        }
    }

    /// Start and end intersection for a traversal in `direction`.
    pub fn oriented(&self, direction: Direction) -> (IntersectionId, IntersectionId) {
        match direction {
            Direction::Forward => (self.a, self.b),
            Direction::Backward => (self.b, self.a),
        }
    }

    /// Traversal direction that starts at `from`.
    pub fn direction_from(&self, from: IntersectionId) -> Option<Direction> {
        if from == self.a {
            Some(Direction::Forward)
        } else if from == self.b {
            Some(Direction::Backward)
        } else {
            None
        }
    }
}

/// Traversal sense along a street: `Forward` runs from `a` to `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn reversed(self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// On-disk map representation. Street lengths are never stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapFile {
    pub intersections: Vec<IntersectionRecord>,
    pub streets: Vec<StreetRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionRecord {
    pub id: IntersectionId,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreetRecord {
    pub id: StreetId,
    pub a: IntersectionId,
    pub b: IntersectionId,
}

/// Undirected street graph with at most one street per intersection pair.
#[derive(Clone, Debug, PartialEq)]
pub struct StreetGraph {
    intersections: BTreeMap<IntersectionId, Intersection>,
    streets: BTreeMap<StreetId, Street>,
    incidence: BTreeMap<IntersectionId, Vec<StreetId>>,
    by_pair: HashMap<(IntersectionId, IntersectionId), StreetId>,
}

fn pair_key(a: IntersectionId, b: IntersectionId) -> (IntersectionId, IntersectionId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl StreetGraph {
    /// Builds and validates a graph from raw records.
    pub fn from_records(
        intersections: impl IntoIterator<Item = IntersectionRecord>,
        streets: impl IntoIterator<Item = StreetRecord>,
    ) -> Result<Self> {
        let mut nodes = BTreeMap::new();
        for rec in intersections {
            let position = Vec2::new(rec.x, rec.y);
            if !position.is_finite() {
                return Err(Error::InvalidMap(format!(
                    "intersection {} has non-finite coordinates",
                    rec.id
                )));
            }
            if nodes
                .insert(
                    rec.id,
                    Intersection {
                        id: rec.id,
                        position,
                    },
                )
                .is_some()
            {
                return Err(Error::InvalidMap(format!(
                    "duplicate intersection id {}",
                    rec.id
                )));
            }
        }

        let mut edges = BTreeMap::new();
        let mut incidence: BTreeMap<IntersectionId, Vec<StreetId>> =
            nodes.keys().map(|&id| (id, Vec::new())).collect();
        let mut by_pair = HashMap::new();
        for rec in streets {
            let pa = nodes.get(&rec.a).ok_or_else(|| {
                Error::InvalidMap(format!(
                    "street {} references unknown intersection {}",
                    rec.id, rec.a
                ))
            })?;
            let pb = nodes.get(&rec.b).ok_or_else(|| {
                Error::InvalidMap(format!(
                    "street {} references unknown intersection {}",
                    rec.id, rec.b
                ))
            })?;
            if rec.a == rec.b {
                return Err(Error::InvalidMap(format!(
                    "street {} has identical endpoints {}",
                    rec.id, rec.a
                )));
            }
            let length = pa.position.distance(pb.position);
            if length <= 0.0 || !length.is_finite() {
                return Err(Error::InvalidMap(format!(
                    "street {} has non-positive length {length}",
                    rec.id
                )));
            }
            if let Some(prev) = by_pair.insert(pair_key(rec.a, rec.b), rec.id) {
                return Err(Error::InvalidMap(format!(
                    "street {} duplicates street {} between {} and {}",
                    rec.id, prev, rec.a, rec.b
                )));
            }
            let street = Street {
                id: rec.id,
                a: rec.a,
                b: rec.b,
                length,
            };
            if edges.insert(rec.id, street).is_some() {
                return Err(Error::InvalidMap(format!("duplicate street id {}", rec.id)));
            }
            incidence
                .get_mut(&rec.a)
                .expect("checked above")
                .push(rec.id);
            incidence
                .get_mut(&rec.b)
                .expect("checked above")
                .push(rec.id);
        }
        for list in incidence.values_mut() {
            list.sort_unstable();
        }

        Ok(Self {
            intersections: nodes,
            streets: edges,
            incidence,
            by_pair,
        })
    }

    pub fn from_map_file(file: MapFile) -> Result<Self> {
        Self::from_records(file.intersections, file.streets)
    }

    pub fn to_map_file(&self) -> MapFile {
        MapFile {
            intersections: self
                .intersections
                .values()
                .map(|i| IntersectionRecord {
                    id: i.id,
                    x: i.position.x,
                    y: i.position.y,
                })
                .collect(),
            streets: self
                .streets
                .values()
                .map(|s| StreetRecord {
                    id: s.id,
                    a: s.a,
                    b: s.b,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_map_file()).expect("map serialization is infallible")
    }

    pub fn intersection(&self, id: IntersectionId) -> Result<&Intersection> {
        self.intersections
            .get(&id)
            .ok_or(Error::UnknownIntersection(id))
    }

    pub fn street(&self, id: StreetId) -> Result<&Street> {
        self.streets.get(&id).ok_or(Error::UnknownStreet(id))
    }

    pub fn contains_street(&self, id: StreetId) -> bool {
        self.streets.contains_key(&id)
    }

    pub fn contains_intersection(&self, id: IntersectionId) -> bool {
        self.intersections.contains_key(&id)
    }

    /// Intersections in id order.
    pub fn intersections(&self) -> impl Iterator<Item = &Intersection> {
        self.intersections.values()
    }

    /// Streets in id order.
    pub fn streets(&self) -> impl Iterator<Item = &Street> {
        self.streets.values()
    }

    pub fn intersection_count(&self) -> usize {
        self.intersections.len()
    }

    pub fn street_count(&self) -> usize {
        self.streets.len()
    }

    /// Streets incident to `v`, sorted by id. Empty for unknown ids.
    pub fn incident(&self, v: IntersectionId) -> &[StreetId] {
        self.incidence.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn street_between(&self, a: IntersectionId, b: IntersectionId) -> Option<StreetId> {
        self.by_pair.get(&pair_key(a, b)).copied()
    }

    pub fn position(&self, v: IntersectionId) -> Result<Vec2> {
        Ok(self.intersection(v)?.position)
    }

    /// True when the two distinct streets share an endpoint.
    pub fn adjoin(&self, i: StreetId, j: StreetId) -> Result<bool> {
        let si = self.street(i)?;
        let sj = self.street(j)?;
        Ok(i != j && (sj.touches(si.a) || sj.touches(si.b)))
    }

    /// All streets sharing at least one endpoint with `street`, excluding
    /// itself, sorted by id.
    pub fn adjacent_streets(&self, street: StreetId) -> Result<Vec<StreetId>> {
        let s = self.street(street)?;
        let mut out: Vec<StreetId> = self
            .incident(s.a)
            .iter()
            .chain(self.incident(s.b))
            .copied()
            .filter(|&id| id != street)
            .collect();
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Position `offset` meters along `street` when traversed in `direction`.
    pub fn point_at(&self, street: StreetId, offset: f64, direction: Direction) -> Result<Vec2> {
        let s = self.street(street)?;
        if !(0.0..=s.length).contains(&offset) {
            return Err(Error::OffsetOutOfRange {
                street,
                offset,
                length: s.length,
            });
        }
        let (from, to) = s.oriented(direction);
        let p0 = self.intersections[&from].position;
        let p1 = self.intersections[&to].position;
        Ok(p0.lerp(p1, offset / s.length))
    }

    /// Unit vector of travel along `street` in `direction`.
    pub fn heading(&self, street: StreetId, direction: Direction) -> Result<Vec2> {
        let s = self.street(street)?;
        let (from, to) = s.oriented(direction);
        let d = self.intersections[&to].position - self.intersections[&from].position;
        Ok(d * (1.0 / s.length))
    }

    /// Axis-aligned bounding box `(min, max)` of all intersections.
    pub fn bounds(&self) -> Option<(Vec2, Vec2)> {
        let mut it = self.intersections.values().map(|i| i.position);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), p| {
            (
                Vec2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Vec2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        }))
    }
}

/// Parses and validates a map file.
pub fn load_map(source: &str) -> Result<StreetGraph> {
    let file: MapFile = serde_json::from_str(source)?;
    StreetGraph::from_map_file(file)
}

/// Manhattan grid of `rows × cols` intersections spaced `block` meters apart.
///
/// Intersection `r * cols + c` sits at `(c * block, r * block)`. Horizontal
/// streets are numbered first, row by row, then vertical streets.
pub fn generate_grid(rows: usize, cols: usize, block: f64) -> Result<StreetGraph> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidGrid(format!(
            "need at least 2x2 intersections, got {rows}x{cols}"
        )));
    }
    if !(block > 0.0 && block.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "block must be positive, got {block}"
        )));
    }
    let node = |r: usize, c: usize| IntersectionId((r * cols + c) as u32);
    let mut intersections = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            intersections.push(IntersectionRecord {
                id: node(r, c),
                x: c as f64 * block,
                y: r as f64 * block,
            });
        }
    }
    let mut streets = Vec::new();
    let mut next = 0u32;
    let mut push = |a, b| {
        streets.push(StreetRecord {
            id: StreetId(next),
            a,
            b,
        });
        next += 1;
    };
    for r in 0..rows {
        for c in 0..cols - 1 {
            push(node(r, c), node(r, c + 1));
        }
    }
    for r in 0..rows - 1 {
        for c in 0..cols {
            push(node(r, c), node(r + 1, c));
        }
    }
    StreetGraph::from_records(intersections, streets)
}
