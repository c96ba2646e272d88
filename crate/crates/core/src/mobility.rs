//! Discrete-time vehicle world.
//!
//! Buses shuttle along their line trajectory and pause at terminals; cars
//! pick a uniformly random outgoing street at every intersection. Every
//! beacon interval each vehicle broadcasts its state and all vehicles within
//! the radio radius refresh their neighbor table.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bus_network::BusLine;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::ids::{IntersectionId, LineId, StreetId, VehicleId};
use crate::link_model::{update_velocity_stats, Kinematics, VelocityStats};
use crate::street_map::{Direction, StreetGraph};

pub const KMH: f64 = 1.0 / 3.6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MobilityConfig {
    pub tick_s: f64,
    pub beacon_interval_s: f64,
    /// Neighbor entries older than this are dropped.
    pub expiry_s: f64,
    pub radius_m: f64,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub terminal_pause_s: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            tick_s: 0.1,
            beacon_interval_s: 1.0,
            expiry_s: 3.0,
            radius_m: 200.0,
            speed_min_mps: 10.0 * KMH,
            speed_max_mps: 40.0 * KMH,
            terminal_pause_s: 10.0,
        }
    }
}

impl MobilityConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tick_s", self.tick_s),
            ("beacon_interval_s", self.beacon_interval_s),
            ("expiry_s", self.expiry_s),
            ("radius_m", self.radius_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.speed_min_mps >= 0.0 && self.speed_min_mps <= self.speed_max_mps)
            || !self.speed_max_mps.is_finite()
        {
            return Err(Error::Config(format!(
                "speed bounds [{}, {}] are invalid",
                self.speed_min_mps, self.speed_max_mps
            )));
        }
        if self.terminal_pause_s < 0.0 {
            return Err(Error::Config("terminal_pause_s must be >= 0".into()));
        }
        Ok(())
    }

    fn beacon_every(&self) -> u64 {
        ((self.beacon_interval_s / self.tick_s).round() as u64).max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    Bus,
    Car,
}

/// Where a bus is along its line's walk.
#[derive(Clone, Copy, Debug, PartialEq)]
struct BusProgress {
    line: LineId,
    /// Index of the current street in the trajectory.
    index: usize,
    /// Traversing the trajectory in listed order.
    outbound: bool,
    pause_left: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VehicleState {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub line: Option<LineId>,
    pub street: StreetId,
    /// Meters travelled along `street` in `direction`.
    pub offset: f64,
    pub direction: Direction,
    pub speed: f64,
    pub position: Vec2,
    pub velocity: Vec2,
    bus: Option<BusProgress>,
}

impl VehicleState {
    pub fn kinematics(&self) -> Kinematics {
        Kinematics::new(self.position, self.velocity)
    }

    pub fn is_bus(&self) -> bool {
        self.kind == VehicleKind::Bus
    }

    pub fn is_paused(&self) -> bool {
        self.bus.is_some_and(|b| b.pause_left > 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborEntry {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub position: Vec2,
    pub velocity: Vec2,
    pub street: StreetId,
    /// Separation when the last beacon was heard.
    pub distance: f64,
    pub last_seen: f64,
    pub velocity_stats: VelocityStats,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NeighborTable {
    entries: BTreeMap<VehicleId, NeighborEntry>,
}

impl NeighborTable {
    pub fn get(&self, id: VehicleId) -> Option<&NeighborEntry> {
        self.entries.get(&id)
    }

    /// Entries in neighbor-id order.
    pub fn entries(&self) -> impl Iterator<Item = &NeighborEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorldClock {
    step: u64,
    tick: f64,
}

impl WorldClock {
    pub fn now(&self) -> f64 {
        self.step as f64 * self.tick
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn tick(&self) -> f64 {
        self.tick
    }
}

#[derive(Clone, Debug)]
struct LineTrack {
    line: BusLine,
    vertices: Vec<IntersectionId>,
}

#[derive(Clone, Debug)]
struct Departure {
    step: u64,
    line: LineId,
    outbound: bool,
}

/// Placement of a single vehicle, used for scripted scenarios.
#[derive(Clone, Debug)]
pub struct Placement {
    pub kind: VehicleKind,
    pub street: StreetId,
    pub offset: f64,
    pub direction: Direction,
    pub speed: f64,
}

#[derive(Clone, Debug)]
pub struct World {
    map: Arc<StreetGraph>,
    tracks: BTreeMap<LineId, LineTrack>,
    config: MobilityConfig,
    clock: WorldClock,
    vehicles: Vec<VehicleState>,
    tables: Vec<NeighborTable>,
    own_stats: Vec<VelocityStats>,
    departures: Vec<Departure>,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(
        map: Arc<StreetGraph>,
        lines: &[BusLine],
        config: MobilityConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut tracks = BTreeMap::new();
        for line in lines {
            let vertices = line.walk(&map)?;
            tracks.insert(
                line.id,
                LineTrack {
                    line: line.clone(),
                    vertices,
                },
            );
        }
        Ok(Self {
            map,
            tracks,
            clock: WorldClock {
                step: 0,
                tick: config.tick_s,
            },
            config,
            vehicles: Vec::new(),
            tables: Vec::new(),
            own_stats: Vec::new(),
            departures: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn map(&self) -> &Arc<StreetGraph> {
        &self.map
    }

    pub fn config(&self) -> &MobilityConfig {
        &self.config
    }

    pub fn clock(&self) -> WorldClock {
        self.clock
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    pub fn radius(&self) -> f64 {
        self.config.radius_m
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn vehicle(&self, id: VehicleId) -> Result<&VehicleState> {
        self.vehicles
            .get(id.0 as usize)
            .ok_or(Error::UnknownVehicle(id))
    }

    pub fn table(&self, id: VehicleId) -> Result<&NeighborTable> {
        self.tables
            .get(id.0 as usize)
            .ok_or(Error::UnknownVehicle(id))
    }

    /// The vehicle's estimate of its own speed statistics.
    pub fn own_stats(&self, id: VehicleId) -> Result<&VelocityStats> {
        self.own_stats
            .get(id.0 as usize)
            .ok_or(Error::UnknownVehicle(id))
    }

    /// Intersection the vehicle is driving toward.
    pub fn head_vertex(&self, id: VehicleId) -> Result<IntersectionId> {
        let v = self.vehicle(id)?;
        Ok(self.map.street(v.street)?.oriented(v.direction).1)
    }

    pub fn bus_count(&self) -> usize {
        self.vehicles.iter().filter(|v| v.is_bus()).count()
    }

    pub fn pending_departures(&self) -> usize {
        self.departures.len()
    }

    /// Unexpired neighbor-table entries of `id` heard within `radius`.
    pub fn neighbors_within(&self, id: VehicleId, radius: f64) -> Result<Vec<&NeighborEntry>> {
        let table = self.table(id)?;
        if radius <= 0.0 {
            return Ok(Vec::new());
        }
        let now = self.now();
        Ok(table
            .entries()
            .filter(|e| e.distance <= radius && now - e.last_seen <= self.config.expiry_s)
            .collect())
    }

    fn push_vehicle(&mut self, mut v: VehicleState) -> VehicleId {
        let id = VehicleId(self.vehicles.len() as u32);
        v.id = id;
        self.vehicles.push(v);
        self.tables.push(NeighborTable::default());
        self.own_stats.push(VelocityStats::new());
        let idx = id.0 as usize;
        self.refresh_kinematics(idx);
        id
    }

    /// Adds a vehicle at an explicit place. Cars placed this way wander like
    /// spawned cars.
    pub fn place(&mut self, p: Placement) -> Result<VehicleId> {
        let s = self.map.street(p.street)?;
        if !(0.0..=s.length()).contains(&p.offset) {
            return Err(Error::OffsetOutOfRange {
                street: p.street,
                offset: p.offset,
                length: s.length(),
            });
        }
        Ok(self.push_vehicle(VehicleState {
            id: VehicleId(0),
            kind: p.kind,
            line: None,
            street: p.street,
            offset: p.offset,
            direction: p.direction,
            speed: p.speed,
            position: Vec2::ZERO,
            velocity: Vec2::ZERO,
            bus: None,
        }))
    }

    /// Adds a bus of `line` at the start of trajectory street `index`.
    pub fn place_bus(
        &mut self,
        line: LineId,
        index: usize,
        outbound: bool,
        offset: f64,
        speed: f64,
    ) -> Result<VehicleId> {
        let track = self.tracks.get(&line).ok_or_else(|| Error::InvalidLine {
            line,
            reason: "not part of this world".into(),
        })?;
        let Some(&street) = track.line.trajectory.get(index) else {
            return Err(Error::InvalidLine {
                line,
                reason: format!("no trajectory street at index {index}"),
            });
        };
        let from = if outbound {
            track.vertices[index]
        } else {
            track.vertices[index + 1]
        };
        let s = self.map.street(street)?;
        let direction = s.direction_from(from).expect("walk vertex on street");
        if !(0.0..=s.length()).contains(&offset) {
            return Err(Error::OffsetOutOfRange {
                street,
                offset,
                length: s.length(),
            });
        }
        Ok(self.push_vehicle(VehicleState {
            id: VehicleId(0),
            kind: VehicleKind::Bus,
            line: Some(line),
            street,
            offset,
            direction,
            speed,
            position: Vec2::ZERO,
            velocity: Vec2::ZERO,
            bus: Some(BusProgress {
                line,
                index,
                outbound,
                pause_left: 0.0,
            }),
        }))
    }

    /// Schedules `fleet` departures of `line`, alternating between its two
    /// terminals, one pair every `headway` seconds from now. Departures due
    /// now are realised immediately.
    pub fn spawn_buses(&mut self, line: LineId, fleet: usize, headway: f64) -> Result<()> {
        if !self.tracks.contains_key(&line) {
            return Err(Error::InvalidLine {
                line,
                reason: "not part of this world".into(),
            });
        }
        if !(headway > 0.0) {
            return Err(Error::Config(format!(
                "headway must be positive, got {headway}"
            )));
        }
        let base = self.clock.step;
        for k in 0..fleet {
            let round = (k / 2) as f64;
            let step = base + (round * headway / self.config.tick_s).round() as u64;
            self.departures.push(Departure {
                step,
                line,
                outbound: k % 2 == 0,
            });
        }
        self.departures
            .sort_by_key(|d| (d.step, d.line, !d.outbound));
        self.realise_departures()?;
        Ok(())
    }

    fn realise_departures(&mut self) -> Result<()> {
        let now = self.clock.step;
        let due = self.departures.iter().take_while(|d| d.step <= now).count();
        let ready: Vec<Departure> = self.departures.drain(..due).collect();
        for d in ready {
            let len = self.tracks[&d.line].line.trajectory.len();
            let index = if d.outbound { 0 } else { len - 1 };
            let speed = self.draw_speed();
            self.place_bus(d.line, index, d.outbound, 0.0, speed)?;
        }
        Ok(())
    }

    fn draw_speed(&mut self) -> f64 {
        let (lo, hi) = (self.config.speed_min_mps, self.config.speed_max_mps);
        if hi > lo {
            self.rng.random_range(lo..=hi)
        } else {
            lo
        }
    }

    /// Places `count` cars uniformly over streets with uniform offsets,
    /// directions and speeds.
    pub fn spawn_cars(&mut self, count: usize) -> Result<()> {
        let streets: Vec<(StreetId, f64)> =
            self.map.streets().map(|s| (s.id, s.length())).collect();
        if streets.is_empty() && count > 0 {
            return Err(Error::EmptyMap);
        }
        for _ in 0..count {
            let (street, len) = streets[self.rng.random_range(0..streets.len())];
            let offset = self.rng.random_range(0.0..len);
            let direction = if self.rng.random_bool(0.5) {
                Direction::Forward
            } else {
                Direction::Backward
            };
            let speed = self.draw_speed();
            self.place(Placement {
                kind: VehicleKind::Car,
                street,
                offset,
                direction,
                speed,
            })?;
        }
        Ok(())
    }

    fn refresh_kinematics(&mut self, idx: usize) {
        let v = &self.vehicles[idx];
        let len = self.map.street(v.street).expect("valid street").length();
        let position = self
            .map
            .point_at(v.street, v.offset.clamp(0.0, len), v.direction)
            .expect("offset clamped");
        let moving = !v.is_paused() && v.speed > 0.0;
        let velocity = if moving {
            self.map
                .heading(v.street, v.direction)
                .expect("valid street")
                * v.speed
        } else {
            Vec2::ZERO
        };
        let v = &mut self.vehicles[idx];
        v.position = position;
        v.velocity = velocity;
    }

    fn advance(&mut self, idx: usize) {
        let tick = self.config.tick_s;
        if let Some(b) = self.vehicles[idx].bus.as_mut() {
            if b.pause_left > 1e-9 {
                b.pause_left -= tick;
                if b.pause_left <= 1e-9 {
                    b.pause_left = 0.0;
                }
                return;
            }
        }
        let mut remaining = self.vehicles[idx].speed * tick;
        while remaining > 0.0 {
            let v = &self.vehicles[idx];
            let len = self.map.street(v.street).expect("valid street").length();
            let room = len - v.offset;
            if remaining < room {
                self.vehicles[idx].offset += remaining;
                break;
            }
            remaining -= room;
            let at = self
                .map
                .street(v.street)
                .expect("valid street")
                .oriented(v.direction)
                .1;
            if !self.turn(idx, at) {
                break;
            }
        }
    }

    /// Moves vehicle `idx`, currently at intersection `at`, onto its next
    /// street. Returns false when the vehicle stops for the rest of the tick.
    fn turn(&mut self, idx: usize, at: IntersectionId) -> bool {
        let v = &self.vehicles[idx];
        match v.bus {
            Some(mut b) => {
                let track = &self.tracks[&b.line];
                let n = track.line.trajectory.len();
                let from = if b.outbound && b.index + 1 < n {
                    b.index += 1;
                    track.vertices[b.index]
                } else if !b.outbound && b.index > 0 {
                    b.index -= 1;
                    track.vertices[b.index + 1]
                } else {
                    // Terminal: turn around on the same street and wait.
                    b.outbound = !b.outbound;
                    b.pause_left = self.config.terminal_pause_s;
                    at
                };
                let street = track.line.trajectory[b.index];
                let direction = self
                    .map
                    .street(street)
                    .expect("valid street")
                    .direction_from(from)
                    .expect("walk vertex on street");
                let paused = b.pause_left > 0.0;
                let v = &mut self.vehicles[idx];
                v.street = street;
                v.direction = direction;
                v.offset = 0.0;
                v.bus = Some(b);
                !paused
            }
            None => {
                let current = v.street;
                let options: Vec<StreetId> = self
                    .map
                    .incident(at)
                    .iter()
                    .copied()
                    .filter(|&s| s != current)
                    .collect();
                let street = if options.is_empty() {
                    current
                } else {
                    options[self.rng.random_range(0..options.len())]
                };
                let direction = self
                    .map
                    .street(street)
                    .expect("valid street")
                    .direction_from(at)
                    .expect("incident street");
                let v = &mut self.vehicles[idx];
                v.street = street;
                v.direction = direction;
                v.offset = 0.0;
                true
            }
        }
    }

    /// Advances the world by one tick: motion, scheduled departures, beacons
    /// and neighbor-table expiry.
    pub fn step(&mut self) -> Result<()> {
        for idx in 0..self.vehicles.len() {
            self.advance(idx);
            self.refresh_kinematics(idx);
        }
        self.clock.step += 1;
        self.realise_departures()?;
        if self.clock.step.is_multiple_of(self.config.beacon_every()) {
            self.exchange_beacons();
        }
        let now = self.now();
        let expiry = self.config.expiry_s;
        for t in &mut self.tables {
            t.entries.retain(|_, e| now - e.last_seen <= expiry);
        }
        Ok(())
    }

    /// Every vehicle broadcasts once; receivers within the radius refresh
    /// their entry for the sender.
    pub fn exchange_beacons(&mut self) {
        let now = self.now();
        let radius = self.config.radius_m;
        for (i, v) in self.vehicles.iter().enumerate() {
            self.own_stats[i] = update_velocity_stats(&self.own_stats[i], v.velocity.norm());
        }
        let grid = SpatialGrid::new(self.vehicles.iter().map(|v| v.position), radius);
        for rx in 0..self.vehicles.len() {
            let here = self.vehicles[rx].position;
            for tx in grid.near(here) {
                if tx == rx {
                    continue;
                }
                let sender = &self.vehicles[tx];
                let distance = here.distance(sender.position);
                if distance > radius {
                    continue;
                }
                let table = &mut self.tables[rx].entries;
                let stats = table
                    .get(&sender.id)
                    .map(|e| e.velocity_stats.clone())
                    .unwrap_or_default();
                table.insert(
                    sender.id,
                    NeighborEntry {
                        id: sender.id,
                        kind: sender.kind,
                        position: sender.position,
                        velocity: sender.velocity,
                        street: sender.street,
                        distance,
                        last_seen: now,
                        velocity_stats: update_velocity_stats(&stats, sender.velocity.norm()),
                    },
                );
            }
        }
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            t: self.now(),
            vehicles: self
                .vehicles
                .iter()
                .map(|v| VehicleSnapshot {
                    id: v.id,
                    kind: v.kind,
                    street: v.street,
                    offset: v.offset,
                    x: v.position.x,
                    y: v.position.y,
                    vx: v.velocity.x,
                    vy: v.velocity.y,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub t: f64,
    pub vehicles: Vec<VehicleSnapshot>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleSnapshot {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub street: StreetId,
    pub offset: f64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

/// Uniform bucket grid for radius queries.
pub(crate) struct SpatialGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl SpatialGrid {
    pub(crate) fn new(points: impl Iterator<Item = Vec2>, cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key(p: Vec2, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    /// Indices in the 3×3 block of cells around `p`, ascending.
    pub(crate) fn near(&self, p: Vec2) -> Vec<usize> {
        let (cx, cy) = Self::key(p, self.cell);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(b) = self.buckets.get(&(cx + dx, cy + dy)) {
                    out.extend_from_slice(b);
                }
            }
        }
        out.sort_unstable();
        out
    }
}
