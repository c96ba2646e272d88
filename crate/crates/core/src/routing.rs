//! Carry-and-forward packet engine with buses as main relays.
//!
//! Each tick, for every in-flight packet in id order:
//!
//! 1. a bus carrier's position on the planned route is refreshed, and a
//!    carrier that left the route triggers a re-plan from the intersection
//!    it is heading to;
//! 2. the packet is delivered if the destination is within radio range;
//! 3. a car carrier hands the packet to the nearest bus in range;
//! 4. otherwise the packet goes to the qualified neighbor bus with the
//!    longest expected link lifetime;
//! 5. otherwise ant discovery looks for a multi-hop link to a qualified
//!    bus, selected once the wait window closes;
//! 6. otherwise the carrier keeps the packet.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bus_network::{LineCoverage, RoutingGraph};
use crate::error::{Error, Result};
use crate::events::{EventKind, EventRecord, ForwardMode};
use crate::faco::{
    self, AntEvent, FacoParams, PheromoneStore, Qualification, ResponseAnt, Topology,
};
use crate::geometry::Vec2;
use crate::ids::{IntersectionId, PacketId, StreetId, VehicleId};
use crate::link_model::{estimate_link, Kinematics};
use crate::mobility::{VehicleKind, VehicleState, World};
use crate::path_planner::{
    nearest_intersection, select_routing_path, DEFAULT_K, SINGLE_STREET_PPC,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoutingConfig {
    /// Candidate paths considered by the planner.
    pub k: usize,
    pub deadline_s: f64,
    pub faco: FacoParams,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            deadline_s: 120.0,
            faco: FacoParams::default(),
        }
    }
}

impl RoutingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.deadline_s > 0.0) {
            return Err(Error::Config("deadline_s must be positive".into()));
        }
        self.faco.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpireReason {
    NoPath,
    Timeout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketState {
    InFlight,
    Delivered,
    Expired(ExpireReason),
}

#[derive(Clone, Debug)]
struct PendingDiscovery {
    select_at: f64,
    qualification: Qualification,
    responses: Vec<ResponseAnt>,
}

#[derive(Clone, Debug)]
pub struct Packet {
    pub id: PacketId,
    pub src: VehicleId,
    pub dst: Vec2,
    pub dst_vertex: IntersectionId,
    pub carrier: VehicleId,
    pub created: f64,
    pub delivered_at: Option<f64>,
    pub hop_count: u32,
    pub state: PacketState,
    /// Planned street sequence, starting with the carrier's street when
    /// planned. Empty until a bus holds the packet.
    pub route: Vec<StreetId>,
    /// Position of the carrier's street in `route`.
    pub path_index: Option<usize>,
    pub reroutes: u32,
    pub failed_forwards: u32,
    /// Transmission time accumulated on top of the tick clock.
    delay_ledger: f64,
    previous: BTreeSet<VehicleId>,
    pending: Option<PendingDiscovery>,
    carrying: bool,
}

impl Packet {
    pub fn is_in_flight(&self) -> bool {
        self.state == PacketState::InFlight
    }

    pub fn delay(&self) -> Option<f64> {
        self.delivered_at.map(|d| d - self.created)
    }

    pub fn qualification(&self) -> Option<Qualification> {
        let index = self.path_index?;
        Qualification::new(self.route.clone(), index).ok()
    }
}

pub struct Engine {
    coverage: Arc<LineCoverage>,
    graph: Arc<RoutingGraph>,
    config: RoutingConfig,
    store: PheromoneStore,
    rng: ChaCha8Rng,
    packets: Vec<Packet>,
    events: Vec<EventRecord>,
    ant_trace: Option<Vec<AntEvent>>,
    topology: Option<(u64, Arc<Topology>)>,
}

impl Engine {
    pub fn new(
        coverage: Arc<LineCoverage>,
        graph: Arc<RoutingGraph>,
        config: RoutingConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            coverage,
            graph,
            store: PheromoneStore::new(&config.faco),
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            packets: Vec::new(),
            events: Vec::new(),
            ant_trace: None,
            topology: None,
        })
    }

    /// Starts recording ant-level discovery events.
    pub fn trace_ants(&mut self) {
        self.ant_trace.get_or_insert_with(Vec::new);
    }

    pub fn ant_trace(&self) -> &[AntEvent] {
        self.ant_trace.as_deref().unwrap_or(&[])
    }

    pub fn config(&self) -> &RoutingConfig {
        &self.config
    }

    pub fn packets(&self) -> &[Packet] {
        &self.packets
    }

    pub fn packet(&self, id: PacketId) -> Option<&Packet> {
        self.packets.get(id.0 as usize)
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn pheromones(&self) -> &PheromoneStore {
        &self.store
    }

    fn emit(&mut self, t: f64, packet: PacketId, kind: EventKind) {
        self.events.push(EventRecord { t, packet, kind });
    }

    fn live_topology(&mut self, world: &World) -> Arc<Topology> {
        let step = world.clock().step_count();
        match &self.topology {
            Some((s, topo)) if *s == step => topo.clone(),
            _ => {
                let topo = Arc::new(Topology::from_world(world));
                self.topology = Some((step, topo.clone()));
                topo
            }
        }
    }

    /// Creates a packet at `src` for the place `dst`. A bus source plans
    /// immediately; a car source plans once a bus takes the packet.
    pub fn originate(&mut self, world: &World, src: VehicleId, dst: Vec2) -> Result<PacketId> {
        let carrier = world.vehicle(src)?.clone();
        if !dst.is_finite() {
            return Err(Error::InvalidPath("non-finite destination".into()));
        }
        let now = world.now();
        let id = PacketId(self.packets.len() as u32);
        let mut p = Packet {
            id,
            src,
            dst,
            dst_vertex: nearest_intersection(world.map(), dst)?,
            carrier: src,
            created: now,
            delivered_at: None,
            hop_count: 0,
            state: PacketState::InFlight,
            route: Vec::new(),
            path_index: None,
            reroutes: 0,
            failed_forwards: 0,
            delay_ledger: 0.0,
            previous: BTreeSet::new(),
            pending: None,
            carrying: false,
        };
        self.emit(
            now,
            id,
            EventKind::Originate {
                src,
                src_kind: carrier.kind,
                dst,
            },
        );
        if carrier.is_bus() {
            self.plan(world, &mut p, &carrier, true)?;
        }
        self.packets.push(p);
        Ok(id)
    }

    /// Plans a route for `p` from `carrier`. On origin the planner starts at
    /// the intersection nearest the carrier, otherwise at the one it is
    /// heading to.
    fn plan(
        &mut self,
        world: &World,
        p: &mut Packet,
        carrier: &VehicleState,
        origin: bool,
    ) -> Result<bool> {
        let map = world.map();
        let street = map.street(carrier.street)?;
        let head = street.oriented(carrier.direction).1;
        let start = if origin {
            let near = nearest_intersection(map, carrier.position)?;
            if street.touches(near) {
                near
            } else {
                head
            }
        } else {
            head
        };
        let now = world.now();
        let (route, ppc) = if start == p.dst_vertex {
            (vec![carrier.street], SINGLE_STREET_PPC)
        } else {
            match select_routing_path(
                &self.graph,
                &self.coverage,
                start,
                p.dst_vertex,
                self.config.k,
            ) {
                Ok(rp) => {
                    let mut route = rp.streets;
                    if route[0] != carrier.street {
                        route.insert(0, carrier.street);
                    }
                    (route, rp.ppc)
                }
                Err(Error::NoPath(..)) => {
                    self.expire(p, now, ExpireReason::NoPath);
                    return Ok(false);
                }
                Err(e) => return Err(e),
            }
        };
        let kind = if origin {
            EventKind::Plan {
                carrier: carrier.id,
                streets: route.clone(),
                ppc,
            }
        } else {
            EventKind::Reroute {
                carrier: carrier.id,
                streets: route.clone(),
                ppc,
            }
        };
        self.emit(now, p.id, kind);
        p.route = route;
        p.path_index = Some(0);
        p.pending = None;
        Ok(true)
    }

    fn expire(&mut self, p: &mut Packet, now: f64, reason: ExpireReason) {
        p.state = PacketState::Expired(reason);
        p.pending = None;
        let reason = match reason {
            ExpireReason::NoPath => "no_path",
            ExpireReason::Timeout => "timeout",
        };
        self.emit(
            now,
            p.id,
            EventKind::Expire {
                reason: reason.into(),
            },
        );
    }

    /// Expires in-flight packets older than `deadline` seconds.
    pub fn expire_sweep(&mut self, now: f64, deadline: f64) {
        for i in 0..self.packets.len() {
            let p = &self.packets[i];
            if p.is_in_flight() && now - p.created > deadline {
                let mut p = p.clone();
                self.expire(&mut p, now, ExpireReason::Timeout);
                self.packets[i] = p;
            }
        }
    }

    /// One engine tick; call after the world has stepped.
    pub fn step(&mut self, world: &World) -> Result<()> {
        self.expire_sweep(world.now(), self.config.deadline_s);
        for i in 0..self.packets.len() {
            if self.packets[i].is_in_flight() {
                self.relay_step(world, PacketId(i as u32))?;
            }
        }
        if world.clock().step_count().is_multiple_of(100) {
            self.store.prune(world.now());
        }
        Ok(())
    }

    pub fn relay_step(&mut self, world: &World, id: PacketId) -> Result<()> {
        let mut p = self
            .packets
            .get(id.0 as usize)
            .cloned()
            .ok_or_else(|| Error::InvalidPath(format!("unknown packet {id}")))?;
        if p.is_in_flight() {
            self.advance(world, &mut p)?;
        }
        self.packets[id.0 as usize] = p;
        Ok(())
    }

    fn advance(&mut self, world: &World, p: &mut Packet) -> Result<()> {
        let now = world.now();
        let radius = world.radius();
        let carrier = world.vehicle(p.carrier)?.clone();

        if carrier.is_bus() && !p.route.is_empty() && !self.handle_deviation(world, p, &carrier)? {
            return Ok(());
        }

        if carrier.position.distance(p.dst) <= radius {
            let hop = self.config.faco.hop_delay();
            let delivered = now + p.delay_ledger + hop;
            p.state = PacketState::Delivered;
            p.delivered_at = Some(delivered);
            p.pending = None;
            self.emit(
                now,
                p.id,
                EventKind::Deliver {
                    carrier: carrier.id,
                    created: p.created,
                    delivered,
                    hops: p.hop_count,
                },
            );
            return Ok(());
        }

        if !carrier.is_bus() {
            return self.handoff(world, p, &carrier);
        }

        if self.forward_direct(world, p, &carrier)? {
            return Ok(());
        }

        match p.pending.take() {
            Some(pending) if now + 1e-9 >= pending.select_at => {
                if self.finish_discovery(world, p, &carrier, pending)? {
                    return Ok(());
                }
            }
            Some(pending) => p.pending = Some(pending),
            None => self.start_discovery(world, p, &carrier),
        }

        if !p.carrying {
            p.carrying = true;
            self.emit(
                now,
                p.id,
                EventKind::Carry {
                    carrier: carrier.id,
                },
            );
        }
        Ok(())
    }

    /// Keeps `path_index` in step with the carrier. A carrier off the
    /// remaining route gets a new plan from its head intersection. Returns
    /// false when re-planning failed and the packet expired.
    pub fn handle_deviation(
        &mut self,
        world: &World,
        p: &mut Packet,
        carrier: &VehicleState,
    ) -> Result<bool> {
        let from = p.path_index.unwrap_or(0);
        if let Some(pos) = p.route[from..].iter().position(|&s| s == carrier.street) {
            p.path_index = Some(from + pos);
            return Ok(true);
        }
        self.emit(
            world.now(),
            p.id,
            EventKind::Deviation {
                carrier: carrier.id,
                street: carrier.street,
            },
        );
        p.reroutes += 1;
        self.plan(world, p, carrier, false)
    }

    fn transfer(
        &mut self,
        now: f64,
        p: &mut Packet,
        mode: ForwardMode,
        nodes: &[VehicleId],
        to: &VehicleState,
        delay: f64,
    ) {
        let route_tail = match (mode, p.path_index) {
            (ForwardMode::Handoff, _) | (_, None) => Vec::new(),
            (_, Some(i)) => p.route[i..].to_vec(),
        };
        self.emit(
            now,
            p.id,
            EventKind::Forward {
                mode,
                from: p.carrier,
                to: to.id,
                to_kind: to.kind,
                to_street: to.street,
                route_tail,
                via: nodes[1..nodes.len() - 1].to_vec(),
                delay,
            },
        );
        p.previous.insert(p.carrier);
        p.carrier = to.id;
        p.delay_ledger += delay;
        p.hop_count += 1;
        p.pending = None;
        p.carrying = false;
    }

    fn handoff(&mut self, world: &World, p: &mut Packet, carrier: &VehicleState) -> Result<()> {
        let radius = world.radius();
        let now = world.now();
        let mut best: Option<(f64, VehicleState)> = None;
        for e in world.neighbors_within(carrier.id, radius)? {
            if e.kind != VehicleKind::Bus {
                continue;
            }
            let bus = world.vehicle(e.id)?;
            let d = bus.position.distance(carrier.position);
            if d <= radius && best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, bus.clone()));
            }
        }
        let Some((_, bus)) = best else {
            if !p.carrying {
                p.carrying = true;
                self.emit(
                    now,
                    p.id,
                    EventKind::Carry {
                        carrier: carrier.id,
                    },
                );
            }
            return Ok(());
        };
        let hop = self.config.faco.hop_delay();
        self.transfer(
            now,
            p,
            ForwardMode::Handoff,
            &[carrier.id, bus.id],
            &bus,
            hop,
        );
        self.plan(world, p, &bus, true)?;
        Ok(())
    }

    fn forward_direct(
        &mut self,
        world: &World,
        p: &mut Packet,
        carrier: &VehicleState,
    ) -> Result<bool> {
        let Some(q) = p.qualification() else {
            return Ok(false);
        };
        let radius = world.radius();
        let now = world.now();
        let own = world.own_stats(carrier.id)?;
        let mut best: Option<(f64, VehicleId)> = None;
        for e in world.neighbors_within(carrier.id, radius)? {
            if e.kind != VehicleKind::Bus || p.previous.contains(&e.id) {
                continue;
            }
            let live = world.vehicle(e.id)?;
            if !faco::qualifies(live, &q) {
                continue;
            }
            // Extrapolate the beacon to now.
            let age = now - e.last_seen;
            let seen = Kinematics::new(e.position + e.velocity * age, e.velocity);
            let Ok(est) =
                estimate_link(&carrier.kinematics(), own, &seen, &e.velocity_stats, radius)
            else {
                continue;
            };
            let better = match best {
                None => true,
                Some((lt, _)) => est.lifetime > lt,
            };
            if better {
                best = Some((est.lifetime, e.id));
            }
        }
        let Some((_, to)) = best else {
            return Ok(false);
        };
        let to = world.vehicle(to)?.clone();
        if to.position.distance(carrier.position) > radius {
            p.failed_forwards += 1;
            self.emit(
                now,
                p.id,
                EventKind::FailedForward {
                    from: carrier.id,
                    to: to.id,
                    reason: "out_of_range".into(),
                },
            );
            return Ok(false);
        }
        let hop = self.config.faco.hop_delay();
        self.transfer(now, p, ForwardMode::Direct, &[carrier.id, to.id], &to, hop);
        Ok(true)
    }

    fn start_discovery(&mut self, world: &World, p: &mut Packet, carrier: &VehicleState) {
        let Some(q) = p.qualification() else { return };
        if world
            .neighbors_within(carrier.id, world.radius())
            .map_or(true, |n| n.is_empty())
        {
            return;
        }
        let topo = self.live_topology(world);
        if topo.neighbors(carrier.id).is_empty() {
            return;
        }
        let now = world.now();
        let responses = faco::launch_ants(
            &topo,
            &mut self.store,
            carrier.id,
            &q,
            &self.config.faco,
            now,
            &mut self.rng,
            self.ant_trace.as_mut(),
        );
        self.emit(
            now,
            p.id,
            EventKind::Discovery {
                carrier: carrier.id,
                responses: responses.len(),
            },
        );
        // The source cannot tell a silent round from a slow one, so it
        // always waits out the window before trying again.
        p.pending = Some(PendingDiscovery {
            select_at: now + self.config.faco.d_th,
            qualification: q,
            responses,
        });
    }

    /// Selects among the stored responses on the live topology and forwards
    /// along the winner. Returns true when the packet moved.
    fn finish_discovery(
        &mut self,
        world: &World,
        p: &mut Packet,
        carrier: &VehicleState,
        mut pending: PendingDiscovery,
    ) -> Result<bool> {
        let now = world.now();
        // The qualification follows the carrier's progress while waiting.
        if let Some(q) = p.qualification() {
            pending.qualification = q;
        }
        pending
            .responses
            .retain(|r| !p.previous.contains(&r.terminal) && r.terminal != carrier.id);
        if pending.responses.is_empty() {
            return Ok(false);
        }
        let topo = self.live_topology(world);
        let Some(link) = faco::select(
            &topo,
            &pending.responses,
            &pending.qualification,
            &self.config.faco,
        ) else {
            p.failed_forwards += 1;
            let to = pending.responses[0].terminal;
            self.emit(
                now,
                p.id,
                EventKind::FailedForward {
                    from: carrier.id,
                    to,
                    reason: "link_broken".into(),
                },
            );
            return Ok(false);
        };
        let to = world.vehicle(link.terminal())?.clone();
        self.transfer(
            now,
            p,
            ForwardMode::Discovered,
            &link.nodes,
            &to,
            link.delay,
        );
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus_network::{build_routing_graph, BusLine};
    use crate::ids::LineId;
    use crate::mobility::{MobilityConfig, Placement};
    use crate::samples;
    use crate::street_map::{generate_grid, Direction, StreetGraph};

    fn engine(map: &Arc<StreetGraph>, lines: &[BusLine]) -> Engine {
        let (graph, coverage) = build_routing_graph(map.clone(), lines).unwrap();
        Engine::new(
            Arc::new(coverage),
            Arc::new(graph),
            RoutingConfig::default(),
            7,
        )
        .unwrap()
    }

    fn line(id: u32, streets: &[u32]) -> BusLine {
        BusLine {
            id: LineId(id),
            trajectory: streets.iter().map(|&s| StreetId(s)).collect(),
            headway: 60.0,
        }
    }

    fn still() -> MobilityConfig {
        MobilityConfig {
            speed_min_mps: 0.0,
            speed_max_mps: 0.0,
            ..MobilityConfig::default()
        }
    }

    #[test]
    fn plans_most_consistent_path_at_origin() {
        let demo = samples::consistency_demo();
        let map = demo.map.clone();
        let mut world = World::new(map.clone(), &demo.lines, still(), 1).unwrap();
        let src = world.place_bus(LineId(0), 0, true, 0.0, 0.0).unwrap();
        let mut eng = engine(&map, &demo.lines);
        let dst = map.position(demo.destination).unwrap();
        let id = eng.originate(&world, src, dst).unwrap();
        assert_eq!(eng.packet(id).unwrap().route, demo.p1);
        world.step().unwrap();
        eng.step(&world).unwrap();
        assert!(eng.packet(id).unwrap().is_in_flight());
    }

    #[test]
    fn delivers_when_destination_in_range() {
        let map = Arc::new(generate_grid(2, 3, 300.0).unwrap());
        let lines = [line(0, &[0, 1])];
        let mut world = World::new(map.clone(), &lines, still(), 1).unwrap();
        let src = world.place_bus(LineId(0), 0, true, 150.0, 0.0).unwrap();
        let mut eng = engine(&map, &lines);
        let id = eng.originate(&world, src, Vec2::new(300.0, 0.0)).unwrap();
        world.step().unwrap();
        eng.step(&world).unwrap();
        let p = eng.packet(id).unwrap();
        assert_eq!(p.state, PacketState::Delivered);
        assert_eq!(p.hop_count, 0);
        let delay = p.delay().unwrap();
        assert!(delay > 0.0 && delay <= world.config().tick_s + 0.01);
    }

    #[test]
    fn forwards_to_longest_lived_qualified_bus() {
        let map = Arc::new(generate_grid(2, 6, 300.0).unwrap());
        let lines = [line(0, &[0, 1, 2, 3, 4])];
        let mut world = World::new(map.clone(), &lines, MobilityConfig::default(), 1).unwrap();
        let src = world.place_bus(LineId(0), 0, true, 200.0, 5.0).unwrap();
        // Both ahead on the route; the second one moves with the carrier.
        let fast = world.place_bus(LineId(0), 1, true, 10.0, 12.0).unwrap();
        let steady = world.place_bus(LineId(0), 1, true, 100.0, 5.0).unwrap();
        let mut eng = engine(&map, &lines);
        let id = eng.originate(&world, src, Vec2::new(1500.0, 0.0)).unwrap();
        for _ in 0..10 {
            world.step().unwrap();
        }
        eng.step(&world).unwrap();
        let p = eng.packet(id).unwrap();
        assert_eq!(p.carrier, steady);
        assert_ne!(p.carrier, fast);
        assert_eq!(p.hop_count, 1);
    }

    #[test]
    fn never_forwards_to_cars_or_backward_buses() {
        let map = Arc::new(generate_grid(2, 6, 300.0).unwrap());
        let lines = [line(0, &[0, 1, 2, 3, 4])];
        let mut world = World::new(map.clone(), &lines, still(), 1).unwrap();
        let src = world.place_bus(LineId(0), 1, true, 100.0, 0.0).unwrap();
        world.place_bus(LineId(0), 0, true, 250.0, 0.0).unwrap();
        world
            .place(Placement {
                kind: VehicleKind::Car,
                street: StreetId(1),
                offset: 150.0,
                direction: Direction::Forward,
                speed: 0.0,
            })
            .unwrap();
        let mut eng = engine(&map, &lines);
        let id = eng.originate(&world, src, Vec2::new(1500.0, 0.0)).unwrap();
        for _ in 0..200 {
            world.step().unwrap();
            eng.step(&world).unwrap();
        }
        let p = eng.packet(id).unwrap();
        assert_eq!(p.carrier, src);
        assert_eq!(p.hop_count, 0);
        assert!(eng
            .events()
            .iter()
            .any(|e| matches!(e.kind, EventKind::Carry { .. })));
    }

    #[test]
    fn car_source_hands_off_then_plans() {
        let map = Arc::new(generate_grid(2, 6, 300.0).unwrap());
        let lines = [line(0, &[0, 1, 2, 3, 4])];
        let mut world = World::new(map.clone(), &lines, still(), 1).unwrap();
        let car = world
            .place(Placement {
                kind: VehicleKind::Car,
                street: StreetId(0),
                offset: 20.0,
                direction: Direction::Forward,
                speed: 0.0,
            })
            .unwrap();
        let bus = world.place_bus(LineId(0), 0, true, 120.0, 0.0).unwrap();
        let mut eng = engine(&map, &lines);
        let id = eng.originate(&world, car, Vec2::new(1500.0, 0.0)).unwrap();
        assert!(eng.packet(id).unwrap().route.is_empty());
        for _ in 0..10 {
            world.step().unwrap();
        }
        eng.step(&world).unwrap();
        let p = eng.packet(id).unwrap();
        assert_eq!(p.carrier, bus);
        assert_eq!(p.hop_count, 1);
        assert_eq!(p.route[0], StreetId(0));
    }

    #[test]
    fn deviation_triggers_one_reroute() {
        // Bus line turns north at x=300; destination lies east.
        let map = Arc::new(generate_grid(3, 4, 300.0).unwrap());
        let east = |r: u32, c: u32| r * 3 + c;
        let north = |r: u32, c: u32| 9 + r * 4 + c;
        let lines = [
            line(0, &[east(0, 0), north(0, 1), north(1, 1)]),
            line(1, &[east(0, 0), east(0, 1), east(0, 2)]),
        ];
        let cfg = MobilityConfig {
            speed_min_mps: 10.0,
            speed_max_mps: 10.0,
            ..MobilityConfig::default()
        };
        let mut world = World::new(map.clone(), &lines, cfg, 1).unwrap();
        let src = world.place_bus(LineId(0), 0, true, 0.0, 10.0).unwrap();
        let mut eng = engine(&map, &lines);
        let id = eng.originate(&world, src, Vec2::new(900.0, 0.0)).unwrap();
        assert_eq!(
            eng.packet(id).unwrap().route,
            vec![
                StreetId(east(0, 0)),
                StreetId(east(0, 1)),
                StreetId(east(0, 2))
            ]
        );
        for _ in 0..350 {
            world.step().unwrap();
            eng.step(&world).unwrap();
        }
        let p = eng.packet(id).unwrap();
        assert_eq!(p.reroutes, 1);
        assert_eq!(p.route[0], StreetId(north(0, 1)));
        let deviations = eng
            .events()
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Deviation { .. }))
            .count();
        assert_eq!(deviations, 1);
    }

    #[test]
    fn unreachable_destination_expires() {
        use crate::street_map::{IntersectionRecord, StreetRecord};
        let map = StreetGraph::from_records(
            vec![
                IntersectionRecord {
                    id: IntersectionId(0),
                    x: 0.0,
                    y: 0.0,
                },
                IntersectionRecord {
                    id: IntersectionId(1),
                    x: 300.0,
                    y: 0.0,
                },
                IntersectionRecord {
                    id: IntersectionId(2),
                    x: 5000.0,
                    y: 0.0,
                },
            ],
            vec![StreetRecord {
                id: StreetId(0),
                a: IntersectionId(0),
                b: IntersectionId(1),
            }],
        )
        .unwrap();
        let map = Arc::new(map);
        let lines = [line(0, &[0])];
        let world = World::new(map.clone(), &lines, still(), 1).unwrap();
        let mut world = world;
        let src = world.place_bus(LineId(0), 0, true, 0.0, 0.0).unwrap();
        let mut eng = engine(&map, &lines);
        let id = eng.originate(&world, src, Vec2::new(5000.0, 0.0)).unwrap();
        assert_eq!(
            eng.packet(id).unwrap().state,
            PacketState::Expired(ExpireReason::NoPath)
        );
    }

    #[test]
    fn expiry_sweep_respects_state() {
        let map = Arc::new(generate_grid(2, 6, 300.0).unwrap());
        let lines = [line(0, &[0, 1, 2, 3, 4])];
        let mut world = World::new(map.clone(), &lines, still(), 1).unwrap();
        let src = world.place_bus(LineId(0), 0, true, 0.0, 0.0).unwrap();
        let mut eng = engine(&map, &lines);
        let far = eng.originate(&world, src, Vec2::new(1500.0, 0.0)).unwrap();
        let near = eng.originate(&world, src, Vec2::new(10.0, 0.0)).unwrap();
        world.step().unwrap();
        eng.step(&world).unwrap();
        eng.expire_sweep(50.0, 120.0);
        assert!(eng.packet(far).unwrap().is_in_flight());
        eng.expire_sweep(130.0, 120.0);
        assert_eq!(
            eng.packet(far).unwrap().state,
            PacketState::Expired(ExpireReason::Timeout)
        );
        assert_eq!(eng.packet(near).unwrap().state, PacketState::Delivered);
    }
}
