//! Ant-colony discovery of a multi-hop link from a relay bus to the next
//! qualified relay bus.
//!
//! The source launches a batch of ask ants over the current unit-disk
//! topology. Each ant hops to an unvisited neighbor drawn with probability
//! `∝ τ^α · η^β` and stops at the first bus that satisfies the relay
//! qualification. That bus answers with a response ant, which retraces the
//! relay table and reinforces pheromone on every link. The source then
//! scores each reported link with the objective and keeps the best.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{StreetId, VehicleId};
use crate::link_model::{estimate_link, Kinematics, LinkEstimate, VelocityStats};
use crate::mobility::{SpatialGrid, VehicleKind, VehicleState, World};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FacoParams {
    /// Floor and initial value of the pheromone intensity.
    pub tau0: f64,
    /// Weight of the heuristic in a deposit.
    pub delta: f64,
    /// Lifetime versus delay trade-off in the heuristic and the objective.
    pub phi: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Evaporation period in seconds.
    pub dt: f64,
    pub n_ant: usize,
    /// Delay budget of a link, also the discovery wait window.
    pub d_th: f64,
    pub packet_bytes: f64,
    pub rate_bps: f64,
    pub processing_s: f64,
}

impl Default for FacoParams {
    fn default() -> Self {
        Self {
            tau0: 0.3,
            delta: 0.7,
            phi: 0.6,
            alpha: 8.0,
            beta: 5.0,
            dt: 1.0,
            n_ant: 10,
            d_th: 10.0,
            packet_bytes: 1024.0,
            rate_bps: 6e6,
            processing_s: 0.002,
        }
    }
}

impl FacoParams {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("tau0", self.tau0),
            ("delta", self.delta),
            ("phi", self.phi),
        ];
        for (name, v) in unit {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        let positive = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("dt", self.dt),
            ("d_th", self.d_th),
            ("packet_bytes", self.packet_bytes),
            ("rate_bps", self.rate_bps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.processing_s < 0.0 {
            return Err(Error::Config("processing_s must be >= 0".into()));
        }
        if self.n_ant == 0 {
            return Err(Error::Config("n_ant must be at least 1".into()));
        }
        Ok(())
    }

    /// Transmission plus processing time of one hop.
    pub fn hop_delay(&self) -> f64 {
        self.packet_bytes * 8.0 / self.rate_bps + self.processing_s
    }

    pub fn ant_ttl(&self) -> f64 {
        self.d_th / 2.0
    }
}

/// Relay qualification: the planned street sequence and the index of the
/// carrier's street in it. A bus qualifies when its street appears at or
/// after that index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qualification {
    pub route: Vec<StreetId>,
    pub carrier_index: usize,
}

impl Qualification {
    pub fn new(route: Vec<StreetId>, carrier_index: usize) -> Result<Self> {
        if carrier_index >= route.len() {
            return Err(Error::InvalidPath(format!(
                "carrier index {carrier_index} outside route of {} streets",
                route.len()
            )));
        }
        Ok(Self {
            route,
            carrier_index,
        })
    }

    pub fn admits(&self, street: StreetId) -> bool {
        self.route[self.carrier_index..].contains(&street)
    }
}

pub fn qualifies(candidate: &VehicleState, q: &Qualification) -> bool {
    candidate.is_bus() && q.admits(candidate.street)
}

fn score(lifetime: f64, delay: f64, phi: f64) -> f64 {
    let stability = if lifetime.is_infinite() {
        1.0
    } else {
        lifetime / (1.0 + lifetime)
    };
    phi * stability + (1.0 - phi) / (1.0 + delay)
}

/// Link desirability `η = φ·LT/(1+LT) + (1−φ)/(1+D)`.
pub fn hop_heuristic(estimate: &LinkEstimate, hop_delay: f64, phi: f64) -> f64 {
    score(estimate.lifetime, hop_delay, phi)
}

/// Forwarding distribution over neighbors given `(τ, η)` per neighbor.
pub fn forward_probabilities(trails: &[(f64, f64)], alpha: f64, beta: f64) -> Result<Vec<f64>> {
    if trails.is_empty() {
        return Err(Error::NoNeighbors);
    }
    // Log space keeps τ^8·η^5 away from underflow.
    let logs: Vec<f64> = trails
        .iter()
        .map(|&(tau, eta)| alpha * tau.ln() + beta * eta.ln())
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

pub fn deposit(tau: f64, eta: f64, delta: f64) -> f64 {
    (1.0 - delta) * tau + delta * eta
}

/// Per-period decay rate that brings `tau` down to `tau0` after
/// `lifetime / dt` periods.
pub fn evaporation_rate(tau: f64, tau0: f64, lifetime: f64, dt: f64) -> f64 {
    if tau <= tau0 || lifetime.is_infinite() {
        0.0
    } else if lifetime <= 0.0 {
        1.0
    } else {
        1.0 - (tau0 / tau).powf(dt / lifetime)
    }
}

/// One evaporation period.
pub fn evaporate(tau: f64, rate: f64, tau0: f64) -> f64 {
    ((1.0 - rate) * tau).max(tau0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Trail {
    tau: f64,
    rate: f64,
    /// Time of the deposit that set `tau`.
    since: f64,
}

/// Pheromone intensity per directed vehicle link. Links never reinforced,
/// or decayed back to the floor, hold `τ₀` implicitly.
#[derive(Clone, Debug)]
pub struct PheromoneStore {
    tau0: f64,
    dt: f64,
    trails: HashMap<(VehicleId, VehicleId), Trail>,
}

impl PheromoneStore {
    pub fn new(params: &FacoParams) -> Self {
        Self {
            tau0: params.tau0,
            dt: params.dt,
            trails: HashMap::new(),
        }
    }

    fn decayed(&self, t: &Trail, now: f64) -> f64 {
        let periods = ((now - t.since) / self.dt + 1e-9).floor().max(0.0);
        if t.rate <= 0.0 || periods == 0.0 {
            t.tau
        } else {
            let tau = t.tau * (1.0 - t.rate).powf(periods);
            // Rounding can leave the last period a hair above the floor.
            if tau <= self.tau0 * (1.0 + 1e-12) {
                self.tau0
            } else {
                tau
            }
        }
    }

    pub fn intensity(&self, from: VehicleId, to: VehicleId, now: f64) -> f64 {
        self.trails
            .get(&(from, to))
            .map_or(self.tau0, |t| self.decayed(t, now))
    }

    /// Reinforces `from → to` and returns the intensities before and after.
    pub fn reinforce(
        &mut self,
        from: VehicleId,
        to: VehicleId,
        eta: f64,
        lifetime: f64,
        delta: f64,
        now: f64,
    ) -> (f64, f64) {
        let before = self.intensity(from, to, now);
        let tau = deposit(before, eta, delta).max(self.tau0);
        let rate = evaporation_rate(tau, self.tau0, lifetime, self.dt);
        if rate >= 1.0 || tau <= self.tau0 {
            self.trails.remove(&(from, to));
        } else {
            self.trails.insert(
                (from, to),
                Trail {
                    tau,
                    rate,
                    since: now,
                },
            );
        }
        (before, tau)
    }

    /// Drops links that have decayed back to the floor.
    pub fn prune(&mut self, now: f64) {
        let floor = self.tau0;
        let snapshot: Vec<_> = self
            .trails
            .iter()
            .filter(|(_, t)| self.decayed(t, now) <= floor)
            .map(|(k, _)| *k)
            .collect();
        for k in snapshot {
            self.trails.remove(&k);
        }
    }

    pub fn len(&self) -> usize {
        self.trails.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trails.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AskAnt {
    pub id: u32,
    pub origin: VehicleId,
    pub qualification: Qualification,
    pub relay_table: Vec<VehicleId>,
    pub ttl: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseAnt {
    pub id: u32,
    pub relay_table: Vec<VehicleId>,
    pub terminal: VehicleId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateLink {
    /// Source bus, interior relays, terminal bus.
    pub nodes: Vec<VehicleId>,
    /// Smallest hop lifetime.
    pub lifetime: f64,
    /// Summed hop delay.
    pub delay: f64,
    pub objective: f64,
}

impl CandidateLink {
    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn terminal(&self) -> VehicleId {
        *self.nodes.last().expect("link has nodes")
    }
}

/// `F(L) = φ·LT(L)/(1+LT(L)) + (1−φ)/(1+D(L))`.
pub fn objective(lifetime: f64, delay: f64, phi: f64) -> f64 {
    score(lifetime, delay, phi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeView {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub street: StreetId,
    pub kinematics: Kinematics,
    pub stats: VelocityStats,
}

/// Frozen unit-disk connectivity used for one discovery round.
#[derive(Clone, Debug)]
pub struct Topology {
    nodes: Vec<NodeView>,
    index: HashMap<VehicleId, usize>,
    adjacency: Vec<Vec<usize>>,
    radius: f64,
}

impl Topology {
    pub fn new(nodes: Vec<NodeView>, radius: f64) -> Self {
        let grid = SpatialGrid::new(nodes.iter().map(|n| n.kinematics.position), radius);
        let mut adjacency = Vec::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            let here = n.kinematics.position;
            let mut near: Vec<usize> = grid
                .near(here)
                .into_iter()
                .filter(|&j| j != i && nodes[j].kinematics.position.distance(here) <= radius)
                .collect();
            near.sort_by_key(|&j| nodes[j].id);
            adjacency.push(near);
        }
        let index = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        Self {
            nodes,
            index,
            adjacency,
            radius,
        }
    }

    /// Every vehicle of the world with its self-reported speed statistics.
    pub fn from_world(world: &World) -> Self {
        let nodes = world
            .vehicles()
            .iter()
            .map(|v| NodeView {
                id: v.id,
                kind: v.kind,
                street: v.street,
                kinematics: v.kinematics(),
                stats: world.own_stats(v.id).cloned().unwrap_or_default(),
            })
            .collect();
        Self::new(nodes, world.radius())
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn node(&self, id: VehicleId) -> Option<&NodeView> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn nodes(&self) -> &[NodeView] {
        &self.nodes
    }

    /// In-range neighbors of `id` in ascending id order.
    pub fn neighbors(&self, id: VehicleId) -> Vec<VehicleId> {
        self.index.get(&id).map_or_else(Vec::new, |&i| {
            self.adjacency[i]
                .iter()
                .map(|&j| self.nodes[j].id)
                .collect()
        })
    }

    pub fn link(&self, a: VehicleId, b: VehicleId) -> Result<LinkEstimate> {
        let na = self.node(a).ok_or(Error::UnknownVehicle(a))?;
        let nb = self.node(b).ok_or(Error::UnknownVehicle(b))?;
        estimate_link(
            &na.kinematics,
            &na.stats,
            &nb.kinematics,
            &nb.stats,
            self.radius,
        )
    }

    pub fn qualifies(&self, id: VehicleId, q: &Qualification) -> bool {
        self.node(id)
            .is_some_and(|n| n.kind == VehicleKind::Bus && q.admits(n.street))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AntEvent {
    Launched {
        t: f64,
        ant: u32,
        origin: VehicleId,
    },
    Forwarded {
        t: f64,
        ant: u32,
        from: VehicleId,
        to: VehicleId,
    },
    Dropped {
        t: f64,
        ant: u32,
        at: VehicleId,
        reason: String,
    },
    Responded {
        t: f64,
        ant: u32,
        terminal: VehicleId,
        hops: usize,
    },
    Pheromone {
        t: f64,
        from: VehicleId,
        to: VehicleId,
        before: f64,
        after: f64,
    },
}

fn draw<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Launches the ask ants and lets each response ant reinforce its path.
/// Returns the response ants in arrival order.
#[allow(clippy::too_many_arguments)]
pub fn launch_ants<R: Rng>(
    topo: &Topology,
    store: &mut PheromoneStore,
    source: VehicleId,
    q: &Qualification,
    params: &FacoParams,
    now: f64,
    rng: &mut R,
    mut trace: Option<&mut Vec<AntEvent>>,
) -> Vec<ResponseAnt> {
    let hop_delay = params.hop_delay();
    let mut responses = Vec::new();
    for id in 0..params.n_ant as u32 {
        let mut ant = AskAnt {
            id,
            origin: source,
            qualification: q.clone(),
            relay_table: vec![source],
            ttl: params.ant_ttl(),
        };
        if let Some(t) = trace.as_deref_mut() {
            t.push(AntEvent::Launched {
                t: now,
                ant: id,
                origin: source,
            });
        }
        let mut at = source;
        let outcome = loop {
            let visited: BTreeSet<VehicleId> = ant.relay_table.iter().copied().collect();
            let options: Vec<(VehicleId, LinkEstimate)> = topo
                .neighbors(at)
                .into_iter()
                .filter(|n| !visited.contains(n))
                .filter_map(|n| topo.link(at, n).ok().map(|e| (n, e)))
                .collect();
            if options.is_empty() {
                break Err("dead end");
            }
            if ant.ttl < hop_delay {
                break Err("ttl expired");
            }
            let trails: Vec<(f64, f64)> = options
                .iter()
                .map(|(n, e)| {
                    (
                        store.intensity(at, *n, now),
                        hop_heuristic(e, hop_delay, params.phi),
                    )
                })
                .collect();
            let probs = forward_probabilities(&trails, params.alpha, params.beta)
                .expect("options are non-empty");
            let next = options[draw(rng, &probs)].0;
            ant.ttl -= hop_delay;
            ant.relay_table.push(next);
            if let Some(t) = trace.as_deref_mut() {
                t.push(AntEvent::Forwarded {
                    t: now,
                    ant: id,
                    from: at,
                    to: next,
                });
            }
            at = next;
            if topo.qualifies(at, q) {
                break Ok(());
            }
        };
        match outcome {
            Err(reason) => {
                if let Some(t) = trace.as_deref_mut() {
                    t.push(AntEvent::Dropped {
                        t: now,
                        ant: id,
                        at,
                        reason: reason.into(),
                    });
                }
            }
            Ok(()) => {
                let response = ResponseAnt {
                    id,
                    relay_table: ant.relay_table,
                    terminal: at,
                };
                if let Some(t) = trace.as_deref_mut() {
                    t.push(AntEvent::Responded {
                        t: now,
                        ant: id,
                        terminal: at,
                        hops: response.relay_table.len() - 1,
                    });
                }
                for pair in response.relay_table.windows(2).rev() {
                    let (from, to) = (pair[0], pair[1]);
                    let Ok(e) = topo.link(from, to) else { continue };
                    let eta = hop_heuristic(&e, hop_delay, params.phi);
                    let (before, after) =
                        store.reinforce(from, to, eta, e.lifetime, params.delta, now);
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(AntEvent::Pheromone {
                            t: now,
                            from,
                            to,
                            before,
                            after,
                        });
                    }
                }
                responses.push(response);
            }
        }
    }
    responses
}

/// Scores the reported links against `topo` and returns the best one that
/// is still connected, qualified and within the delay budget.
pub fn select(
    topo: &Topology,
    responses: &[ResponseAnt],
    q: &Qualification,
    params: &FacoParams,
) -> Option<CandidateLink> {
    let hop_delay = params.hop_delay();
    let unique: BTreeSet<&Vec<VehicleId>> = responses.iter().map(|r| &r.relay_table).collect();
    let mut best: Option<CandidateLink> = None;
    for nodes in unique {
        let Some(link) = evaluate(topo, nodes, q, hop_delay, params) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some(b) => link
                .objective
                .total_cmp(&b.objective)
                .then(b.delay.total_cmp(&link.delay))
                .then(b.nodes.cmp(&link.nodes))
                .is_gt(),
        };
        if better {
            best = Some(link);
        }
    }
    best
}

/// Recomputes lifetime, delay and objective of a node sequence; `None`
/// when a hop is out of range, the terminal does not qualify or the delay
/// budget is exceeded.
pub fn evaluate(
    topo: &Topology,
    nodes: &[VehicleId],
    q: &Qualification,
    hop_delay: f64,
    params: &FacoParams,
) -> Option<CandidateLink> {
    if nodes.len() < 2 || !topo.qualifies(*nodes.last()?, q) {
        return None;
    }
    let mut lifetime = f64::INFINITY;
    for pair in nodes.windows(2) {
        lifetime = lifetime.min(topo.link(pair[0], pair[1]).ok()?.lifetime);
    }
    let delay = hop_delay * (nodes.len() - 1) as f64;
    if delay > params.d_th {
        return None;
    }
    Some(CandidateLink {
        nodes: nodes.to_vec(),
        lifetime,
        delay,
        objective: objective(lifetime, delay, params.phi),
    })
}

/// One full discovery round on a frozen topology.
#[allow(clippy::too_many_arguments)]
pub fn discover<R: Rng>(
    topo: &Topology,
    store: &mut PheromoneStore,
    source: VehicleId,
    q: &Qualification,
    params: &FacoParams,
    now: f64,
    rng: &mut R,
    trace: Option<&mut Vec<AntEvent>>,
) -> Option<CandidateLink> {
    if topo.neighbors(source).is_empty() {
        return None;
    }
    let responses = launch_ants(topo, store, source, q, params, now, rng, trace);
    select(topo, &responses, q, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn qualification_examples() {
        let q = Qualification::new(vec![StreetId(0), StreetId(1), StreetId(2), StreetId(3)], 1)
            .unwrap();
        assert!(q.admits(StreetId(2)));
        assert!(q.admits(StreetId(1)));
        assert!(!q.admits(StreetId(0)));
        assert!(!q.admits(StreetId(9)));
        assert!(Qualification::new(vec![StreetId(0)], 1).is_err());
    }

    #[test]
    fn heuristic_examples() {
        let est = |lifetime| LinkEstimate {
            duration: lifetime,
            reliability: 1.0,
            lifetime,
        };
        assert!(close(hop_heuristic(&est(0.0), 0.0, 0.6), 0.4, 1e-15));
        assert!(close(
            hop_heuristic(&est(f64::INFINITY), 0.0, 0.6),
            1.0,
            1e-15
        ));
        let want = 0.6 * 0.8 + 0.4 / 1.004;
        assert!(close(hop_heuristic(&est(4.0), 0.004, 0.6), want, 1e-15));
        assert!(close(want, 0.878_406_374, 1e-9));
    }

    #[test]
    fn probability_examples() {
        assert_eq!(
            forward_probabilities(&[(0.3, 0.5)], 8.0, 5.0).unwrap(),
            vec![1.0]
        );
        let p = forward_probabilities(&[(0.4, 0.7), (0.4, 0.7)], 8.0, 5.0).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        let p = forward_probabilities(&[(0.3, 0.5), (0.6, 0.5)], 8.0, 5.0).unwrap();
        assert!(close(p[0], 1.0 / 257.0, 1e-15));
        assert!(close(p[1], 256.0 / 257.0, 1e-15));
        assert!(matches!(
            forward_probabilities(&[], 8.0, 5.0),
            Err(Error::NoNeighbors)
        ));
    }

    #[test]
    fn deposit_examples() {
        assert!(close(deposit(0.3, 0.5, 0.7), 0.44, 1e-15));
        assert_eq!(deposit(0.6, 0.6, 0.7), 0.6);
        let mut tau = 0.3;
        for _ in 0..50 {
            tau = deposit(tau, 0.9, 0.7);
        }
        assert!(close(tau, 0.9, 1e-6));
    }

    #[test]
    fn evaporation_examples() {
        let tau0 = 0.3;
        assert_eq!(
            evaporate(tau0, evaporation_rate(tau0, tau0, 4.0, 1.0), tau0),
            tau0
        );
        let rate = evaporation_rate(0.6, tau0, 4.0, 1.0);
        let mut tau = 0.6;
        for _ in 0..4 {
            tau = evaporate(tau, rate, tau0);
        }
        assert!(close(tau, tau0, 1e-9));
        let rate = evaporation_rate(0.6, tau0, f64::INFINITY, 1.0);
        assert_eq!(evaporate(0.6, rate, tau0), 0.6);
        let rate = evaporation_rate(0.6, tau0, 0.0, 1.0);
        assert_eq!(evaporate(0.6, rate, tau0), tau0);
    }

    #[test]
    fn objective_examples() {
        assert!(close(objective(4.0, 0.012, 0.6), 0.875_256_917, 1e-9));
        assert!(close(objective(0.0, 0.5, 0.6), 0.4 / 1.5, 1e-15));
        assert!(objective(8.0, 0.01, 0.6) > objective(4.0, 0.01, 0.6));
    }

    #[test]
    fn store_decays_lazily() {
        let params = FacoParams::default();
        let mut store = PheromoneStore::new(&params);
        let (a, b) = (VehicleId(0), VehicleId(1));
        assert_eq!(store.intensity(a, b, 0.0), 0.3);
        let (before, after) = store.reinforce(a, b, 0.9, 4.0, 0.7, 10.0);
        assert_eq!(before, 0.3);
        assert!(close(after, 0.72, 1e-12));
        assert_eq!(store.intensity(a, b, 10.5), after);
        assert!(store.intensity(a, b, 11.0) < after);
        assert!(close(store.intensity(a, b, 14.0), 0.3, 1e-9));
        assert_eq!(store.intensity(b, a, 11.0), 0.3);
        store.prune(14.0);
        assert!(store.is_empty());
    }

    fn view(id: u32, kind: VehicleKind, street: u32, x: f64, y: f64, vx: f64) -> NodeView {
        NodeView {
            id: VehicleId(id),
            kind,
            street: StreetId(street),
            kinematics: Kinematics::new(Vec2::new(x, y), Vec2::new(vx, 0.0)),
            stats: VelocityStats::from_moments(vx.abs(), 0.5),
        }
    }

    #[test]
    fn direct_qualified_neighbor_is_found() {
        let topo = Topology::new(
            vec![
                view(0, VehicleKind::Bus, 0, 0.0, 0.0, 5.0),
                view(1, VehicleKind::Car, 0, -100.0, 0.0, 3.0),
                view(2, VehicleKind::Bus, 1, 150.0, 0.0, 6.0),
            ],
            200.0,
        );
        let q = Qualification::new(vec![StreetId(0), StreetId(1)], 0).unwrap();
        let params = FacoParams::default();
        for seed in 0..20 {
            let mut store = PheromoneStore::new(&params);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let link = discover(
                &topo,
                &mut store,
                VehicleId(0),
                &q,
                &params,
                0.0,
                &mut rng,
                None,
            )
            .unwrap();
            assert_eq!(link.nodes, vec![VehicleId(0), VehicleId(2)]);
            assert!(close(link.delay, params.hop_delay(), 1e-15));
        }
    }

    #[test]
    fn nothing_found_without_qualified_bus() {
        let topo = Topology::new(
            vec![
                view(0, VehicleKind::Bus, 0, 0.0, 0.0, 5.0),
                view(1, VehicleKind::Car, 0, 100.0, 0.0, 3.0),
                view(2, VehicleKind::Bus, 7, 200.0, 0.0, 6.0),
                view(3, VehicleKind::Bus, 1, 900.0, 0.0, 6.0),
            ],
            200.0,
        );
        let q = Qualification::new(vec![StreetId(0), StreetId(1)], 0).unwrap();
        let params = FacoParams::default();
        let mut store = PheromoneStore::new(&params);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut trace = Vec::new();
        let found = discover(
            &topo,
            &mut store,
            VehicleId(0),
            &q,
            &params,
            0.0,
            &mut rng,
            Some(&mut trace),
        );
        assert!(found.is_none());
        assert!(store.is_empty());
        let dropped = trace
            .iter()
            .filter(|e| matches!(e, AntEvent::Dropped { .. }))
            .count();
        assert_eq!(dropped, params.n_ant);
    }

    #[test]
    fn hop_delay_default() {
        let d = FacoParams::default().hop_delay();
        assert!(close(d, 1024.0 * 8.0 / 6e6 + 0.002, 1e-15));
        assert!(close(d, 0.003_365_333, 1e-9));
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(
            trails in prop::collection::vec((0.3f64..1.0, 0.05f64..1.0), 1..20)
        ) {
            let p = forward_probabilities(&trails, 8.0, 5.0).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }

        #[test]
        fn intensity_stays_between_floor_and_heuristic(
            events in prop::collection::vec((0.0f64..3.0, 0.0f64..1.0, 0.0f64..20.0), 1..40)
        ) {
            let params = FacoParams::default();
            let mut store = PheromoneStore::new(&params);
            let (a, b) = (VehicleId(0), VehicleId(1));
            let mut now = 0.0;
            let mut sup: f64 = params.tau0;
            for (gap, eta, lt) in events {
                now += gap;
                sup = sup.max(eta);
                store.reinforce(a, b, eta, lt, params.delta, now);
                let tau = store.intensity(a, b, now + gap);
                prop_assert!(tau >= params.tau0 && tau <= sup + 1e-12);
            }
        }
    }
}
