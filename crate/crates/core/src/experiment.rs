//! Scenario runs, parameter sweeps and delivery metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bus_network::{build_routing_graph, load_lines, synthesize_lines, BusLine};
use crate::error::{Error, Result};
use crate::events::EventRecord;
use crate::faco::{AntEvent, FacoParams};
use crate::geometry::Vec2;
use crate::ids::{StreetId, VehicleId};
use crate::mobility::{MobilityConfig, VehicleKind, World, WorldSnapshot, KMH};
use crate::path_planner::DEFAULT_K;
use crate::routing::{Engine, Packet, PacketState, RoutingConfig};
use crate::street_map::{generate_grid, load_map, Direction, StreetGraph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    Grid {
        rows: usize,
        cols: usize,
        block_m: f64,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinesSpec {
    Synthetic { count: usize },
    File { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Bus,
    Car,
    Any,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Workload {
    pub count: usize,
    /// Straight-line source to destination distance ranges in meters.
    /// Packets are spread over them round-robin.
    pub buckets: Vec<[f64; 2]>,
    pub source: SourceKind,
}

impl Default for Workload {
    fn default() -> Self {
        Self {
            count: 200,
            buckets: default_buckets(),
            source: SourceKind::Bus,
        }
    }
}

pub const BUCKET_WIDTH_M: f64 = 500.0;

pub fn default_buckets() -> Vec<[f64; 2]> {
    (0..5)
        .map(|i| [i as f64 * BUCKET_WIDTH_M, (i + 1) as f64 * BUCKET_WIDTH_M])
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub id: String,
    pub map: MapSpec,
    pub lines: LinesSpec,
    pub cars: usize,
    /// Total bus fleet, split evenly over the lines.
    pub buses: usize,
    /// Fleet per line; overrides `buses` when set.
    pub buses_per_line: Option<usize>,
    pub headway_s: f64,
    pub seed: u64,
    pub radius_m: f64,
    pub tick_s: f64,
    pub beacon_interval_s: f64,
    pub expiry_s: f64,
    pub speed_min_kmh: f64,
    pub speed_max_kmh: f64,
    pub terminal_pause_s: f64,
    pub duration_s: f64,
    /// Packets are injected after this settling time.
    pub warmup_s: f64,
    pub deadline_s: f64,
    pub k: usize,
    pub faco: FacoParams,
    pub packets: Workload,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            id: "desk".into(),
            map: MapSpec::Grid {
                rows: 8,
                cols: 8,
                block_m: 500.0,
            },
            lines: LinesSpec::Synthetic { count: 6 },
            cars: 400,
            buses: 40,
            buses_per_line: None,
            headway_s: 30.0,
            seed: 1,
            radius_m: 200.0,
            tick_s: 0.1,
            beacon_interval_s: 1.0,
            expiry_s: 3.0,
            speed_min_kmh: 10.0,
            speed_max_kmh: 40.0,
            terminal_pause_s: 10.0,
            duration_s: 600.0,
            warmup_s: 120.0,
            deadline_s: 120.0,
            k: DEFAULT_K,
            faco: FacoParams::default(),
            packets: Workload::default(),
        }
    }
}

impl ScenarioConfig {
    /// Full-size setting: 20 lines of 20 buses, 4000 cars, 4000 s.
    pub fn full_scale() -> Self {
        Self {
            id: "full".into(),
            map: MapSpec::Grid {
                rows: 8,
                cols: 8,
                block_m: 830.0,
            },
            lines: LinesSpec::Synthetic { count: 20 },
            cars: 4000,
            buses: 400,
            buses_per_line: Some(20),
            radius_m: 400.0,
            duration_s: 4000.0,
            warmup_s: 300.0,
            packets: Workload {
                count: 1000,
                ..Workload::default()
            },
            ..Self::default()
        }
    }

    pub fn from_json(source: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(source)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Makes file paths relative to `base` absolute.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let MapSpec::File { path } = &mut self.map {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let LinesSpec::File { path } = &mut self.lines {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    pub fn mobility(&self) -> MobilityConfig {
        MobilityConfig {
            tick_s: self.tick_s,
            beacon_interval_s: self.beacon_interval_s,
            expiry_s: self.expiry_s,
            radius_m: self.radius_m,
            speed_min_mps: self.speed_min_kmh * KMH,
            speed_max_mps: self.speed_max_kmh * KMH,
            terminal_pause_s: self.terminal_pause_s,
        }
    }

    pub fn routing(&self) -> RoutingConfig {
        RoutingConfig {
            k: self.k,
            deadline_s: self.deadline_s,
            faco: self.faco.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mobility().validate()?;
        self.routing().validate()?;
        let positive = [
            ("headway_s", self.headway_s),
            ("duration_s", self.duration_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.warmup_s >= 0.0) {
            return Err(Error::Config("warmup_s must be >= 0".into()));
        }
        if let MapSpec::Grid {
            rows,
            cols,
            block_m,
        } = self.map
        {
            if rows < 2 || cols < 2 || !(block_m > 0.0) {
                return Err(Error::Config(format!(
                    "grid {rows}x{cols} with block {block_m} m is invalid"
                )));
            }
        }
        if let LinesSpec::Synthetic { count } = self.lines {
            if count == 0 {
                return Err(Error::Config("at least one bus line is required".into()));
            }
        }
        if self.packets.count > 0 {
            if self.packets.buckets.is_empty() {
                return Err(Error::Config(
                    "packet workload needs a distance bucket".into(),
                ));
            }
            for [lo, hi] in &self.packets.buckets {
                if !(*lo >= 0.0 && hi > lo && hi.is_finite()) {
                    return Err(Error::Config(format!("bad distance bucket [{lo}, {hi}]")));
                }
            }
            if self.warmup_s > self.duration_s - self.deadline_s {
                return Err(Error::Config(
                    "warmup_s leaves no injection window before duration_s - deadline_s".into(),
                ));
            }
            if self.buses_per_line.unwrap_or(self.buses) == 0
                && self.packets.source == SourceKind::Bus
            {
                return Err(Error::Config("bus-originated workload needs buses".into()));
            }
        }
        Ok(())
    }

    /// The full-size setting keeps the radius within 200 to 800 m.
    pub fn validate_full_scale(&self) -> Result<()> {
        self.validate()?;
        if !(200.0..=800.0).contains(&self.radius_m) {
            return Err(Error::Config(format!(
                "radius {} m outside 200-800 m",
                self.radius_m
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketMetrics {
    pub lo: f64,
    pub hi: f64,
    pub generated: usize,
    pub delivered: usize,
    pub ratio: Option<f64>,
    pub avg_delay_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub scenario_id: String,
    pub axis_value: Option<f64>,
    pub generated: usize,
    pub delivered: usize,
    pub expired: usize,
    pub in_flight: usize,
    pub ratio: Option<f64>,
    pub avg_delay_s: Option<f64>,
    pub reroutes: u64,
    pub failed_forwards: u64,
    pub buckets: Vec<BucketMetrics>,
}

/// `delivered / generated`, or `None` without packets.
pub fn transmission_ratio(delivered: usize, generated: usize) -> Result<Option<f64>> {
    if delivered > generated {
        return Err(Error::InconsistentCounts {
            delivered,
            generated,
        });
    }
    Ok((generated > 0).then(|| delivered as f64 / generated as f64))
}

/// Mean of the given delivery delays, or `None` when empty.
pub fn average_delay(delays: &[f64]) -> Option<f64> {
    (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64)
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub trace_ants: bool,
    /// Record a world snapshot every this many seconds.
    pub snapshot_every_s: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: MetricsRecord,
    pub events: Vec<EventRecord>,
    pub ant_trace: Vec<AntEvent>,
    pub snapshots: Vec<WorldSnapshot>,
}

fn build_map(spec: &MapSpec) -> Result<StreetGraph> {
    match spec {
        MapSpec::Grid {
            rows,
            cols,
            block_m,
        } => generate_grid(*rows, *cols, *block_m),
        MapSpec::File { path } => load_map(&std::fs::read_to_string(path)?),
    }
}

fn build_lines<R: Rng>(
    spec: &LinesSpec,
    map: &StreetGraph,
    headway: f64,
    rng: &mut R,
) -> Result<Vec<BusLine>> {
    match spec {
        LinesSpec::Synthetic { count } => synthesize_lines(map, *count, headway, rng),
        LinesSpec::File { path } => load_lines(&std::fs::read_to_string(path)?),
    }
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform point on the covered streets at a distance within `[lo, hi)`
/// of `from`.
fn sample_destination<R: Rng>(
    rng: &mut R,
    map: &StreetGraph,
    covered: &[(StreetId, f64)],
    total: f64,
    from: Vec2,
    [lo, hi]: [f64; 2],
) -> Option<Vec2> {
    for _ in 0..20_000 {
        let mut u = rng.random_range(0.0..total);
        let mut pick = covered[covered.len() - 1];
        for &(s, len) in covered {
            if u < len {
                pick = (s, len);
                break;
            }
            u -= len;
        }
        let offset = rng.random_range(0.0..pick.1);
        let p = map.point_at(pick.0, offset, Direction::Forward).ok()?;
        let d = p.distance(from);
        if d >= lo && d < hi {
            return Some(p);
        }
    }
    None
}

fn pick_source<R: Rng>(rng: &mut R, world: &World, kind: SourceKind) -> Option<VehicleId> {
    let pool: Vec<VehicleId> = world
        .vehicles()
        .iter()
        .filter(|v| match kind {
            SourceKind::Bus => v.kind == VehicleKind::Bus,
            SourceKind::Car => v.kind == VehicleKind::Car,
            SourceKind::Any => true,
        })
        .map(|v| v.id)
        .collect();
    (!pool.is_empty()).then(|| pool[rng.random_range(0..pool.len())])
}

/// Runs one scenario to its horizon. Identical configs give identical
/// results.
pub fn run_scenario(config: &ScenarioConfig) -> Result<MetricsRecord> {
    Ok(run_scenario_with(config, &RunOptions::default())?.metrics)
}

pub fn run_scenario_with(config: &ScenarioConfig, options: &RunOptions) -> Result<RunOutput> {
    config.validate()?;
    let map = Arc::new(build_map(&config.map)?);
    let lines = build_lines(
        &config.lines,
        &map,
        config.headway_s,
        &mut stream(config.seed, 0),
    )?;
    if lines.is_empty() {
        return Err(Error::NoLines);
    }
    let (graph, coverage) = build_routing_graph(map.clone(), &lines)?;
    let coverage = Arc::new(coverage);

    let mut world = World::new(map.clone(), &lines, config.mobility(), config.seed ^ 0x5eed)?;
    let per_line = config.buses / lines.len();
    let extra = config.buses % lines.len();
    for (i, line) in lines.iter().enumerate() {
        let fleet = config
            .buses_per_line
            .unwrap_or(per_line + usize::from(i < extra));
        if fleet > 0 {
            world.spawn_buses(line.id, fleet, config.headway_s)?;
        }
    }
    world.spawn_cars(config.cars)?;

    let mut engine = Engine::new(
        coverage.clone(),
        Arc::new(graph),
        config.routing(),
        config.seed ^ 0xa17,
    )?;
    if options.trace_ants {
        engine.trace_ants();
    }

    let covered: Vec<(StreetId, f64)> = map
        .streets()
        .filter(|s| coverage.is_covered(s.id))
        .map(|s| (s.id, s.length()))
        .collect();
    let covered_len: f64 = covered.iter().map(|c| c.1).sum();

    let tick = config.tick_s;
    let steps = (config.duration_s / tick).round() as u64;
    let n = config.packets.count;
    let window = config.duration_s - config.deadline_s - config.warmup_s;
    let mut schedule: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let t = config.warmup_s + window * i as f64 / n as f64;
        schedule
            .entry(((t / tick).round() as u64).max(1))
            .or_default()
            .push(i);
    }
    let mut workload_rng = stream(config.seed, 2);
    let mut packet_bucket = Vec::with_capacity(n);
    let snapshot_every = options
        .snapshot_every_s
        .map(|s| ((s / tick).round() as u64).max(1));
    let mut snapshots = Vec::new();

    for step in 1..=steps {
        world.step()?;
        if let Some(due) = schedule.get(&step) {
            for &i in due {
                let bucket = config.packets.buckets[i % config.packets.buckets.len()];
                let mut placed = None;
                for _ in 0..50 {
                    let Some(src) = pick_source(&mut workload_rng, &world, config.packets.source)
                    else {
                        break;
                    };
                    let from = world.vehicle(src)?.position;
                    if let Some(dst) = sample_destination(
                        &mut workload_rng,
                        &map,
                        &covered,
                        covered_len,
                        from,
                        bucket,
                    ) {
                        placed = Some((src, dst));
                        break;
                    }
                }
                let Some((src, dst)) = placed else {
                    return Err(Error::Config(format!(
                        "cannot place a destination {}-{} m from any source",
                        bucket[0], bucket[1]
                    )));
                };
                engine.originate(&world, src, dst)?;
                packet_bucket.push(i % config.packets.buckets.len());
            }
        }
        engine.step(&world)?;
        if snapshot_every.is_some_and(|k| step % k == 0) {
            snapshots.push(world.snapshot());
        }
    }

    let metrics = summarize(
        &config.id,
        None,
        engine.packets(),
        &packet_bucket,
        &config.packets.buckets,
    )?;
    Ok(RunOutput {
        metrics,
        events: engine.events().to_vec(),
        ant_trace: engine.ant_trace().to_vec(),
        snapshots,
    })
}

fn summarize(
    id: &str,
    axis_value: Option<f64>,
    packets: &[Packet],
    bucket_of: &[usize],
    buckets: &[[f64; 2]],
) -> Result<MetricsRecord> {
    let delays: Vec<f64> = packets.iter().filter_map(Packet::delay).collect();
    let delivered = delays.len();
    let generated = packets.len();
    let expired = packets
        .iter()
        .filter(|p| matches!(p.state, PacketState::Expired(_)))
        .count();
    let mut per_bucket = Vec::with_capacity(buckets.len());
    for (b, [lo, hi]) in buckets.iter().enumerate() {
        let mine: Vec<&Packet> = packets
            .iter()
            .zip(bucket_of)
            .filter(|(_, &k)| k == b)
            .map(|(p, _)| p)
            .collect();
        let d: Vec<f64> = mine.iter().filter_map(|p| p.delay()).collect();
        per_bucket.push(BucketMetrics {
            lo: *lo,
            hi: *hi,
            generated: mine.len(),
            delivered: d.len(),
            ratio: transmission_ratio(d.len(), mine.len())?,
            avg_delay_s: average_delay(&d),
        });
    }
    Ok(MetricsRecord {
        scenario_id: id.to_string(),
        axis_value,
        generated,
        delivered,
        expired,
        in_flight: generated - delivered - expired,
        ratio: transmission_ratio(delivered, generated)?,
        avg_delay_s: average_delay(&delays),
        reroutes: packets.iter().map(|p| u64::from(p.reroutes)).sum(),
        failed_forwards: packets.iter().map(|p| u64::from(p.failed_forwards)).sum(),
        buckets: per_bucket,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Radius,
    Distance,
    Density,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Radius => "radius",
            SweepAxis::Distance => "distance",
            SweepAxis::Density => "density",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radius" => Ok(SweepAxis::Radius),
            "distance" => Ok(SweepAxis::Distance),
            "density" => Ok(SweepAxis::Density),
            other => Err(Error::Config(format!("unknown sweep axis {other:?}"))),
        }
    }
}

/// Seed of a sweep cell; depends only on the base seed, axis and value.
pub fn cell_seed(base: u64, axis: SweepAxis, value: f64) -> u64 {
    let digest = Sha256::digest(format!("{base}:{}:{value}", axis.name()));
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// The config of one sweep cell.
pub fn sweep_cell(
    base: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    index: usize,
) -> ScenarioConfig {
    let value = values[index];
    let mut cfg = base.clone();
    cfg.seed = cell_seed(base.seed, axis, value);
    let label = match axis {
        SweepAxis::Radius => {
            cfg.radius_m = value;
            format!("radius-{value}")
        }
        SweepAxis::Distance => {
            cfg.packets.buckets = vec![[value, value + BUCKET_WIDTH_M]];
            format!("distance-{value}")
        }
        SweepAxis::Density => {
            cfg.cars = value.round() as usize;
            if values.len() == 3 {
                ["sparse", "common", "dense"][index].to_string()
            } else {
                format!("density-{value}")
            }
        }
    };
    cfg.id = format!("{}-{label}", base.id);
    cfg
}

/// Runs one scenario per value in parallel; output order follows `values`.
pub fn run_sweep(
    base: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    options: &RunOptions,
) -> Result<Vec<RunOutput>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    (0..values.len())
        .into_par_iter()
        .map(|i| {
            let cfg = sweep_cell(base, axis, values, i);
            let mut out = run_scenario_with(&cfg, options)?;
            out.metrics.axis_value = Some(values[i]);
            Ok(out)
        })
        .collect()
}

pub const CSV_HEADER: &str =
    "scenario_id,axis_value,generated,delivered,ratio,avg_delay_s,reroutes,failed_forwards";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_csv(rows: &[MetricsRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.scenario_id,
            opt(r.axis_value),
            r.generated,
            r.delivered,
            opt(r.ratio),
            opt(r.avg_delay_s),
            r.reroutes,
            r.failed_forwards
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::EventKind;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            id: "small".into(),
            map: MapSpec::Grid {
                rows: 4,
                cols: 4,
                block_m: 300.0,
            },
            lines: LinesSpec::Synthetic { count: 3 },
            cars: 60,
            buses: 12,
            duration_s: 200.0,
            warmup_s: 20.0,
            deadline_s: 60.0,
            packets: Workload {
                count: 30,
                buckets: vec![[0.0, 500.0], [500.0, 1000.0]],
                source: SourceKind::Bus,
            },
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(transmission_ratio(8, 10).unwrap(), Some(0.8));
        assert_eq!(transmission_ratio(0, 10).unwrap(), Some(0.0));
        assert_eq!(transmission_ratio(10, 10).unwrap(), Some(1.0));
        assert_eq!(transmission_ratio(0, 0).unwrap(), None);
        assert!(matches!(
            transmission_ratio(3, 2),
            Err(Error::InconsistentCounts { .. })
        ));
    }

    #[test]
    fn delay_examples() {
        assert_eq!(average_delay(&[10.0, 20.0]), Some(15.0));
        assert_eq!(average_delay(&[7.5]), Some(7.5));
        assert_eq!(average_delay(&[]), None);
    }

    #[test]
    fn zero_packets_give_null_ratio() {
        let cfg = ScenarioConfig {
            packets: Workload {
                count: 0,
                ..Workload::default()
            },
            ..small()
        };
        let m = run_scenario(&cfg).unwrap();
        assert_eq!(m.generated, 0);
        assert_eq!(m.ratio, None);
        assert_eq!(m.avg_delay_s, None);
    }

    #[test]
    fn nearby_destinations_are_all_delivered() {
        let cfg = ScenarioConfig {
            packets: Workload {
                count: 40,
                buckets: vec![[0.0, 100.0]],
                source: SourceKind::Bus,
            },
            ..small()
        };
        let m = run_scenario(&cfg).unwrap();
        assert_eq!(m.generated, 40);
        assert_eq!(m.ratio, Some(1.0));
        assert!(m.avg_delay_s.unwrap() <= cfg.tick_s + 0.01);
    }

    #[test]
    fn same_seed_same_result() {
        let a = run_scenario_with(&small(), &RunOptions::default()).unwrap();
        let b = run_scenario_with(&small(), &RunOptions::default()).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn metrics_match_event_log() {
        let cfg = ScenarioConfig {
            packets: Workload {
                count: 100,
                ..small().packets
            },
            ..small()
        };
        let out = run_scenario_with(&cfg, &RunOptions::default()).unwrap();
        let m = &out.metrics;
        assert_eq!(m.generated, 100);
        assert_eq!(m.generated, m.delivered + m.expired + m.in_flight);
        let delays: Vec<f64> = out
            .events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Deliver {
                    created, delivered, ..
                } => Some(delivered - created),
                _ => None,
            })
            .collect();
        assert_eq!(delays.len(), m.delivered);
        if let Some(avg) = m.avg_delay_s {
            let replay = delays.iter().sum::<f64>() / delays.len() as f64;
            assert!((avg - replay).abs() < 1e-9);
        }
        let originated = out
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Originate { .. }))
            .count();
        assert_eq!(originated, m.generated);
    }

    #[test]
    fn sweeps_keep_order_and_labels() {
        let base = ScenarioConfig {
            duration_s: 120.0,
            warmup_s: 10.0,
            deadline_s: 60.0,
            packets: Workload {
                count: 5,
                ..small().packets
            },
            ..small()
        };
        let out = run_sweep(
            &base,
            SweepAxis::Density,
            &[20.0, 40.0, 60.0],
            &RunOptions::default(),
        )
        .unwrap();
        let ids: Vec<_> = out.iter().map(|o| o.metrics.scenario_id.clone()).collect();
        assert_eq!(ids, ["small-sparse", "small-common", "small-dense"]);
        let csv = metrics_csv(&out.iter().map(|o| o.metrics.clone()).collect::<Vec<_>>());
        assert_eq!(csv.lines().count(), 4);
        assert!(run_sweep(&base, SweepAxis::Radius, &[], &RunOptions::default()).is_err());
        let radius = run_sweep(
            &base,
            SweepAxis::Radius,
            &[200.0, 400.0, 600.0, 800.0],
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(radius.len(), 4);
        assert_eq!(radius[2].metrics.axis_value, Some(600.0));
    }

    #[test]
    fn cell_seeds_are_independent_of_other_cells() {
        let a = cell_seed(1, SweepAxis::Radius, 200.0);
        assert_eq!(a, cell_seed(1, SweepAxis::Radius, 200.0));
        assert_ne!(a, cell_seed(1, SweepAxis::Radius, 400.0));
        assert_ne!(a, cell_seed(2, SweepAxis::Radius, 200.0));
        assert_ne!(a, cell_seed(1, SweepAxis::Distance, 200.0));
    }

    #[test]
    fn config_round_trip_and_validation() {
        let cfg = ScenarioConfig::default();
        assert_eq!(ScenarioConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        let partial = ScenarioConfig::from_json(r#"{"radius_m": 300, "seed": 9}"#).unwrap();
        assert_eq!(partial.radius_m, 300.0);
        assert_eq!(partial.cars, 400);
        assert!(ScenarioConfig::from_json(r#"{"radius_m": -1}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"warmup_s": 590}"#).is_err());
        let mut full = ScenarioConfig::full_scale();
        assert!(full.validate_full_scale().is_ok());
        full.radius_m = 100.0;
        assert!(full.validate_full_scale().is_err());
    }

    #[test]
    fn csv_writes_nulls_as_empty() {
        let row = MetricsRecord {
            scenario_id: "x".into(),
            axis_value: None,
            generated: 0,
            delivered: 0,
            expired: 0,
            in_flight: 0,
            ratio: None,
            avg_delay_s: None,
            reroutes: 0,
            failed_forwards: 0,
            buckets: vec![],
        };
        assert_eq!(metrics_csv(&[row]).lines().nth(1).unwrap(), "x,,0,0,,,0,0");
    }
}
