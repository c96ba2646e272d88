use std::collections::BTreeMap;

use btsc_core::events::{read_jsonl, write_jsonl, EventKind};
use btsc_core::experiment::{run_scenario_with, MapSpec, RunOptions, ScenarioConfig, Workload};

fn small() -> ScenarioConfig {
    ScenarioConfig {
        id: "small".into(),
        map: MapSpec::Grid {
            rows: 5,
            cols: 5,
            block_m: 400.0,
        },
        cars: 120,
        buses: 18,
        duration_s: 240.0,
        warmup_s: 40.0,
        deadline_s: 90.0,
        packets: Workload {
            count: 40,
            buckets: vec![[0.0, 500.0], [500.0, 1000.0]],
            ..Workload::default()
        },
        ..ScenarioConfig::default()
    }
}

#[test]
fn metrics_match_the_event_log() {
    let out = run_scenario_with(&small(), &RunOptions::default()).unwrap();
    let m = &out.metrics;
    assert_eq!(m.generated, 40);
    assert_eq!(m.generated, m.delivered + m.expired + m.in_flight);

    let mut buf = Vec::new();
    write_jsonl(&mut buf, &out.events).unwrap();
    let log = read_jsonl(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(log.len(), out.events.len());

    let mut delays = BTreeMap::new();
    let (mut originated, mut expired, mut reroutes, mut failed) = (0, 0, 0, 0);
    for e in &log {
        match &e.kind {
            EventKind::Originate { .. } => originated += 1,
            EventKind::Deliver {
                created, delivered, ..
            } => {
                assert!(delays.insert(e.packet, delivered - created).is_none());
            }
            EventKind::Expire { .. } => expired += 1,
            EventKind::Reroute { .. } => reroutes += 1,
            EventKind::FailedForward { .. } => failed += 1,
            _ => {}
        }
    }
    assert_eq!(originated, m.generated);
    assert_eq!(delays.len(), m.delivered);
    assert_eq!(expired, m.expired);
    assert_eq!(reroutes, m.reroutes);
    assert_eq!(failed, m.failed_forwards);
    if let Some(avg) = m.avg_delay_s {
        let mean = delays.values().sum::<f64>() / delays.len() as f64;
        assert!((avg - mean).abs() < 1e-9);
        assert!(delays.values().all(|d| *d >= 0.0 && *d <= 90.0 + 1e-9));
    }
}

#[test]
fn snapshots_follow_the_requested_period() {
    let cfg = ScenarioConfig {
        duration_s: 20.0,
        warmup_s: 5.0,
        deadline_s: 10.0,
        ..small()
    };
    let out = run_scenario_with(
        &cfg,
        &RunOptions {
            trace_ants: true,
            snapshot_every_s: Some(5.0),
        },
    )
    .unwrap();
    let times: Vec<f64> = out.snapshots.iter().map(|s| s.t).collect();
    assert!(times.len() >= 4, "{times:?}");
    assert!(times.windows(2).all(|w| (w[1] - w[0] - 5.0).abs() < 1e-9));
}
