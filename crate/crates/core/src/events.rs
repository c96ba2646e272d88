//! Per-packet event log, one JSON object per line.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Vec2;
use crate::ids::{PacketId, StreetId, VehicleId};
use crate::mobility::VehicleKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardMode {
    /// Car source hands the packet to the nearest bus.
    Handoff,
    /// One hop to a qualified neighbor bus.
    Direct,
    /// Multi-hop link found by ant discovery.
    Discovered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    Originate {
        src: VehicleId,
        src_kind: VehicleKind,
        dst: Vec2,
    },
    Plan {
        carrier: VehicleId,
        streets: Vec<StreetId>,
        ppc: f64,
    },
    Forward {
        mode: ForwardMode,
        from: VehicleId,
        to: VehicleId,
        to_kind: VehicleKind,
        to_street: StreetId,
        /// Streets a recipient had to be on; empty for handoffs.
        route_tail: Vec<StreetId>,
        /// Interior relays of a discovered link.
        via: Vec<VehicleId>,
        delay: f64,
    },
    FailedForward {
        from: VehicleId,
        to: VehicleId,
        reason: String,
    },
    Carry {
        carrier: VehicleId,
    },
    Discovery {
        carrier: VehicleId,
        responses: usize,
    },
    Deviation {
        carrier: VehicleId,
        street: StreetId,
    },
    Reroute {
        carrier: VehicleId,
        streets: Vec<StreetId>,
        ppc: f64,
    },
    Deliver {
        carrier: VehicleId,
        created: f64,
        delivered: f64,
        hops: u32,
    },
    Expire {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub packet: PacketId,
    #[serde(flatten)]
    pub kind: EventKind,
}

pub fn write_jsonl<W: Write, T: Serialize>(out: &mut W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(source: &str) -> Result<Vec<EventRecord>> {
    source
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
