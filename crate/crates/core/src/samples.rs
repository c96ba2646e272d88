//! Small hand-built scenarios shared by tests, examples and the CLI.

use std::sync::Arc;

use crate::bus_network::BusLine;
use crate::ids::{IntersectionId, LineId, StreetId};
use crate::street_map::{IntersectionRecord, StreetGraph, StreetRecord};

/// Seven-intersection map with three candidate corridors between a source
/// and a destination, served by four bus lines.
///
/// ```text
///   F(0,1000) --E3-- E(500,1000) --E8-- D(1000,1000)
///   |                |
///   E6               E7
///   |                |
///   C(0,500) --E2--- B(500,500)
///   |                |
///   E4               E5
///   |                |
///   S(0,0) ---E1---- A(500,0)
/// ```
///
/// Lines: `E1 E5 E7 E8`, `E4 E1`, `E7 E3`, `E4 E2`. Street `En` has id `n`.
/// The corridor `E1 E5 E7 E8` (`p1`) scores 11/12; `E4 E2 E7 E8` (`p2`) is
/// lighter but scores 1/3.
pub struct ConsistencyDemo {
    pub map: Arc<StreetGraph>,
    pub lines: Vec<BusLine>,
    pub source: IntersectionId,
    pub destination: IntersectionId,
    pub p1: [StreetId; 4],
    pub p2: [StreetId; 4],
    pub p3: [StreetId; 4],
}

pub fn consistency_demo() -> ConsistencyDemo {
    const S: u32 = 0;
    const A: u32 = 1;
    const C: u32 = 2;
    const B: u32 = 3;
    const F: u32 = 4;
    const E: u32 = 5;
    const D: u32 = 6;
    let nodes = [
        (S, 0.0, 0.0),
        (A, 500.0, 0.0),
        (C, 0.0, 500.0),
        (B, 500.0, 500.0),
        (F, 0.0, 1000.0),
        (E, 500.0, 1000.0),
        (D, 1000.0, 1000.0),
    ];
    let streets = [
        (1, S, A),
        (2, C, B),
        (3, F, E),
        (4, S, C),
        (5, A, B),
        (6, C, F),
        (7, B, E),
        (8, E, D),
    ];
    let map = StreetGraph::from_records(
        nodes.map(|(id, x, y)| IntersectionRecord {
            id: IntersectionId(id),
            x,
            y,
        }),
        streets.map(|(id, a, b)| StreetRecord {
            id: StreetId(id),
            a: IntersectionId(a),
            b: IntersectionId(b),
        }),
    )
    .expect("demo map is valid");
    let e = StreetId;
    let line = |id: u32, s: &[u32]| BusLine {
        id: LineId(id),
        trajectory: s.iter().map(|&n| e(n)).collect(),
        headway: 60.0,
    };
    ConsistencyDemo {
        map: Arc::new(map),
        lines: vec![
            line(0, &[1, 5, 7, 8]),
            line(1, &[4, 1]),
            line(2, &[7, 3]),
            line(3, &[4, 2]),
        ],
        source: IntersectionId(S),
        destination: IntersectionId(D),
        p1: [e(1), e(5), e(7), e(8)],
        p2: [e(4), e(2), e(7), e(8)],
        p3: [e(4), e(6), e(3), e(8)],
    }
}
