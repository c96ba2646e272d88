use thiserror::Error;

use crate::ids::{IntersectionId, LineId, StreetId, VehicleId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("invalid grid dimensions: {0}")]
    InvalidGrid(String),

    #[error("unknown street {0}")]
    UnknownStreet(StreetId),

    #[error("unknown intersection {0}")]
    UnknownIntersection(IntersectionId),

    #[error("offset {offset} m outside street {street} of length {length} m")]
    OffsetOutOfRange {
        street: StreetId,
        offset: f64,
        length: f64,
    },

    #[error("invalid bus line {line}: {reason}")]
    InvalidLine { line: LineId, reason: String },

    #[error("no bus lines defined")]
    NoLines,

    #[error("streets {0} and {1} are not adjoining")]
    NotAdjacent(StreetId, StreetId),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("source and destination are the same intersection {0}")]
    SameEndpoints(IntersectionId),

    #[error("no route from {0} to {1}")]
    NoPath(IntersectionId, IntersectionId),

    #[error("k must be at least 1")]
    InvalidK,

    #[error("map has no intersections")]
    EmptyMap,

    #[error("vehicles are {distance} m apart, beyond radius {radius} m")]
    NotConnected { distance: f64, radius: f64 },

    #[error("unknown vehicle {0}")]
    UnknownVehicle(VehicleId),

    #[error("empty neighbor set")]
    NoNeighbors,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("delivered count {delivered} exceeds generated count {generated}")]
    InconsistentCounts { delivered: usize, generated: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
