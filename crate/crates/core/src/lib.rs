//! Bus-trajectory-based street-centric routing (BTSC) for urban vehicular
//! networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`street_map`]: static road topology (intersections, straight streets).
//! * [`bus_network`]: bus-line trajectories, street-appearance probabilities,
//!   routing-graph weights, street and path consistency scores.
//! * [`path_planner`]: k lightest loopless paths and consistency-based
//!   routing-path selection.
//! * [`link_model`]: connection duration, link reliability and expected
//!   lifetime from pairwise kinematics.
//! * [`mobility`]: the discrete-time world (buses, cars, beacons,
//!   neighbor tables).
//! * [`faco`]: ant-colony discovery of multi-hop links between relay buses.
//! * [`routing`]: packet carry-and-forward engine.
//! * [`experiment`]: scenario orchestration, sweeps and metrics.

pub mod bus_network;
pub mod error;
pub mod events;
pub mod experiment;
pub mod faco;
pub mod geometry;
pub mod ids;
pub mod link_model;
pub mod mobility;
pub mod path_planner;
pub mod routing;
pub mod samples;
pub mod street_map;

pub use error::{Error, Result};
pub use geometry::Vec2;
pub use ids::{IntersectionId, LineId, PacketId, StreetId, VehicleId};
