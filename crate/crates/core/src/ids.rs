use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }

        impl From<u32> for $name {
            fn from(v: u32) -> Self {
                Self(v)
            }
        }
    };
}

id_type!(
    /// Vertex of the street graph.
    IntersectionId,
    "v"
);
id_type!(
    /// Edge of the street graph.
    StreetId,
    "e"
);
id_type!(LineId, "line");
id_type!(
    /// Vehicles are numbered densely from zero in spawn order.
    VehicleId,
    "veh"
);
id_type!(PacketId, "pkt");
