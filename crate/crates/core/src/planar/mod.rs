//! Planar geometry: simple polygons, disks, sectors, tubes, boolean regions,
//! in-region shortest paths and discrete topology checks.

mod geodesic;
mod intervals;
mod omega;
mod polygon;
mod region;
mod topology;

pub use geodesic::{geodesic_length, max_geodesic_length, PathOracle};
pub use intervals::IntervalSet;
pub use omega::{
    build_omega, carved_polygon, excluded_set, inward_bisectors, CarveSpec, CarvedPolygon, NeckSpec, OmegaBuild, OmegaCheck,
    OmegaInput, VertexCarve, ARC_STEP,
};
pub use polygon::{segment_segment_distance, segments_intersect, PolygonCurve, SimplePolygon};
pub use region::{signed_side, tube, AnnularSector, Disk, PlanarRegion, TubeNeighborhood};
pub use topology::{grid_topology, is_simply_connected, GridTopology, TopologyCertificate, GRID_RESOLUTION};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::C;

/// Points within this distance of a boundary are classified as boundary.
pub const BOUNDARY_BAND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Inside,
    Outside,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanarError {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("polygon does not contain the origin in its interior")]
    OriginNotInterior,
    #[error("domain check {condition} failed: {detail}")]
    OmegaInvalid { condition: String, detail: String },
    #[error("point {z} is not reachable from the origin inside the region")]
    Unreachable { z: C },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
}

impl PlanarError {
    pub fn omega(condition: &str, detail: impl Into<String>) -> Self {
        PlanarError::OmegaInvalid {
            condition: condition.to_string(),
            detail: detail.into(),
        }
    }
}
