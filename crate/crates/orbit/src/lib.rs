//! Orbital process and angles-only measurement models.
//!
//! Units are km, km/s and seconds throughout; spacecraft mass and area are
//! kg and m², station biases and noise are arcseconds.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod events;
pub mod models;
pub mod station;

pub use dynamics::{
    acceleration, propagate, Atmosphere, ForceModel, OrbitalState, SpacecraftParams,
};
pub use events::{apply_event, Event, EventKind};
pub use models::{AnglesMeasurement, OrbitProcess};
pub use station::{observe, observe_from, EarthRotation, Station};

use thiserror::Error;

/// Gravitational parameter, km³/s².
pub const MU_EARTH: f64 = 398_600.441_8;
/// Equatorial radius, km.
pub const R_EARTH: f64 = 6378.137;
pub const J2: f64 = 1.082_626_68e-3;
/// Sidereal rotation rate, rad/s.
pub const OMEGA_EARTH: f64 = 7.292_115e-5;
/// WGS84 flattening.
pub const FLATTENING: f64 = 1.0 / 298.257_223_563;
/// Radians per arcsecond.
pub const ARCSEC: f64 = std::f64::consts::PI / 648_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("trajectory re-entered: radius {radius_km} km is below the surface")]
    ReEntry { radius_km: f64 },
    #[error("target below the horizon of {station} (elevation {elevation_deg:.3} deg)")]
    BelowHorizon { station: String, elevation_deg: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
}
