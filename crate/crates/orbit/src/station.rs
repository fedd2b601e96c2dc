//! Ground stations and topocentric right ascension / declination.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::OrbitalState;
use crate::{OrbitError, ARCSEC, FLATTENING, OMEGA_EARTH, R_EARTH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub name: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_km: f64,
    #[serde(default)]
    pub ra_bias_arcsec: f64,
    #[serde(default)]
    pub dec_bias_arcsec: f64,
    pub noise_sigma_arcsec: f64,
    /// Measurements below this elevation are masked.
    #[serde(default)]
    pub min_elevation_deg: f64,
}

impl Station {
    pub fn validate(&self) -> Result<(), OrbitError> {
        if !(self.lat_deg.abs() <= 90.0) {
            return Err(OrbitError::Argument(format!(
                "{}: latitude out of range",
                self.name
            )));
        }
        if !(self.noise_sigma_arcsec >= 0.0) {
            return Err(OrbitError::Argument(format!(
                "{}: negative noise",
                self.name
            )));
        }
        Ok(())
    }

    /// Earth-fixed position on the WGS84 ellipsoid, km.
    pub fn ecef(&self) -> Vector3<f64> {
        let (lat, lon) = (self.lat_deg.to_radians(), self.lon_deg.to_radians());
        let e2 = FLATTENING * (2.0 - FLATTENING);
        let n = R_EARTH / (1.0 - e2 * lat.sin().powi(2)).sqrt();
        Vector3::new(
            (n + self.alt_km) * lat.cos() * lon.cos(),
            (n + self.alt_km) * lat.cos() * lon.sin(),
            (n * (1.0 - e2) + self.alt_km) * lat.sin(),
        )
    }

    /// Inertial position and local geodetic up vector at time `t`.
    pub fn eci(&self, earth: &EarthRotation, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        let theta = earth.angle(t);
        let (lat, lon) = (self.lat_deg.to_radians(), self.lon_deg.to_radians());
        let up = Vector3::new(
            lat.cos() * (lon + theta).cos(),
            lat.cos() * (lon + theta).sin(),
            lat.sin(),
        );
        (rotate_z(&self.ecef(), theta), up)
    }
}

/// Greenwich sidereal angle `θ(t) = θ₀ + ω t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthRotation {
    pub gmst0_rad: f64,
    pub rate: f64,
}

impl Default for EarthRotation {
    fn default() -> Self {
        Self {
            gmst0_rad: 0.0,
            rate: OMEGA_EARTH,
        }
    }
}

impl EarthRotation {
    pub fn new(gmst0_deg: f64) -> Self {
        Self {
            gmst0_rad: gmst0_deg.to_radians(),
            rate: OMEGA_EARTH,
        }
    }

    pub fn angle(&self, t: f64) -> f64 {
        self.gmst0_rad + self.rate * t
    }
}

fn rotate_z(v: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let (s, c) = angle.sin_cos();
    Vector3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

/// Topocentric `(ra, dec, elevation)` of `target` seen from `site` with
/// local up vector `up`; `ra ∈ [0, 2π)`.
pub fn observe_from(
    site: &Vector3<f64>,
    up: &Vector3<f64>,
    target: &Vector3<f64>,
) -> (f64, f64, f64) {
    let rho = target - site;
    let range = rho.norm();
    let ra = rho.y.atan2(rho.x).rem_euclid(std::f64::consts::TAU);
    let dec = (rho.z / range).clamp(-1.0, 1.0).asin();
    let elevation = (rho.dot(up) / range).clamp(-1.0, 1.0).asin();
    (ra, dec, elevation)
}

/// Biased right ascension and declination (radians) of `state` from
/// `station` at `state.epoch`; errors when the target is under the
/// station's elevation mask.
pub fn observe(
    state: &OrbitalState,
    station: &Station,
    earth: &EarthRotation,
) -> Result<(f64, f64), OrbitError> {
    let (site, up) = station.eci(earth, state.epoch);
    let (ra, dec, elevation) = observe_from(&site, &up, &state.position);
    if elevation <= station.min_elevation_deg.to_radians() {
        return Err(OrbitError::BelowHorizon {
            station: station.name.clone(),
            elevation_deg: elevation.to_degrees(),
        });
    }
    Ok((
        ra + station.ra_bias_arcsec * ARCSEC,
        dec + station.dec_bias_arcsec * ARCSEC,
    ))
}
