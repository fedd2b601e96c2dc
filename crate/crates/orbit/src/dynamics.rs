//! Two-body + J2 + drag dynamics with a fixed-step RK4 integrator.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::{OrbitError, J2, MU_EARTH, OMEGA_EARTH, R_EARTH};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitalState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Seconds since scenario start.
    pub epoch: f64,
}

impl OrbitalState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>, epoch: f64) -> Self {
        Self {
            position,
            velocity,
            epoch,
        }
    }

    pub fn from_slice(rv: &[f64; 6], epoch: f64) -> Self {
        Self::new(
            Vector3::new(rv[0], rv[1], rv[2]),
            Vector3::new(rv[3], rv[4], rv[5]),
            epoch,
        )
    }

    pub fn from_vector(x: &DVector<f64>, epoch: f64) -> Result<Self, OrbitError> {
        if x.len() != 6 {
            return Err(OrbitError::Argument(format!(
                "orbital state needs 6 components, got {}",
                x.len()
            )));
        }
        Ok(Self::new(
            Vector3::new(x[0], x[1], x[2]),
            Vector3::new(x[3], x[4], x[5]),
            epoch,
        ))
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(6, self.position.iter().chain(self.velocity.iter()).copied())
    }

    /// Specific mechanical energy of the two-body problem, km²/s².
    pub fn energy(&self) -> f64 {
        0.5 * self.velocity.norm_squared() - MU_EARTH / self.position.norm()
    }

    pub fn angular_momentum(&self) -> Vector3<f64> {
        self.position.cross(&self.velocity)
    }

    /// Right ascension of the ascending node, radians in `[0, 2π)`.
    pub fn raan(&self) -> f64 {
        let h = self.angular_momentum();
        h.x.atan2(-h.y).rem_euclid(std::f64::consts::TAU)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacecraftParams {
    /// kg
    pub mass: f64,
    /// m²
    pub area: f64,
    pub cd: f64,
}

impl SpacecraftParams {
    pub fn new(mass: f64, area: f64, cd: f64) -> Result<Self, OrbitError> {
        let p = Self { mass, area, cd };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), OrbitError> {
        if !(self.mass > 0.0 && self.area > 0.0 && self.cd > 0.0) {
            return Err(OrbitError::Argument(format!(
                "mass, area and cd must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// `C_d A / m`, m²/kg.
    pub fn ballistic_coefficient(&self) -> f64 {
        self.cd * self.area / self.mass
    }
}

/// Piecewise exponential atmosphere: base altitude (km), base density
/// (kg/m³), scale height (km).
const EXPONENTIAL_TABLE: [(f64, f64, f64); 28] = [
    (0.0, 1.225, 7.249),
    (25.0, 3.899e-2, 6.349),
    (30.0, 1.774e-2, 6.682),
    (40.0, 3.972e-3, 7.554),
    (50.0, 1.057e-3, 8.382),
    (60.0, 3.206e-4, 7.714),
    (70.0, 8.770e-5, 6.549),
    (80.0, 1.905e-5, 5.799),
    (90.0, 3.396e-6, 5.382),
    (100.0, 5.297e-7, 5.877),
    (110.0, 9.661e-8, 7.263),
    (120.0, 2.438e-8, 9.473),
    (130.0, 8.484e-9, 12.636),
    (140.0, 3.845e-9, 16.149),
    (150.0, 2.070e-9, 22.523),
    (180.0, 5.464e-10, 29.740),
    (200.0, 2.789e-10, 37.105),
    (250.0, 7.248e-11, 45.546),
    (300.0, 2.418e-11, 53.628),
    (350.0, 9.518e-12, 53.298),
    (400.0, 3.725e-12, 58.515),
    (450.0, 1.585e-12, 60.828),
    (500.0, 6.967e-13, 63.822),
    (600.0, 1.454e-13, 71.835),
    (700.0, 3.614e-14, 88.667),
    (800.0, 1.170e-14, 124.64),
    (900.0, 5.245e-15, 181.05),
    (1000.0, 3.019e-15, 268.00),
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Atmosphere {
    #[default]
    Exponential,
    /// Drag-free environment regardless of the drag flag.
    Vacuum,
}

impl Atmosphere {
    /// Density in kg/m³ at geometric altitude `h` km.
    pub fn density(&self, h: f64) -> f64 {
        match self {
            Atmosphere::Vacuum => 0.0,
            Atmosphere::Exponential => {
                if h < 0.0 {
                    return EXPONENTIAL_TABLE[0].1;
                }
                let (h0, rho0, scale) = EXPONENTIAL_TABLE
                    .iter()
                    .rev()
                    .find(|row| row.0 <= h)
                    .copied()
                    .unwrap_or(EXPONENTIAL_TABLE[0]);
                rho0 * (-(h - h0) / scale).exp()
            }
        }
    }
}

/// Additional acceleration `(r, v, t) -> a` in km/s², e.g. J3 or third-body
/// terms.
pub type ExtraAcceleration =
    Arc<dyn Fn(&Vector3<f64>, &Vector3<f64>, f64) -> Vector3<f64> + Send + Sync>;

#[derive(Clone)]
pub struct ForceModel {
    pub j2: bool,
    pub drag: bool,
    pub atmosphere: Atmosphere,
    pub extra: Option<ExtraAcceleration>,
}

impl Default for ForceModel {
    fn default() -> Self {
        Self {
            j2: true,
            drag: true,
            atmosphere: Atmosphere::Exponential,
            extra: None,
        }
    }
}

impl fmt::Debug for ForceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForceModel")
            .field("j2", &self.j2)
            .field("drag", &self.drag)
            .field("atmosphere", &self.atmosphere)
            .field("extra", &self.extra.is_some())
            .finish()
    }
}

impl ForceModel {
    pub fn two_body() -> Self {
        Self {
            j2: false,
            drag: false,
            atmosphere: Atmosphere::Vacuum,
            extra: None,
        }
    }
}

fn j2_acceleration(r: &Vector3<f64>) -> Vector3<f64> {
    let rn = r.norm();
    let z2 = (r.z / rn).powi(2);
    let k = -1.5 * J2 * MU_EARTH * R_EARTH * R_EARTH / rn.powi(5);
    Vector3::new(
        k * r.x * (1.0 - 5.0 * z2),
        k * r.y * (1.0 - 5.0 * z2),
        k * r.z * (3.0 - 5.0 * z2),
    )
}

/// Velocity relative to the co-rotating atmosphere, km/s.
pub fn relative_velocity(r: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    v - Vector3::new(0.0, 0.0, OMEGA_EARTH).cross(r)
}

/// Cannonball drag in km/s².
pub fn drag_acceleration(
    r: &Vector3<f64>,
    v: &Vector3<f64>,
    params: &SpacecraftParams,
    atmosphere: Atmosphere,
) -> Vector3<f64> {
    let rho = atmosphere.density(r.norm() - R_EARTH);
    let v_rel = relative_velocity(r, v);
    // ρ[kg/m³]·(A/m)[m²/kg] is 1/m; ×1000 turns km²/s²/m into km/s²
    v_rel * (-0.5 * rho * params.ballistic_coefficient() * v_rel.norm() * 1000.0)
}

pub fn acceleration(
    r: &Vector3<f64>,
    v: &Vector3<f64>,
    t: f64,
    params: &SpacecraftParams,
    force: &ForceModel,
) -> Vector3<f64> {
    let rn = r.norm();
    let mut a = r * (-MU_EARTH / (rn * rn * rn));
    if force.j2 {
        a += j2_acceleration(r);
    }
    if force.drag {
        a += drag_acceleration(r, v, params, force.atmosphere);
    }
    if let Some(extra) = &force.extra {
        a += extra(r, v, t);
    }
    a
}

/// Fixed-step RK4 over `dt` seconds split into `substeps` equal steps.
pub fn propagate(
    state: &OrbitalState,
    params: &SpacecraftParams,
    force: &ForceModel,
    dt: f64,
    substeps: usize,
) -> Result<OrbitalState, OrbitError> {
    if !(dt > 0.0) || substeps == 0 {
        return Err(OrbitError::Argument(format!(
            "need dt > 0 and substeps >= 1, got dt = {dt}, substeps = {substeps}"
        )));
    }
    let h = dt / substeps as f64;
    let (mut r, mut v, mut t) = (state.position, state.velocity, state.epoch);
    let deriv =
        |r: &Vector3<f64>, v: &Vector3<f64>, t: f64| (*v, acceleration(r, v, t, params, force));
    for _ in 0..substeps {
        let (k1r, k1v) = deriv(&r, &v, t);
        let (k2r, k2v) = deriv(&(r + k1r * (h / 2.0)), &(v + k1v * (h / 2.0)), t + h / 2.0);
        let (k3r, k3v) = deriv(&(r + k2r * (h / 2.0)), &(v + k2v * (h / 2.0)), t + h / 2.0);
        let (k4r, k4v) = deriv(&(r + k3r * h), &(v + k3v * h), t + h);
        r += (k1r + k2r * 2.0 + k3r * 2.0 + k4r) * (h / 6.0);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        t += h;
        let radius = r.norm();
        if !(radius > R_EARTH) {
            return Err(OrbitError::ReEntry { radius_km: radius });
        }
    }
    Ok(OrbitalState::new(r, v, state.epoch + dt))
}
