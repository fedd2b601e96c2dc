//! Filter-facing process and measurement models.

use espf_core::model::{MeasurementModel, ModelError, ProcessModel};
use nalgebra::DVector;

use crate::dynamics::{propagate, ForceModel, OrbitalState, SpacecraftParams};
use crate::station::{observe_from, EarthRotation, Station};

/// Propagates a 6-vector `[r; v]` over a fixed interval.
#[derive(Debug, Clone)]
pub struct OrbitProcess {
    pub params: SpacecraftParams,
    pub force: ForceModel,
    pub dt: f64,
    pub substeps: usize,
    /// Epoch at the start of the interval.
    pub epoch: f64,
}

impl ProcessModel for OrbitProcess {
    fn propagate(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let state =
            OrbitalState::from_vector(x, self.epoch).map_err(|e| ModelError::new(e.to_string()))?;
        propagate(&state, &self.params, &self.force, self.dt, self.substeps)
            .map(|s| s.to_vector())
            .map_err(|e| ModelError::new(e.to_string()))
    }
}

/// The filters' view of a station: unbiased angles, no horizon mask, and a
/// residual that wraps right ascension.
#[derive(Debug, Clone)]
pub struct AnglesMeasurement {
    pub station: Station,
    pub earth: EarthRotation,
    pub time: f64,
}

impl MeasurementModel for AnglesMeasurement {
    fn measure(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let state =
            OrbitalState::from_vector(x, self.time).map_err(|e| ModelError::new(e.to_string()))?;
        let (site, up) = self.station.eci(&self.earth, self.time);
        let (ra, dec, _) = observe_from(&site, &up, &state.position);
        Ok(DVector::from_column_slice(&[ra, dec]))
    }

    fn residual(&self, observed: &DVector<f64>, predicted: &DVector<f64>) -> DVector<f64> {
        let mut d = observed - predicted;
        d[0] = wrap_angle(d[0]);
        d
    }
}

/// Maps an angle difference into `[−π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    (a + PI).rem_euclid(TAU) - PI
}
