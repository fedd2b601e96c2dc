//! Orbit scenarios: truth generation, measurement synthesis and filter
//! set-up from a [`ScenarioSpec`].

use espf_core::filter::ProcessNoise;
use espf_core::model::{MeasurementModel, ProcessModel};
use espf_core::sparse_grid::Hyperrectangle;
use espf_core::ukf::GaussianBelief;
use espf_orbit::{
    apply_event, observe, propagate, AnglesMeasurement, EarthRotation, ForceModel, OrbitError,
    OrbitProcess, OrbitalState, SpacecraftParams, ARCSEC,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::run::{
    run_filters, EspfPlan, FilterChoice, FilterPlan, Measurement, RunTrace, Simulation, System,
    UkfPlan,
};
use crate::spec::ScenarioSpec;
use crate::HarnessError;

pub struct OrbitScenario {
    pub spec: ScenarioSpec,
    pub earth: EarthRotation,
    /// Parameters the filters assume; events only change the truth.
    pub params: SpacecraftParams,
    pub force: ForceModel,
}

impl OrbitScenario {
    pub fn new(spec: ScenarioSpec) -> Result<Self, HarnessError> {
        spec.validate()?;
        let params = SpacecraftParams::new(
            spec.spacecraft.mass_kg,
            spec.spacecraft.area_m2,
            spec.spacecraft.cd,
        )
        .map_err(|e| HarnessError::Spec(e.to_string()))?;
        let force = ForceModel {
            j2: spec.dynamics.j2,
            drag: spec.dynamics.drag,
            ..ForceModel::default()
        };
        Ok(Self {
            earth: EarthRotation::new(spec.gmst0_deg),
            params,
            force,
            spec,
        })
    }

    pub fn initial_truth(&self) -> OrbitalState {
        let t = &self.spec.truth;
        let [x, y, z] = t.position_km;
        let [vx, vy, vz] = t.velocity_km_s;
        OrbitalState::from_slice(&[x, y, z, vx, vy, vz], 0.0)
    }

    pub fn epoch_times(&self) -> Vec<f64> {
        let m = &self.spec.measurements;
        let count = (m.duration_s / m.cadence_s + 1e-9).floor() as usize;
        (1..=count).map(|k| k as f64 * m.cadence_s).collect()
    }

    fn substeps(&self, dt: f64) -> usize {
        ((dt / self.spec.dynamics.step_s) - 1e-9).ceil().max(1.0) as usize
    }

    /// Truth trajectory and noisy, biased, horizon-masked measurements.
    /// Two normal deviates are drawn per (epoch, station) whether or not
    /// the station sees the target, so masking never shifts the stream.
    pub fn simulate(&self) -> Result<Simulation, HarnessError> {
        let times = self.epoch_times();
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        let mut params = self.params;
        let mut state = self.initial_truth();
        let mut truth = Vec::with_capacity(times.len());
        let mut measurements = Vec::new();
        let mut last = 0.0;
        for (epoch, &time) in times.iter().enumerate() {
            let dt = time - last;
            state =
                propagate(&state, &params, &self.force, dt, self.substeps(dt)).map_err(|e| {
                    HarnessError::Numerical(format!("truth propagation to t = {time} s: {e}"))
                })?;
            last = time;
            truth.push(state.to_vector());
            for (source, station) in self.spec.stations.iter().enumerate() {
                let n_ra: f64 = StandardNormal.sample(&mut rng);
                let n_dec: f64 = StandardNormal.sample(&mut rng);
                match observe(&state, station, &self.earth) {
                    Ok((ra, dec)) => {
                        let s = station.noise_sigma_arcsec * ARCSEC;
                        let ra = (ra + s * n_ra).rem_euclid(std::f64::consts::TAU);
                        measurements.push(Measurement {
                            epoch,
                            time,
                            source,
                            value: DVector::from_column_slice(&[ra, dec + s * n_dec]),
                        });
                    }
                    Err(OrbitError::BelowHorizon { .. }) => {}
                    Err(e) => return Err(HarnessError::Numerical(e.to_string())),
                }
            }
            for event in self
                .spec
                .events
                .iter()
                .filter(|e| e.at_measurement == epoch)
            {
                params = apply_event(&params, event);
            }
        }
        Ok(Simulation {
            times,
            truth,
            measurements,
        })
    }

    pub fn plan(&self, choice: FilterChoice) -> Result<FilterPlan, HarnessError> {
        let init = &self.spec.initial;
        let sigma = DVector::from_column_slice(&init.sigma);
        let mut mean = self.initial_truth().to_vector() + DVector::from_column_slice(&init.offset);
        if init.draw {
            // separate stream so the draw never shifts the measurement noise
            let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
            rng.set_stream(1);
            for i in 0..6 {
                let z: f64 = StandardNormal.sample(&mut rng);
                mean[i] += sigma[i] * z;
            }
        }
        let q_sigma = DVector::from_column_slice(&self.spec.process_noise.sigma);
        let q = DMatrix::from_diagonal(&q_sigma.map(|s| s * s));
        let espf = if choice.espf() {
            let initial_box = Hyperrectangle::from_center(&mean, &(&sigma * init.box_sigmas))
                .map_err(|e| HarnessError::Spec(e.to_string()))?;
            let noise = ProcessNoise::gaussian(q.clone(), self.spec.process_noise.box_sigmas)
                .map_err(|e| HarnessError::Spec(e.to_string()))?;
            Some(EspfPlan {
                config: self.spec.espf.to_config(),
                initial_box,
                noise,
                reset_factor: self.spec.espf.reset_factor,
            })
        } else {
            None
        };
        let ukf = if choice.ukf() {
            let initial =
                GaussianBelief::new(mean.clone(), DMatrix::from_diagonal(&sigma.map(|s| s * s)))
                    .map_err(|e| HarnessError::Spec(e.to_string()))?;
            Some(UkfPlan {
                initial,
                q,
                params: self.spec.ukf.params(),
            })
        } else {
            None
        };
        Ok(FilterPlan { espf, ukf })
    }

    pub fn run(&self, choice: FilterChoice) -> Result<RunTrace, HarnessError> {
        let sim = self.simulate()?;
        run_filters(
            self,
            &sim,
            &self.plan(choice)?,
            &self.spec.name,
            self.spec.seed,
        )
    }
}

impl System for OrbitScenario {
    fn dim(&self) -> usize {
        6
    }

    fn position_dims(&self) -> usize {
        3
    }

    fn process(&self, from: f64, to: f64) -> Box<dyn ProcessModel + '_> {
        Box::new(OrbitProcess {
            params: self.params,
            force: self.force.clone(),
            dt: to - from,
            substeps: self.substeps(to - from),
            epoch: from,
        })
    }

    fn measurement(&self, source: usize, time: f64) -> Box<dyn MeasurementModel + '_> {
        Box::new(AnglesMeasurement {
            station: self.spec.stations[source].clone(),
            earth: self.earth,
            time,
        })
    }

    fn measurement_noise(&self, source: usize) -> DMatrix<f64> {
        let s = self.spec.stations[source].noise_sigma_arcsec * ARCSEC;
        DMatrix::from_diagonal_element(2, 2, s * s)
    }
}

/// Loads, resolves and runs a scenario with the given overrides.
pub fn run_spec(spec: &ScenarioSpec, choice: FilterChoice) -> Result<RunTrace, HarnessError> {
    OrbitScenario::new(spec.clone())?.run(choice)
}
