//! Linear-Gaussian scenarios used as sanity fixtures: a noiseless
//! constant-velocity toy and the 1-D canonical fixture with an injected
//! outlier.

use espf_core::filter::{CompatibilityKind, EspfConfig, ProcessNoise};
use espf_core::model::{LinearMeasurement, LinearProcess, MeasurementModel, ProcessModel};
use espf_core::sparse_grid::{Hyperrectangle, SupportGeneration};
use espf_core::ukf::GaussianBelief;
use espf_core::unscented::UnscentedParams;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::run::{
    run_filters, EspfPlan, FilterChoice, FilterPlan, Measurement, RunTrace, Simulation, System,
    UkfPlan,
};
use crate::HarnessError;

#[derive(Debug, Clone)]
pub struct LinearScenario {
    pub name: String,
    pub transition: DMatrix<f64>,
    pub observation: DMatrix<f64>,
    pub initial_truth: DVector<f64>,
    pub steps: usize,
    /// Seconds per step, for the trace clock.
    pub dt: f64,
    pub position_dims: usize,
    /// Std dev of the synthetic measurement noise (0 for noiseless runs).
    pub measurement_noise: f64,
    /// Std dev the filters assume for each measured component.
    pub filter_measurement_sigma: f64,
    /// Per-step process noise std dev assumed by the filters.
    pub process_sigma: DVector<f64>,
    pub process_box_sigmas: f64,
    pub initial_offset: DVector<f64>,
    pub initial_sigma: DVector<f64>,
    pub box_sigmas: f64,
    /// `(step, value)` pairs replacing the synthesized measurement.
    pub outliers: Vec<(usize, DVector<f64>)>,
    pub seed: u64,
    pub espf: EspfConfig,
    pub reset_factor: f64,
    pub ukf: UnscentedParams,
}

impl LinearScenario {
    /// Planar constant-velocity target `[x, y, vx, vy]` with position
    /// measurements, perfect initialization and no noise.
    pub fn constant_velocity_toy() -> Self {
        let dt = 1.0;
        let mut f = DMatrix::identity(4, 4);
        f[(0, 2)] = dt;
        f[(1, 3)] = dt;
        let mut h = DMatrix::zeros(2, 4);
        h[(0, 0)] = 1.0;
        h[(1, 1)] = 1.0;
        Self {
            name: "linear_toy".into(),
            transition: f,
            observation: h,
            initial_truth: DVector::from_column_slice(&[0.0, 0.0, 1.0, 0.5]),
            steps: 20,
            dt,
            position_dims: 2,
            measurement_noise: 0.0,
            filter_measurement_sigma: 0.1,
            process_sigma: DVector::from_element(4, 0.01),
            process_box_sigmas: 3.0,
            initial_offset: DVector::zeros(4),
            initial_sigma: DVector::from_column_slice(&[0.5, 0.5, 0.1, 0.1]),
            box_sigmas: 3.0,
            outliers: Vec::new(),
            seed: 1,
            espf: EspfConfig {
                generation: SupportGeneration::Axis,
                lambda_d: 0.2,
                ..EspfConfig::default()
            },
            reset_factor: 2.0,
            ukf: UnscentedParams::default(),
        }
    }

    /// Static scalar state observed directly, with one measurement far
    /// outside the support at `outlier_step`.
    pub fn canonical_1d(outlier_step: usize) -> Self {
        Self {
            name: "canonical_1d".into(),
            transition: DMatrix::identity(1, 1),
            observation: DMatrix::identity(1, 1),
            initial_truth: DVector::from_element(1, 0.3),
            steps: 40,
            dt: 1.0,
            position_dims: 1,
            measurement_noise: 0.05,
            filter_measurement_sigma: 0.05,
            process_sigma: DVector::from_element(1, 0.01),
            process_box_sigmas: 3.0,
            initial_offset: DVector::zeros(1),
            initial_sigma: DVector::from_element(1, 0.5),
            box_sigmas: 2.0,
            outliers: vec![(outlier_step, DVector::from_element(1, 25.0))],
            seed: 7,
            espf: EspfConfig {
                generation: SupportGeneration::Axis,
                compatibility: CompatibilityKind::Binary,
                lambda_d: 0.3,
                ..EspfConfig::default()
            },
            reset_factor: 2.0,
            ukf: UnscentedParams::default(),
        }
    }

    pub fn simulate(&self) -> Result<Simulation, HarnessError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut x = self.initial_truth.clone();
        let mut times = Vec::with_capacity(self.steps);
        let mut truth = Vec::with_capacity(self.steps);
        let mut measurements = Vec::with_capacity(self.steps);
        for epoch in 0..self.steps {
            x = &self.transition * x;
            let time = (epoch + 1) as f64 * self.dt;
            let noise = DVector::from_fn(self.observation.nrows(), |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * self.measurement_noise
            });
            let value = match self.outliers.iter().find(|(k, _)| *k == epoch) {
                Some((_, v)) => v.clone(),
                None => &self.observation * &x + noise,
            };
            if value.len() != self.observation.nrows() {
                return Err(HarnessError::Spec(format!(
                    "outlier at step {epoch} has the wrong length"
                )));
            }
            times.push(time);
            truth.push(x.clone());
            measurements.push(Measurement {
                epoch,
                time,
                source: 0,
                value,
            });
        }
        Ok(Simulation {
            times,
            truth,
            measurements,
        })
    }

    pub fn plan(&self, choice: FilterChoice) -> Result<FilterPlan, HarnessError> {
        let spec = |e: &dyn std::fmt::Display| HarnessError::Spec(e.to_string());
        let mean = &self.initial_truth + &self.initial_offset;
        let q = DMatrix::from_diagonal(&self.process_sigma.map(|s| s * s));
        let espf = if choice.espf() {
            Some(EspfPlan {
                config: self.espf.clone(),
                initial_box: Hyperrectangle::from_center(
                    &mean,
                    &(&self.initial_sigma * self.box_sigmas),
                )
                .map_err(|e| spec(&e))?,
                noise: ProcessNoise::gaussian(q.clone(), self.process_box_sigmas)
                    .map_err(|e| spec(&e))?,
                reset_factor: self.reset_factor,
            })
        } else {
            None
        };
        let ukf = if choice.ukf() {
            Some(UkfPlan {
                initial: GaussianBelief::new(
                    mean,
                    DMatrix::from_diagonal(&self.initial_sigma.map(|s| s * s)),
                )
                .map_err(|e| spec(&e))?,
                q,
                params: self.ukf,
            })
        } else {
            None
        };
        Ok(FilterPlan { espf, ukf })
    }

    pub fn run(&self, choice: FilterChoice) -> Result<RunTrace, HarnessError> {
        let sim = self.simulate()?;
        run_filters(self, &sim, &self.plan(choice)?, &self.name, self.seed)
    }
}

impl System for LinearScenario {
    fn dim(&self) -> usize {
        self.transition.nrows()
    }

    fn position_dims(&self) -> usize {
        self.position_dims
    }

    fn process(&self, _from: f64, _to: f64) -> Box<dyn ProcessModel + '_> {
        Box::new(LinearProcess::new(self.transition.clone()))
    }

    fn measurement(&self, _source: usize, _time: f64) -> Box<dyn MeasurementModel + '_> {
        Box::new(LinearMeasurement::new(self.observation.clone()))
    }

    fn measurement_noise(&self, _source: usize) -> DMatrix<f64> {
        let m = self.observation.nrows();
        DMatrix::from_diagonal_element(m, m, self.filter_measurement_sigma.powi(2))
    }
}
