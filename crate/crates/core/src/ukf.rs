//! Reference unscented Kalman filter and the side-by-side comparison
//! against the support-point filter in its Gaussian-limit preset.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::filter::{Espf, EspfConfig, EspfError, Observation, ProcessNoise};
use crate::geometry::{regularized_cholesky, GeometryError};
use crate::model::{MeasurementModel, ModelError, ProcessModel};
use crate::unscented::{kalman_correction, UnscentedParams, UnscentedWeights};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UkfError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("model evaluation failed: {0}")]
    Model(#[from] ModelError),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error(transparent)]
    Espf(#[from] EspfError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self, UkfError> {
        let n = mean.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(UkfError::Dimension {
                expected: n,
                actual: covariance.nrows(),
            });
        }
        regularized_cholesky(&covariance)?;
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

pub fn ukf_predict<P: ProcessModel + ?Sized>(
    belief: &GaussianBelief,
    process: &P,
    q: &DMatrix<f64>,
    params: UnscentedParams,
) -> Result<GaussianBelief, UkfError> {
    let weights = UnscentedWeights::new(belief.dim(), params)?;
    let points = weights.sigma_points(&belief.mean, &belief.covariance)?;
    let propagated = points
        .iter()
        .map(|p| process.propagate(p))
        .collect::<Result<Vec<_>, _>>()?;
    let (mean, cov) = weights.state_moments(&propagated);
    Ok(GaussianBelief {
        mean,
        covariance: cov + q,
    })
}

pub fn ukf_update<M: MeasurementModel + ?Sized>(
    belief: &GaussianBelief,
    y: &DVector<f64>,
    model: &M,
    r: &DMatrix<f64>,
    params: UnscentedParams,
) -> Result<GaussianBelief, UkfError> {
    let weights = UnscentedWeights::new(belief.dim(), params)?;
    let points = weights.sigma_points(&belief.mean, &belief.covariance)?;
    let gammas = points
        .iter()
        .map(|p| model.measure(p))
        .collect::<Result<Vec<_>, _>>()?;
    if gammas[0].len() != y.len() {
        return Err(UkfError::Dimension {
            expected: y.len(),
            actual: gammas[0].len(),
        });
    }
    let c = kalman_correction(
        &weights,
        &belief.mean,
        &belief.covariance,
        &points,
        &gammas,
        y,
        r,
        model,
    )?;
    Ok(GaussianBelief {
        mean: c.mean,
        covariance: c.covariance,
    })
}

/// One row of a [`GaussianLimitReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct LimitStep {
    pub espf_mode: DVector<f64>,
    pub ukf_mean: DVector<f64>,
    /// `‖mode − mean‖∞`.
    pub mean_discrepancy: f64,
    /// Frobenius norm of `Π − Σ`.
    pub spread_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLimitReport {
    pub steps: Vec<LimitStep>,
}

impl GaussianLimitReport {
    pub fn max_mean_discrepancy(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.mean_discrepancy)
            .fold(0.0, f64::max)
    }

    pub fn max_spread_discrepancy(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.spread_discrepancy)
            .fold(0.0, f64::max)
    }
}

/// Runs both filters on the same measurement sequence; `None` entries are
/// prediction-only steps.
pub fn gaussian_limit_espf<P, M>(
    belief: &GaussianBelief,
    process: &P,
    model: &M,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    measurements: &[Option<DVector<f64>>],
    params: UnscentedParams,
) -> Result<GaussianLimitReport, UkfError>
where
    P: ProcessModel + ?Sized,
    M: MeasurementModel + ?Sized,
{
    let espf = Espf::new(EspfConfig::gaussian_limit(belief.dim(), params)?)?;
    let noise = ProcessNoise::gaussian(q.clone(), 3.0)?;
    let mut state = espf.initialize_kernel(&belief.mean, &belief.covariance)?;
    let mut ukf = belief.clone();
    let mut steps = Vec::with_capacity(measurements.len());
    for y in measurements {
        ukf = ukf_predict(&ukf, process, q, params)?;
        let observation = y.as_ref().map(|value| Observation {
            value,
            model,
            spread: r,
        });
        if let Some(y) = y {
            ukf = ukf_update(&ukf, y, model, r, params)?;
        }
        state = espf
            .step(&state, process, &noise, observation.as_ref())?
            .state;
        if y.is_none() {
            // keep a fresh unscented layout for the next prediction
            state = espf.regenerate(&state)?.0;
        }
        steps.push(LimitStep {
            mean_discrepancy: (&state.mode - &ukf.mean).amax(),
            spread_discrepancy: (state.spread.matrix() - &ukf.covariance).norm(),
            espf_mode: state.mode.clone(),
            ukf_mean: ukf.mean.clone(),
        });
    }
    Ok(GaussianLimitReport { steps })
}
