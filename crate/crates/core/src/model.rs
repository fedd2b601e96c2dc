//! Process and measurement model interfaces.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Failure inside a user model, e.g. an integrator leaving its domain.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ModelError(pub String);

impl ModelError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

/// Deterministic state transition `x_k = f(x_{k−1})`.
pub trait ProcessModel {
    fn propagate(&self, state: &DVector<f64>) -> Result<DVector<f64>, ModelError>;
}

/// Measurement function `y = h(x)`.
pub trait MeasurementModel {
    fn measure(&self, state: &DVector<f64>) -> Result<DVector<f64>, ModelError>;

    /// `observed − predicted` in measurement space. Models with periodic
    /// components override this to wrap angles.
    fn residual(&self, observed: &DVector<f64>, predicted: &DVector<f64>) -> DVector<f64> {
        observed - predicted
    }
}

impl<T: ProcessModel + ?Sized> ProcessModel for &T {
    fn propagate(&self, state: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        (**self).propagate(state)
    }
}

impl<T: MeasurementModel + ?Sized> MeasurementModel for &T {
    fn measure(&self, state: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        (**self).measure(state)
    }

    fn residual(&self, observed: &DVector<f64>, predicted: &DVector<f64>) -> DVector<f64> {
        (**self).residual(observed, predicted)
    }
}

impl<T: ProcessModel + ?Sized> ProcessModel for Box<T> {
    fn propagate(&self, state: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        (**self).propagate(state)
    }
}

impl<T: MeasurementModel + ?Sized> MeasurementModel for Box<T> {
    fn measure(&self, state: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        (**self).measure(state)
    }

    fn residual(&self, observed: &DVector<f64>, predicted: &DVector<f64>) -> DVector<f64> {
        (**self).residual(observed, predicted)
    }
}

/// `x ↦ A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProcess {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl LinearProcess {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        let n = matrix.nrows();
        Self {
            matrix,
            offset: DVector::zeros(n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n))
    }
}

impl ProcessModel for LinearProcess {
    fn propagate(&self, state: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        if state.len() != self.matrix.ncols() {
            return Err(ModelError::new(format!(
                "state has {} components, model expects {}",
                state.len(),
                self.matrix.ncols()
            )));
        }
        Ok(&self.matrix * state + &self.offset)
    }
}

/// `x ↦ H x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMeasurement {
    pub matrix: DMatrix<f64>,
}

impl LinearMeasurement {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n))
    }
}

impl MeasurementModel for LinearMeasurement {
    fn measure(&self, state: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        if state.len() != self.matrix.ncols() {
            return Err(ModelError::new(format!(
                "state has {} components, model expects {}",
                state.len(),
                self.matrix.ncols()
            )));
        }
        Ok(&self.matrix * state)
    }
}

/// Adapts a closure into a [`ProcessModel`].
pub struct FnProcess<F>(pub F);

impl<F> ProcessModel for FnProcess<F>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>, ModelError>,
{
    fn propagate(&self, state: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        (self.0)(state)
    }
}

/// Adapts a closure into a [`MeasurementModel`] with plain subtraction
/// residuals.
pub struct FnMeasurement<F>(pub F);

impl<F> MeasurementModel for FnMeasurement<F>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>, ModelError>,
{
    fn measure(&self, state: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        (self.0)(state)
    }
}
