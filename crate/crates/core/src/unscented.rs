//! Scaled unscented transform: weights, sigma points and the weighted
//! moments and Kalman correction built from them.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{regularized_cholesky, symmetric_points, GeometryError};
use crate::model::MeasurementModel;

/// Scaling parameters `(α, β, κ)` of the unscented transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnscentedParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UnscentedParams {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

/// Mean and covariance weights for `2n + 1` sigma points.
#[derive(Debug, Clone, PartialEq)]
pub struct UnscentedWeights {
    pub params: UnscentedParams,
    pub lambda: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

impl UnscentedWeights {
    pub fn new(n: usize, params: UnscentedParams) -> Result<Self, GeometryError> {
        let nf = n as f64;
        let lambda = params.alpha * params.alpha * (nf + params.kappa) - nf;
        if !(nf + lambda > 0.0) {
            return Err(GeometryError::Argument(format!(
                "unscented scaling n + λ = {} must be positive",
                nf + lambda
            )));
        }
        let w0 = lambda / (nf + lambda);
        let wi = 0.5 / (nf + lambda);
        let mut mean = vec![wi; 2 * n + 1];
        let mut cov = mean.clone();
        mean[0] = w0;
        cov[0] = w0 + (1.0 - params.alpha * params.alpha + params.beta);
        Ok(Self {
            params,
            lambda,
            mean,
            cov,
        })
    }

    pub fn dim(&self) -> usize {
        (self.mean.len() - 1) / 2
    }

    /// Sigma-point offset scale `sqrt(n + λ)`.
    pub fn scale(&self) -> f64 {
        (self.dim() as f64 + self.lambda).sqrt()
    }

    /// Sigma points of `N(mean, covariance)`.
    pub fn sigma_points(
        &self,
        mean: &DVector<f64>,
        covariance: &DMatrix<f64>,
    ) -> Result<Vec<DVector<f64>>, GeometryError> {
        let factor = regularized_cholesky(covariance)?;
        Ok(symmetric_points(mean, &factor.lower, self.scale()))
    }

    /// `Σ w_m χ_i`, evaluated as `χ_0 + Σ_{i>0} w_m (χ_i − χ_0)` so the large
    /// negative centre weight of small `α` does not cancel catastrophically.
    pub fn weighted_mean(&self, points: &[DVector<f64>]) -> DVector<f64> {
        let anchor = &points[0];
        let mut shift = DVector::zeros(anchor.len());
        for (p, &w) in points.iter().zip(&self.mean).skip(1) {
            shift.axpy(w, &(p - anchor), 1.0);
        }
        anchor + shift
    }

    /// `Σ w_c (a_i − ā)(b_i − b̄)ᵀ` over precomputed deviations.
    pub fn weighted_outer(&self, left: &[DVector<f64>], right: &[DVector<f64>]) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(left[0].len(), right[0].len());
        for ((l, r), &w) in left.iter().zip(right).zip(&self.cov) {
            acc.ger(w, l, r, 1.0);
        }
        acc
    }

    /// Mean and covariance (without additive noise) of state-space points.
    pub fn state_moments(&self, points: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
        let mean = self.weighted_mean(points);
        let dev: Vec<DVector<f64>> = points.iter().map(|p| p - &mean).collect();
        let cov = self.weighted_outer(&dev, &dev);
        (mean, cov)
    }

    /// Measurement-space mean and deviations, using the model's residual so
    /// periodic components average correctly. The mean is anchored at the
    /// first point.
    pub fn measurement_moments<M: MeasurementModel + ?Sized>(
        &self,
        gammas: &[DVector<f64>],
        model: &M,
    ) -> (DVector<f64>, Vec<DVector<f64>>) {
        let anchor = &gammas[0];
        let mut shift = DVector::zeros(anchor.len());
        for (g, &w) in gammas.iter().zip(&self.mean).skip(1) {
            shift.axpy(w, &model.residual(g, anchor), 1.0);
        }
        let mean = anchor + shift;
        let dev = gammas.iter().map(|g| model.residual(g, &mean)).collect();
        (mean, dev)
    }
}

/// Output of [`kalman_correction`].
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub predicted_measurement: DVector<f64>,
    pub innovation_covariance: DMatrix<f64>,
    pub gain: DMatrix<f64>,
}

/// Unscented Kalman correction from propagated sigma points and their
/// measurement images.
#[allow(clippy::too_many_arguments)]
pub fn kalman_correction<M: MeasurementModel + ?Sized>(
    weights: &UnscentedWeights,
    prior_mean: &DVector<f64>,
    prior_covariance: &DMatrix<f64>,
    points: &[DVector<f64>],
    gammas: &[DVector<f64>],
    observed: &DVector<f64>,
    noise: &DMatrix<f64>,
    model: &M,
) -> Result<Correction, GeometryError> {
    let (y_hat, y_dev) = weights.measurement_moments(gammas, model);
    let x_dev: Vec<DVector<f64>> = points.iter().map(|p| p - prior_mean).collect();
    let s = weights.weighted_outer(&y_dev, &y_dev) + noise;
    let cross = weights.weighted_outer(&x_dev, &y_dev);
    let lower = regularized_cholesky(&s)?.lower;
    // K = Σxy S⁻¹, solved as L Lᵀ Kᵀ = Σxyᵀ
    let z = lower
        .solve_lower_triangular(&cross.transpose())
        .ok_or(GeometryError::Degenerate { retries: 0 })?;
    let gain = lower
        .tr_solve_lower_triangular(&z)
        .ok_or(GeometryError::Degenerate { retries: 0 })?
        .transpose();
    let innovation = model.residual(observed, &y_hat);
    let mean = prior_mean + &gain * innovation;
    let covariance = prior_covariance - &gain * &s * gain.transpose();
    Ok(Correction {
        mean,
        covariance,
        predicted_measurement: y_hat,
        innovation_covariance: s,
        gain,
    })
}
