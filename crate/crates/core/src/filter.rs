//! The epistemic support-point filter.
//!
//! One cycle is predict → update → regenerate:
//!
//! 1. every live support point is pushed through the process model and the
//!    support box is grown by the process-noise box;
//! 2. each point's predicted measurement is tested against an admissible
//!    residual ellipsoid, incompatible points are pruned by surprisal and the
//!    survivors' plausibility is fused with their compatibility by `min`;
//! 3. the mode is a plausibility-and-necessity weighted combination of the
//!    survivors, a spread matrix is estimated around it, and a fresh
//!    `2n + 1` point set is laid out along the spread's Cholesky columns.
//!
//! Setting [`FusionRule::Product`] switches fusion to the probabilistic
//! reading (Gaussian kernels multiplied in closed form through
//! unscented moments). With the [`EspfConfig::gaussian_limit`] preset the
//! recursion then tracks an unscented Kalman filter.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::{
    estimate_spread_with, kernel_plausibility, minkowski_outer_bound, plausibility_radius,
    symmetric_points, GeometryError, ResidualEllipsoid, SpreadMatrix,
};
use crate::model::{MeasurementModel, ModelError, ProcessModel};
use crate::possibility::{possibility_from_surprisal, surprisal, DEFAULT_SURPRISAL_EPSILON};
use crate::sparse_grid::{generate_support, GridError, Hyperrectangle, SupportGeneration};
use crate::unscented::{kalman_correction, UnscentedParams, UnscentedWeights};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EspfError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("process model failed at support point {index:?}: {source}")]
    Propagation {
        index: Option<usize>,
        source: ModelError,
    },
    #[error("measurement model failed at support point {index}: {source}")]
    Measurement { index: usize, source: ModelError },
    #[error("the measurement is incompatible with every support point")]
    TotalFalsification,
    #[error("no live support points")]
    NoLivePoints,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
}

/// How prior plausibility and measurement compatibility are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionRule {
    /// Pointwise minimum.
    #[default]
    Minimum,
    /// Probabilistic product of Gaussian-shaped kernels, evaluated through
    /// unscented moments.
    Product,
}

/// Shape of the compatibility function on residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CompatibilityKind {
    /// 1 inside the admissible residual ellipsoid, 0 outside.
    #[default]
    Binary,
    /// Possibility kernel on the residual.
    Graded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EspfConfig {
    /// Necessity level `η ∈ (0, 1)` fixing the residual radius.
    pub eta: f64,
    /// Points whose surprisal exceeds this are pruned.
    pub s_threshold: f64,
    /// Floor inside the surprisal logarithm.
    pub epsilon: f64,
    pub sigma0: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Dispersion gain on the spread scale.
    pub lambda_d: f64,
    /// Surprisal gain on the spread scale.
    pub lambda_s: f64,
    /// Temporal decay rate of the spread scale.
    pub lambda_t: f64,
    /// Radius gain when dispersion grows.
    pub lambda_plus: f64,
    /// Radius gain when dispersion shrinks.
    pub lambda_minus: f64,
    pub s_ref: f64,
    pub s0: f64,
    /// Surprisal-to-possibility sensitivity for graded compatibility.
    pub alpha: f64,
    pub generation: SupportGeneration,
    /// Pruning never leaves fewer live points; `None` means `n + 1`.
    pub min_survivors: Option<usize>,
    pub compatibility: CompatibilityKind,
    pub fusion: FusionRule,
    /// Unscented scaling used by [`FusionRule::Product`].
    pub unscented: UnscentedParams,
    /// Lower bound on per-point necessity in the mode weights.
    pub necessity_floor: f64,
    /// Diagonal loading added to estimated spreads.
    pub regularization: f64,
    /// Smallest multiplier the radius adaptation may apply.
    pub radius_floor: f64,
}

impl Default for EspfConfig {
    fn default() -> Self {
        Self {
            eta: 0.9,
            s_threshold: 5.0,
            epsilon: DEFAULT_SURPRISAL_EPSILON,
            sigma0: 1.0,
            sigma_min: 0.1,
            sigma_max: 3.0,
            lambda_d: 0.0,
            lambda_s: 0.0,
            lambda_t: 0.0,
            lambda_plus: 0.0,
            lambda_minus: 0.0,
            s_ref: 0.0,
            s0: 1.0,
            alpha: 1.0,
            generation: SupportGeneration::default(),
            min_survivors: None,
            compatibility: CompatibilityKind::Binary,
            fusion: FusionRule::Minimum,
            unscented: UnscentedParams::default(),
            necessity_floor: 1e-3,
            regularization: crate::geometry::DEFAULT_REGULARIZATION,
            radius_floor: 0.1,
        }
    }
}

impl EspfConfig {
    /// Preset under which the recursion reduces to an unscented Kalman
    /// filter: unscented placement and scale, product fusion, graded
    /// compatibility, no pruning and no spread adaptation.
    pub fn gaussian_limit(dim: usize, unscented: UnscentedParams) -> Result<Self, EspfError> {
        let scale = UnscentedWeights::new(dim, unscented)?.scale();
        Ok(Self {
            sigma0: scale,
            sigma_min: scale,
            sigma_max: scale,
            s_threshold: f64::INFINITY,
            generation: SupportGeneration::Axis,
            compatibility: CompatibilityKind::Graded,
            fusion: FusionRule::Product,
            unscented,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<(), EspfError> {
        let fail = |msg: String| Err(EspfError::Config(msg));
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return fail(format!("eta = {} must lie in (0, 1)", self.eta));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min <= self.sigma0 && self.sigma0 <= self.sigma_max)
        {
            return fail(format!(
                "need 0 < sigma_min <= sigma0 <= sigma_max, got {} / {} / {}",
                self.sigma_min, self.sigma0, self.sigma_max
            ));
        }
        for (name, v) in [
            ("lambda_d", self.lambda_d),
            ("lambda_s", self.lambda_s),
            ("lambda_t", self.lambda_t),
            ("lambda_plus", self.lambda_plus),
            ("lambda_minus", self.lambda_minus),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} = {v} must be a finite non-negative number"));
            }
        }
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon = {} must be positive", self.epsilon));
        }
        if !(self.alpha > 0.0) {
            return fail(format!("alpha = {} must be positive", self.alpha));
        }
        if self.s_threshold.is_nan() {
            return fail("s_threshold is NaN".into());
        }
        if self.min_survivors == Some(0) {
            return fail("min_survivors must be at least 1".into());
        }
        if !(self.necessity_floor > 0.0 && self.necessity_floor <= 1.0) {
            return fail(format!(
                "necessity_floor = {} must lie in (0, 1]",
                self.necessity_floor
            ));
        }
        if !(self.regularization >= 0.0) {
            return fail("regularization must be non-negative".into());
        }
        if !(self.radius_floor > 0.0) {
            return fail("radius_floor must be positive".into());
        }
        if let SupportGeneration::Smolyak { level: 0 } = self.generation {
            return fail("smolyak level must be at least 1".into());
        }
        Ok(())
    }

    fn min_survivors_for(&self, dim: usize) -> usize {
        self.min_survivors.unwrap_or(dim + 1)
    }
}

/// The support-point cloud with its per-point bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportEnsemble {
    pub points: Vec<DVector<f64>>,
    pub plausibility: Vec<f64>,
    pub compatibility: Vec<f64>,
    pub surprisal: Vec<f64>,
    pub necessity: Vec<f64>,
    pub alive: Vec<bool>,
}

impl SupportEnsemble {
    /// Fresh ensemble: everything alive and fully compatible.
    fn fresh(points: Vec<DVector<f64>>, plausibility: Vec<f64>, epsilon: f64, floor: f64) -> Self {
        let m = points.len();
        let alive = vec![true; m];
        let necessity = singleton_necessities(&plausibility, &alive, floor);
        Self {
            points,
            plausibility,
            compatibility: vec![1.0; m],
            surprisal: vec![surprisal(1.0, epsilon); m],
            necessity,
            alive,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn live_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn live_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.alive[i]).collect()
    }

    pub fn live_points(&self) -> Vec<DVector<f64>> {
        self.live_indices()
            .into_iter()
            .map(|i| self.points[i].clone())
            .collect()
    }
}

/// `N_i = max(1 − max_{j ≠ i, alive} π_j, floor)` for live points, 0 for
/// dead ones.
fn singleton_necessities(plausibility: &[f64], alive: &[bool], floor: f64) -> Vec<f64> {
    let (mut top, mut second, mut top_index) = (0.0f64, 0.0f64, usize::MAX);
    for (i, (&p, &a)) in plausibility.iter().zip(alive).enumerate() {
        if !a {
            continue;
        }
        if p > top {
            second = top;
            top = p;
            top_index = i;
        } else if p > second {
            second = p;
        }
    }
    plausibility
        .iter()
        .zip(alive)
        .enumerate()
        .map(|(i, (_, &a))| {
            if !a {
                return 0.0;
            }
            let others = if i == top_index { second } else { top };
            (1.0 - others).max(floor)
        })
        .collect()
}

/// Filter state carried between cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct EspfState {
    pub mode: DVector<f64>,
    pub spread: SpreadMatrix,
    pub sigma: f64,
    /// Dispersion `log det Π` at the previous regeneration.
    pub prev_dispersion: Option<f64>,
    /// Number of assimilated measurements.
    pub tau: usize,
    pub ensemble: SupportEnsemble,
    pub bounds: Hyperrectangle,
    /// Kernel radius used at the last regeneration.
    pub kernel_radius: f64,
}

impl EspfState {
    pub fn dim(&self) -> usize {
        self.mode.len()
    }
}

/// Bounded process noise: a box for support growth and a spread used when
/// fusing by product.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessNoise {
    pub bounds: Hyperrectangle,
    pub spread: DMatrix<f64>,
}

impl ProcessNoise {
    pub fn new(bounds: Hyperrectangle, spread: DMatrix<f64>) -> Result<Self, EspfError> {
        if spread.nrows() != bounds.dim() || spread.ncols() != bounds.dim() {
            return Err(EspfError::Dimension {
                expected: bounds.dim(),
                actual: spread.nrows(),
            });
        }
        Ok(Self { bounds, spread })
    }

    pub fn none(dim: usize) -> Self {
        Self {
            bounds: Hyperrectangle::symmetric(&DVector::zeros(dim)).expect("zero box"),
            spread: DMatrix::zeros(dim, dim),
        }
    }

    /// Box `[−h, h]`; the product-fusion spread is `diag(h²)`.
    pub fn bounded(half_widths: &DVector<f64>) -> Result<Self, EspfError> {
        let bounds = Hyperrectangle::symmetric(half_widths)?;
        let spread = DMatrix::from_diagonal(&half_widths.map(|h| h * h));
        Ok(Self { bounds, spread })
    }

    /// Covariance `q`; the box spans `k` standard deviations per axis.
    pub fn gaussian(q: DMatrix<f64>, k: f64) -> Result<Self, EspfError> {
        let half = q.diagonal().map(|v| k * v.max(0.0).sqrt());
        let bounds = Hyperrectangle::symmetric(&half)?;
        Self::new(bounds, q)
    }
}

/// Per-update bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateDiagnostics {
    /// Live points entering the update.
    pub live_before: usize,
    pub pruned: usize,
    pub survivors: usize,
    /// Mean surprisal of the surviving points.
    pub mean_surprisal: f64,
    /// Share of entering live points whose posterior plausibility is
    /// positive.
    pub necessity_retention: f64,
    /// Per ensemble index; NaN for points that were already dead.
    pub compatibility: Vec<f64>,
    pub surprisal: Vec<f64>,
    /// Mode weights per ensemble index.
    pub weights: Vec<f64>,
    /// Radius of the admissible residual ellipsoid.
    pub residual_radius: f64,
}

/// Regeneration bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct RegenerationDiagnostics {
    pub dispersion: f64,
    pub delta_dispersion: f64,
    pub kernel_radius: f64,
    pub sigma_raw: f64,
    pub sigma: f64,
}

/// Result of [`Espf::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: EspfState,
    pub update: Option<UpdateDiagnostics>,
    pub regeneration: Option<RegenerationDiagnostics>,
}

/// A measurement together with its model and sensor spread.
pub struct Observation<'a, M: MeasurementModel + ?Sized> {
    pub value: &'a DVector<f64>,
    pub model: &'a M,
    /// Sensor spread `Π_v` (covariance under product fusion).
    pub spread: &'a DMatrix<f64>,
}

/// The filter: a validated configuration plus the cycle operations.
#[derive(Debug, Clone, PartialEq)]
pub struct Espf {
    config: EspfConfig,
}

impl Espf {
    pub fn new(config: EspfConfig) -> Result<Self, EspfError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &EspfConfig {
        &self.config
    }

    fn unscented_weights(&self, dim: usize) -> Result<UnscentedWeights, EspfError> {
        Ok(UnscentedWeights::new(dim, self.config.unscented)?)
    }

    /// Uniform possibility over `bounds`, spanned by the configured scheme.
    pub fn initialize(&self, bounds: &Hyperrectangle) -> Result<EspfState, EspfError> {
        if bounds.dim() == 0 {
            return Err(EspfError::Config("zero-dimensional support".into()));
        }
        if bounds.is_point() {
            return Err(EspfError::Config(
                "support box is degenerate on every axis".into(),
            ));
        }
        let points = generate_support(bounds, self.config.generation)?;
        let mode = bounds.center();
        let spread = estimate_spread_with(&points, &mode, self.config.regularization)?;
        let m = points.len();
        Ok(EspfState {
            mode,
            spread,
            sigma: self.config.sigma0,
            prev_dispersion: None,
            tau: 0,
            ensemble: SupportEnsemble::fresh(
                points,
                vec![1.0; m],
                self.config.epsilon,
                self.config.necessity_floor,
            ),
            bounds: bounds.clone(),
            kernel_radius: plausibility_radius(self.config.eta)?,
        })
    }

    /// Kernel-shaped start: points laid out around `mode` along the factor
    /// of `spread` at scale `sigma0`.
    pub fn initialize_kernel(
        &self,
        mode: &DVector<f64>,
        spread: &DMatrix<f64>,
    ) -> Result<EspfState, EspfError> {
        if spread.nrows() != mode.len() {
            return Err(EspfError::Dimension {
                expected: mode.len(),
                actual: spread.nrows(),
            });
        }
        let spread = SpreadMatrix::new(spread.clone())?;
        let radius = plausibility_radius(self.config.eta)?;
        let points = symmetric_points(mode, spread.cholesky(), self.config.sigma0);
        let plausibility = points
            .iter()
            .map(|p| kernel_plausibility(p, mode, &spread, radius))
            .collect();
        let bounds = Hyperrectangle::bounding(&points)?;
        Ok(EspfState {
            mode: mode.clone(),
            spread,
            sigma: self.config.sigma0,
            prev_dispersion: None,
            tau: 0,
            ensemble: SupportEnsemble::fresh(
                points,
                plausibility,
                self.config.epsilon,
                self.config.necessity_floor,
            ),
            bounds,
            kernel_radius: radius,
        })
    }

    /// Pushes every live point through `process` and grows the support box
    /// by the noise box. Plausibilities are carried over unchanged.
    pub fn predict<P: ProcessModel + ?Sized>(
        &self,
        state: &EspfState,
        process: &P,
        noise: &ProcessNoise,
    ) -> Result<EspfState, EspfError> {
        let n = state.dim();
        if noise.bounds.dim() != n {
            return Err(EspfError::Dimension {
                expected: n,
                actual: noise.bounds.dim(),
            });
        }
        let live = state.ensemble.live_indices();
        if live.is_empty() {
            return Err(EspfError::NoLivePoints);
        }
        let mut points = Vec::with_capacity(live.len());
        for &i in &live {
            let p = process
                .propagate(&state.ensemble.points[i])
                .map_err(|source| EspfError::Propagation {
                    index: Some(i),
                    source,
                })?;
            if p.len() != n {
                return Err(EspfError::Dimension {
                    expected: n,
                    actual: p.len(),
                });
            }
            points.push(p);
        }
        let bounds = Hyperrectangle::bounding(&points)?.minkowski_sum(&noise.bounds)?;
        let (mode, spread) = match self.config.fusion {
            FusionRule::Minimum => {
                let mode =
                    process
                        .propagate(&state.mode)
                        .map_err(|source| EspfError::Propagation {
                            index: None,
                            source,
                        })?;
                let mode = bounds.clamp(&mode);
                let spread = estimate_spread_with(&points, &mode, self.config.regularization)?;
                (mode, spread)
            }
            FusionRule::Product => {
                let weights = self.unscented_weights(n)?;
                if points.len() != weights.mean.len() {
                    return Err(EspfError::Config(format!(
                        "product fusion needs {} unscented points, ensemble has {}",
                        weights.mean.len(),
                        points.len()
                    )));
                }
                let (mean, cov) = weights.state_moments(&points);
                (mean, SpreadMatrix::new(cov + &noise.spread)?)
            }
        };
        let pick = |v: &Vec<f64>| live.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let ensemble = SupportEnsemble {
            plausibility: pick(&state.ensemble.plausibility),
            compatibility: pick(&state.ensemble.compatibility),
            surprisal: pick(&state.ensemble.surprisal),
            necessity: pick(&state.ensemble.necessity),
            alive: vec![true; points.len()],
            points,
        };
        Ok(EspfState {
            mode,
            spread,
            ensemble,
            bounds,
            ..state.clone()
        })
    }

    /// Compatibility test, surprisal pruning, fusion and mode extraction.
    ///
    /// The returned state carries the posterior ensemble and mode; call
    /// [`Espf::regenerate`] to lay out the next support.
    pub fn update<M: MeasurementModel + ?Sized>(
        &self,
        state: &EspfState,
        observation: &Observation<'_, M>,
    ) -> Result<(EspfState, UpdateDiagnostics), EspfError> {
        let model = observation.model;
        let y = observation.value;
        if observation.spread.nrows() != y.len() || observation.spread.ncols() != y.len() {
            return Err(EspfError::Dimension {
                expected: y.len(),
                actual: observation.spread.nrows(),
            });
        }
        let mut state = state.clone();
        let mut live = state.ensemble.live_indices();
        if live.is_empty() {
            return Err(EspfError::NoLivePoints);
        }
        let n = state.dim();
        let product = self.config.fusion == FusionRule::Product;
        let weights_ut = if product {
            let w = self.unscented_weights(n)?;
            // unscented points of the predicted kernel
            let points = symmetric_points(&state.mode, state.spread.cholesky(), state.sigma);
            let plausibility = points
                .iter()
                .map(|p| kernel_plausibility(p, &state.mode, &state.spread, state.kernel_radius))
                .collect();
            state.ensemble = SupportEnsemble::fresh(
                points,
                plausibility,
                self.config.epsilon,
                self.config.necessity_floor,
            );
            live = (0..2 * n + 1).collect();
            Some(w)
        } else {
            None
        };

        let mut gammas = Vec::with_capacity(live.len());
        for &i in &live {
            let g = model
                .measure(&state.ensemble.points[i])
                .map_err(|source| EspfError::Measurement { index: i, source })?;
            if g.len() != y.len() {
                return Err(EspfError::Dimension {
                    expected: y.len(),
                    actual: g.len(),
                });
            }
            gammas.push(g);
        }

        let radius = plausibility_radius(self.config.eta)?;
        // residual geometry: admissible ellipsoid (minimum fusion) or the
        // innovation covariance (product fusion)
        let (ellipsoid, correction) = match &weights_ut {
            None => {
                let anchor = &gammas[0];
                let mut shift = DVector::zeros(y.len());
                for g in &gammas {
                    shift += model.residual(g, anchor);
                }
                let image_mode = anchor + shift / gammas.len() as f64;
                let deviations: Vec<DVector<f64>> = gammas
                    .iter()
                    .map(|g| model.residual(g, &image_mode))
                    .collect();
                let image_spread = estimate_spread_with(
                    &deviations,
                    &DVector::zeros(y.len()),
                    self.config.regularization,
                )?;
                let joint = minkowski_outer_bound(image_spread.matrix(), observation.spread)?;
                (ResidualEllipsoid::new(joint, radius)?, None)
            }
            Some(w) => {
                let c = kalman_correction(
                    w,
                    &state.mode,
                    state.spread.matrix(),
                    &state.ensemble.points,
                    &gammas,
                    y,
                    observation.spread,
                    model,
                )?;
                let s = SpreadMatrix::new(c.innovation_covariance.clone())?;
                (ResidualEllipsoid::new(s, 1.0)?, Some(c))
            }
        };

        let m = state.ensemble.len();
        let mut compatibility = vec![f64::NAN; m];
        let mut surprisals = vec![f64::NAN; m];
        let mut distance = vec![f64::INFINITY; m];
        for (k, &i) in live.iter().enumerate() {
            let residual = model.residual(y, &gammas[k]);
            let d2 = ellipsoid.mahalanobis_sq(&residual)?;
            let r = ellipsoid.radius();
            let comp = match self.config.compatibility {
                CompatibilityKind::Binary => {
                    if d2 <= r * r {
                        1.0
                    } else {
                        0.0
                    }
                }
                CompatibilityKind::Graded => {
                    possibility_from_surprisal(d2 / (2.0 * r * r), self.config.alpha)
                }
            };
            compatibility[i] = comp;
            surprisals[i] = surprisal(comp, self.config.epsilon);
            distance[i] = d2;
        }

        // pruning with a survivor floor; ties broken by residual distance
        let floor = self.config.min_survivors_for(n).min(live.len());
        let mut keep: Vec<usize> = live
            .iter()
            .copied()
            .filter(|&i| surprisals[i] <= self.config.s_threshold)
            .collect();
        if keep.len() < floor {
            let mut ranked = live.clone();
            ranked.sort_by(|&a, &b| {
                surprisals[a]
                    .total_cmp(&surprisals[b])
                    .then(distance[a].total_cmp(&distance[b]))
                    .then(a.cmp(&b))
            });
            ranked.truncate(floor);
            ranked.sort_unstable();
            keep = ranked;
        }
        let mut alive = vec![false; m];
        for &i in &keep {
            alive[i] = true;
        }

        let mut plausibility = state.ensemble.plausibility.clone();
        for i in 0..m {
            plausibility[i] = if !alive[i] {
                0.0
            } else if product {
                plausibility[i] * compatibility[i]
            } else {
                plausibility[i].min(compatibility[i])
            };
        }
        let retained = live.iter().filter(|&&i| plausibility[i] > 0.0).count();
        if retained == 0 {
            return Err(EspfError::TotalFalsification);
        }
        if product {
            let sup = plausibility.iter().copied().fold(0.0, f64::max);
            plausibility.iter_mut().for_each(|p| *p /= sup);
        }
        let necessity = singleton_necessities(&plausibility, &alive, self.config.necessity_floor);

        let raw: Vec<f64> = (0..m).map(|i| plausibility[i] * necessity[i]).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mode = match correction {
            Some(c) => {
                state.spread = SpreadMatrix::new(c.covariance)?;
                c.mean
            }
            None => {
                let mut mode = DVector::zeros(n);
                for (p, &w) in state.ensemble.points.iter().zip(&weights) {
                    if w > 0.0 {
                        mode.axpy(w, p, 1.0);
                    }
                }
                mode
            }
        };

        let mean_surprisal = keep.iter().map(|&i| surprisals[i]).sum::<f64>() / keep.len() as f64;
        let diagnostics = UpdateDiagnostics {
            live_before: live.len(),
            pruned: live.len() - keep.len(),
            survivors: keep.len(),
            mean_surprisal,
            necessity_retention: retained as f64 / live.len() as f64,
            compatibility: compatibility.clone(),
            surprisal: surprisals.clone(),
            weights,
            residual_radius: ellipsoid.radius(),
        };
        state.ensemble.plausibility = plausibility;
        state.ensemble.compatibility = compatibility;
        state.ensemble.surprisal = surprisals;
        state.ensemble.necessity = necessity;
        state.ensemble.alive = alive;
        state.mode = mode;
        Ok((state, diagnostics))
    }

    /// Estimates the spread of the survivors about the mode, adapts the
    /// kernel radius and point scale, and lays out `2n + 1` fresh points.
    pub fn regenerate(
        &self,
        state: &EspfState,
    ) -> Result<(EspfState, RegenerationDiagnostics), EspfError> {
        let cfg = &self.config;
        let live = state.ensemble.live_indices();
        if live.is_empty() {
            return Err(EspfError::NoLivePoints);
        }
        let spread = match cfg.fusion {
            FusionRule::Minimum => estimate_spread_with(
                &state.ensemble.live_points(),
                &state.mode,
                cfg.regularization,
            )?,
            FusionRule::Product => state.spread.clone(),
        };
        let dispersion = spread.log_det();
        let delta = state.prev_dispersion.map_or(0.0, |prev| dispersion - prev);
        let scaling = if delta > 0.0 {
            1.0 + cfg.lambda_plus * delta
        } else if delta < 0.0 {
            1.0 - cfg.lambda_minus * delta.abs()
        } else {
            1.0
        };
        let kernel_radius = plausibility_radius(cfg.eta)? * scaling.max(cfg.radius_floor);

        let mean_surprisal = live
            .iter()
            .map(|&i| state.ensemble.surprisal[i])
            .sum::<f64>()
            / live.len() as f64;
        let scaled_surprisal = cfg.s0 * (1.0 + cfg.lambda_s * (mean_surprisal - cfg.s_ref));
        let sigma_raw = cfg.sigma0
            * (-cfg.lambda_d * dispersion + cfg.lambda_s * (scaled_surprisal - cfg.s_ref)).exp();
        let decay = (-cfg.lambda_t * state.tau as f64).exp();
        let sigma = sigma_raw.clamp(cfg.sigma_min, cfg.sigma_max) * decay;

        let points = symmetric_points(&state.mode, spread.cholesky(), sigma);
        let plausibility: Vec<f64> = points
            .iter()
            .map(|p| kernel_plausibility(p, &state.mode, &spread, kernel_radius))
            .collect();
        let sup = plausibility.iter().copied().fold(0.0, f64::max);
        let plausibility = plausibility.into_iter().map(|p| p / sup).collect();
        let bounds = Hyperrectangle::bounding(&points)?;
        let next = EspfState {
            mode: state.mode.clone(),
            spread,
            sigma,
            prev_dispersion: Some(dispersion),
            tau: state.tau,
            ensemble: SupportEnsemble::fresh(
                points,
                plausibility,
                cfg.epsilon,
                cfg.necessity_floor,
            ),
            bounds,
            kernel_radius,
        };
        Ok((
            next,
            RegenerationDiagnostics {
                dispersion,
                delta_dispersion: delta,
                kernel_radius,
                sigma_raw,
                sigma,
            },
        ))
    }

    /// One full cycle: predict, then update and regenerate when a
    /// measurement is present.
    pub fn step<P, M>(
        &self,
        state: &EspfState,
        process: &P,
        noise: &ProcessNoise,
        observation: Option<&Observation<'_, M>>,
    ) -> Result<StepOutcome, EspfError>
    where
        P: ProcessModel + ?Sized,
        M: MeasurementModel + ?Sized,
    {
        let predicted = self.predict(state, process, noise)?;
        let Some(observation) = observation else {
            return Ok(StepOutcome {
                state: predicted,
                update: None,
                regeneration: None,
            });
        };
        let (posterior, update) = self.update(&predicted, observation)?;
        let (mut next, regeneration) = self.regenerate(&posterior)?;
        next.tau += 1;
        Ok(StepOutcome {
            state: next,
            update: Some(update),
            regeneration: Some(regeneration),
        })
    }

    /// Restart over the support box grown by `factor` per axis, used when a
    /// measurement falsifies every support point.
    pub fn recover(&self, state: &EspfState, factor: f64) -> Result<EspfState, EspfError> {
        let grown = state.bounds.scaled(factor)?;
        self.initialize(&grown)
    }
}
