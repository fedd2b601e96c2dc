//! Epistemic support-point filtering.
//!
//! The crate is organised bottom-up:
//!
//! - [`possibility`]: ordinal possibility primitives (min/sup algebra,
//!   conditioning, necessity, surprisal, capacities, Choquet integral).
//! - [`sparse_grid`]: support-point generation, either the `2n + 1` axis
//!   scheme or a Clenshaw-Curtis/Smolyak sparse grid mapped into a box.
//! - [`geometry`]: spread matrices, regularized Cholesky, ellipsoidal
//!   outer bounds and the possibility kernel.
//! - [`model`]: process and measurement model traits.
//! - [`unscented`]: weighted sigma-point moments shared by both filters.
//! - [`filter`]: the support-point filter recursion.
//! - [`ukf`]: the reference unscented Kalman filter and the Gaussian-limit
//!   comparison harness.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod filter;
pub mod geometry;
pub mod model;
pub mod possibility;
pub mod sparse_grid;
pub mod ukf;
pub mod unscented;

pub use filter::{
    CompatibilityKind, Espf, EspfConfig, EspfError, EspfState, FusionRule, Observation,
    ProcessNoise, RegenerationDiagnostics, StepOutcome, SupportEnsemble, UpdateDiagnostics,
};
pub use geometry::{GeometryError, ResidualEllipsoid, SpreadMatrix};
pub use model::{MeasurementModel, ModelError, ProcessModel};
pub use possibility::{Capacity, PossibilityError, PossibilityField};
pub use sparse_grid::{GridError, Hyperrectangle, SmolyakGrid, SupportGeneration};
pub use ukf::{GaussianBelief, GaussianLimitReport, UkfError};
pub use unscented::{UnscentedParams, UnscentedWeights};

/// Dense column vector used for states and measurements.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for spreads and covariances.
pub type Matrix = nalgebra::DMatrix<f64>;
