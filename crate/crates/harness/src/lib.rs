//! Scenario harness: builds truth and measurements, runs the support-point
//! filter and the UKF on one measurement stream, and reports metrics and
//! traces.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod linear;
pub mod metrics;
pub mod orbit;
pub mod output;
pub mod run;
pub mod scenarios;
pub mod spec;

pub use linear::LinearScenario;
pub use metrics::{summarize, FilterSummary, Summary};
pub use orbit::{run_spec, OrbitScenario};
pub use run::{run_filters, FilterChoice, FilterPlan, RunTrace, StepRecord, System};
pub use spec::ScenarioSpec;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario error: {0}")]
    Spec(String),
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown override key `{key}`; valid keys: {}", valid.join(", "))]
    InvalidOverride { key: String, valid: Vec<String> },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl HarnessError {
    /// Process exit code: 2 for scenario problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Numerical(_) => 3,
            _ => 2,
        }
    }
}
