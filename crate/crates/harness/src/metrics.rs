//! Summary metrics over a [`RunTrace`].
//!
//! * final RMS: root mean square position error over the last quarter of
//!   the assimilation steps (at least one step), in the units of the state
//!   (km for orbit scenarios);
//! * average surprisal: mean over steps of the mean surprisal of every
//!   point tested against the measurement;
//! * necessity retention: 100 × mean over steps of the fraction of tested
//!   points that keep a positive posterior plausibility;
//! * prune counts: points pruned at each step.

use serde::{Deserialize, Serialize};

use crate::run::RunTrace;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub final_rms: f64,
    /// `None` for the UKF.
    pub avg_surprisal: Option<f64>,
    pub necessity_retention_pct: Option<f64>,
    pub resets: Option<usize>,
    pub prune_counts: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub steps: usize,
    /// Length of the final RMS window.
    pub window: usize,
    pub espf: Option<FilterSummary>,
    pub ukf: Option<FilterSummary>,
}

/// First record index of the final window.
pub fn window_start(len: usize) -> usize {
    len - len.div_ceil(4).max(1).min(len)
}

fn position_error(estimate: &[f64], truth: &[f64], dims: usize) -> f64 {
    estimate
        .iter()
        .zip(truth)
        .take(dims)
        .map(|(e, t)| (e - t).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Position error norm of the ESPF mode and the UKF mean at each step.
pub fn position_errors(trace: &RunTrace) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    let d = trace.position_dims;
    trace
        .records
        .iter()
        .map(|r| {
            (
                r.espf
                    .as_ref()
                    .map(|e| position_error(&e.mode, &r.truth, d)),
                r.ukf.as_ref().map(|u| position_error(&u.mean, &r.truth, d)),
            )
        })
        .unzip()
}

fn rms(errors: &[Option<f64>]) -> Option<f64> {
    let tail: Vec<f64> = errors[window_start(errors.len())..]
        .iter()
        .map(|e| e.unwrap_or(f64::NAN))
        .collect();
    if tail.iter().any(|e| e.is_nan()) {
        return None;
    }
    Some((tail.iter().map(|e| e * e).sum::<f64>() / tail.len() as f64).sqrt())
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    sum / count as f64
}

pub fn summarize(trace: &RunTrace) -> Result<Summary, HarnessError> {
    if trace.records.is_empty() {
        return Err(HarnessError::Numerical(format!(
            "{}: no measurement was assimilated",
            trace.scenario
        )));
    }
    let (espf_err, ukf_err) = position_errors(trace);
    let espf = match rms(&espf_err) {
        Some(final_rms) => {
            let records: Vec<_> = trace
                .records
                .iter()
                .filter_map(|r| r.espf.as_ref())
                .collect();
            Some(FilterSummary {
                final_rms,
                avg_surprisal: Some(mean(records.iter().map(|e| e.mean_surprisal))),
                necessity_retention_pct: Some(
                    100.0 * mean(records.iter().map(|e| e.necessity_retention)),
                ),
                resets: Some(records.iter().filter(|e| e.reset).count()),
                prune_counts: Some(records.iter().map(|e| e.pruned).collect()),
            })
        }
        None => None,
    };
    let ukf = rms(&ukf_err).map(|final_rms| FilterSummary {
        final_rms,
        avg_surprisal: None,
        necessity_retention_pct: None,
        resets: None,
        prune_counts: None,
    });
    Ok(Summary {
        scenario: trace.scenario.clone(),
        seed: trace.seed,
        steps: trace.records.len(),
        window: trace.records.len() - window_start(trace.records.len()),
        espf,
        ukf,
    })
}

/// Mean prune count over the first and last quarter of the steps.
pub fn prune_quarters(counts: &[usize]) -> (f64, f64) {
    let q = (counts.len() / 4).max(1).min(counts.len());
    let avg = |s: &[usize]| s.iter().sum::<usize>() as f64 / s.len() as f64;
    (avg(&counts[..q]), avg(&counts[counts.len() - q..]))
}
