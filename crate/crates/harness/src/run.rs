//! Filter-agnostic run engine: both filters consume one measurement stream
//! and every assimilation produces one [`StepRecord`].

use espf_core::filter::{Espf, EspfConfig, EspfError, EspfState, Observation, ProcessNoise};
use espf_core::model::{MeasurementModel, ProcessModel};
use espf_core::sparse_grid::Hyperrectangle;
use espf_core::ukf::{ukf_predict, ukf_update, GaussianBelief};
use espf_core::unscented::UnscentedParams;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// A system as the filters see it.
pub trait System {
    fn dim(&self) -> usize;
    /// Leading state components that make up "position" for RMS metrics.
    fn position_dims(&self) -> usize;
    /// Filter process model from time `from` to `to`.
    fn process(&self, from: f64, to: f64) -> Box<dyn ProcessModel + '_>;
    /// Filter measurement model of `source` at `time`.
    fn measurement(&self, source: usize, time: f64) -> Box<dyn MeasurementModel + '_>;
    fn measurement_noise(&self, source: usize) -> DMatrix<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub epoch: usize,
    pub time: f64,
    pub source: usize,
    pub value: DVector<f64>,
}

/// Truth at each epoch and the synthesized measurements, ordered by epoch
/// then source.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub times: Vec<f64>,
    pub truth: Vec<DVector<f64>>,
    pub measurements: Vec<Measurement>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterChoice {
    Espf,
    Ukf,
    #[default]
    Both,
}

impl FilterChoice {
    pub fn espf(self) -> bool {
        self != FilterChoice::Ukf
    }

    pub fn ukf(self) -> bool {
        self != FilterChoice::Espf
    }
}

#[derive(Debug, Clone)]
pub struct EspfPlan {
    pub config: EspfConfig,
    pub initial_box: Hyperrectangle,
    pub noise: ProcessNoise,
    pub reset_factor: f64,
}

#[derive(Debug, Clone)]
pub struct UkfPlan {
    pub initial: GaussianBelief,
    pub q: DMatrix<f64>,
    pub params: UnscentedParams,
}

#[derive(Debug, Clone, Default)]
pub struct FilterPlan {
    pub espf: Option<EspfPlan>,
    pub ukf: Option<UkfPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EspfRecord {
    pub mode: Vec<f64>,
    /// The measurement falsified every point and the support was reset.
    pub reset: bool,
    pub live_before: usize,
    pub pruned: usize,
    /// Mean surprisal over all points tested against the measurement.
    pub mean_surprisal: f64,
    /// Share of tested points keeping positive posterior plausibility.
    pub necessity_retention: f64,
    /// `log det Π` after regeneration.
    pub log_det_spread: f64,
    pub sigma: f64,
    pub kernel_radius: f64,
    pub compatibility: Vec<f64>,
    pub residual: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UkfRecord {
    pub mean: Vec<f64>,
    pub covariance_trace: f64,
    pub residual: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub time: f64,
    pub source: usize,
    pub measurement: Vec<f64>,
    pub truth: Vec<f64>,
    pub espf: Option<EspfRecord>,
    pub ukf: Option<UkfRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: usize,
    pub time: f64,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub scenario: String,
    pub seed: u64,
    pub dim: usize,
    pub position_dims: usize,
    pub records: Vec<StepRecord>,
    pub events: Vec<TraceEvent>,
}

struct EspfRunner<'a> {
    filter: Espf,
    plan: &'a EspfPlan,
    state: EspfState,
}

impl EspfRunner<'_> {
    fn predict<S: System + ?Sized>(
        &mut self,
        system: &S,
        from: f64,
        to: f64,
    ) -> Result<(), EspfError> {
        let process = system.process(from, to);
        self.state = self
            .filter
            .predict(&self.state, &*process, &self.plan.noise)?;
        Ok(())
    }

    /// Returns the record and, when the support had to be reset, a note.
    fn assimilate<S: System + ?Sized>(
        &mut self,
        system: &S,
        m: &Measurement,
    ) -> Result<(EspfRecord, Option<String>), EspfError> {
        let model = system.measurement(m.source, m.time);
        let r = system.measurement_noise(m.source);
        let observation = Observation {
            value: &m.value,
            model: &*model,
            spread: &r,
        };
        match self.filter.update(&self.state, &observation) {
            Ok((posterior, diag)) => {
                let (mut next, regen) = self.filter.regenerate(&posterior)?;
                next.tau += 1;
                self.state = next;
                let tested: Vec<f64> = diag
                    .surprisal
                    .iter()
                    .copied()
                    .filter(|s| s.is_finite())
                    .collect();
                let mean_surprisal = tested.iter().sum::<f64>() / tested.len().max(1) as f64;
                let residual = residual_at(&*model, &m.value, &self.state.mode)?;
                Ok((
                    EspfRecord {
                        mode: self.state.mode.iter().copied().collect(),
                        reset: false,
                        live_before: diag.live_before,
                        pruned: diag.pruned,
                        mean_surprisal,
                        necessity_retention: diag.necessity_retention,
                        log_det_spread: regen.dispersion,
                        sigma: regen.sigma,
                        kernel_radius: regen.kernel_radius,
                        compatibility: diag
                            .compatibility
                            .iter()
                            .copied()
                            .filter(|c| c.is_finite())
                            .collect(),
                        residual,
                    },
                    None,
                ))
            }
            Err(EspfError::TotalFalsification) => {
                let live_before = self.state.ensemble.live_count();
                let old_box = self.state.bounds.clone();
                self.state = self.filter.recover(&self.state, self.plan.reset_factor)?;
                let residual = residual_at(&*model, &m.value, &self.state.mode)?;
                let note = format!(
                    "all {live_before} support points falsified; box grown {}x (half-width norm {:.6e} -> {:.6e})",
                    self.plan.reset_factor,
                    old_box.half_widths().norm(),
                    self.state.bounds.half_widths().norm()
                );
                Ok((
                    EspfRecord {
                        mode: self.state.mode.iter().copied().collect(),
                        reset: true,
                        live_before,
                        pruned: live_before,
                        mean_surprisal: -self.filter.config().epsilon.ln(),
                        necessity_retention: 0.0,
                        log_det_spread: self.state.spread.log_det(),
                        sigma: self.state.sigma,
                        kernel_radius: self.state.kernel_radius,
                        compatibility: vec![0.0; live_before],
                        residual,
                    },
                    Some(note),
                ))
            }
            Err(e) => Err(e),
        }
    }
}

struct UkfRunner<'a> {
    plan: &'a UkfPlan,
    belief: GaussianBelief,
}

fn residual_at(
    model: &(dyn MeasurementModel + '_),
    observed: &DVector<f64>,
    state: &DVector<f64>,
) -> Result<Vec<f64>, EspfError> {
    let predicted = model
        .measure(state)
        .map_err(|source| EspfError::Measurement { index: 0, source })?;
    Ok(model
        .residual(observed, &predicted)
        .iter()
        .copied()
        .collect())
}

/// Runs the planned filters over `sim`.
pub fn run_filters<S: System + ?Sized>(
    system: &S,
    sim: &Simulation,
    plan: &FilterPlan,
    scenario: &str,
    seed: u64,
) -> Result<RunTrace, HarnessError> {
    let numerical = |who: &str, step: usize, e: &dyn std::fmt::Display| {
        HarnessError::Numerical(format!("{who} failed at step {step}: {e}"))
    };
    let mut espf = match &plan.espf {
        Some(p) => {
            let filter =
                Espf::new(p.config.clone()).map_err(|e| HarnessError::Spec(e.to_string()))?;
            let state = filter
                .initialize(&p.initial_box)
                .map_err(|e| numerical("ESPF", 0, &e))?;
            Some(EspfRunner {
                filter,
                plan: p,
                state,
            })
        }
        None => None,
    };
    let mut ukf = plan.ukf.as_ref().map(|p| UkfRunner {
        plan: p,
        belief: p.initial.clone(),
    });

    let mut records = Vec::with_capacity(sim.measurements.len());
    let mut events = Vec::new();
    let mut last_time = 0.0;
    let mut cursor = 0;
    for (epoch, &time) in sim.times.iter().enumerate() {
        if let Some(runner) = espf.as_mut() {
            runner
                .predict(system, last_time, time)
                .map_err(|e| numerical("ESPF prediction", records.len(), &e))?;
        }
        if let Some(runner) = ukf.as_mut() {
            let process = system.process(last_time, time);
            runner.belief = ukf_predict(
                &runner.belief,
                &*process,
                &runner.plan.q,
                runner.plan.params,
            )
            .map_err(|e| numerical("UKF prediction", records.len(), &e))?;
        }
        last_time = time;

        while cursor < sim.measurements.len() && sim.measurements[cursor].epoch == epoch {
            let m = &sim.measurements[cursor];
            cursor += 1;
            let step = records.len();
            let espf_record = match espf.as_mut() {
                Some(runner) => {
                    let (record, note) = runner
                        .assimilate(system, m)
                        .map_err(|e| numerical("ESPF update", step, &e))?;
                    if let Some(detail) = note {
                        log::warn!(
                            "{scenario}: epistemic reset at step {step} (t = {time} s): {detail}"
                        );
                        events.push(TraceEvent {
                            step,
                            time,
                            kind: "epistemic_reset".into(),
                            detail,
                        });
                    }
                    Some(record)
                }
                None => None,
            };
            let ukf_record = match ukf.as_mut() {
                Some(runner) => {
                    let model = system.measurement(m.source, m.time);
                    let r = system.measurement_noise(m.source);
                    runner.belief =
                        ukf_update(&runner.belief, &m.value, &*model, &r, runner.plan.params)
                            .map_err(|e| numerical("UKF update", step, &e))?;
                    let residual = residual_at(&*model, &m.value, &runner.belief.mean)
                        .map_err(|e| numerical("UKF residual", step, &e))?;
                    Some(UkfRecord {
                        mean: runner.belief.mean.iter().copied().collect(),
                        covariance_trace: runner.belief.covariance.trace(),
                        residual,
                    })
                }
                None => None,
            };
            records.push(StepRecord {
                step,
                epoch,
                time: m.time,
                source: m.source,
                measurement: m.value.iter().copied().collect(),
                truth: sim.truth[epoch].iter().copied().collect(),
                espf: espf_record,
                ukf: ukf_record,
            });
        }
    }
    Ok(RunTrace {
        scenario: scenario.to_string(),
        seed,
        dim: system.dim(),
        position_dims: system.position_dims(),
        records,
        events,
    })
}
