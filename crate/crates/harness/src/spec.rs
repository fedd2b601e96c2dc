//! Scenario files: schema, defaults, validation, unknown-key detection and
//! dotted-path overrides.
//!
//! A scenario is TOML. Units are part of every field name (`_km`, `_s`,
//! `_deg`, `_arcsec`, ...). See `scenarios/` at the workspace root for the
//! shipped files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use espf_core::filter::{CompatibilityKind, EspfConfig, FusionRule};
use espf_core::sparse_grid::SupportGeneration;
use espf_core::unscented::UnscentedParams;
use espf_orbit::{Event, Station};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Civil epoch, carried as metadata only.
    #[serde(default)]
    pub epoch_utc: String,
    /// Greenwich sidereal angle at scenario start.
    pub gmst0_deg: f64,
    /// Seed of the measurement-noise stream.
    pub seed: u64,
    pub truth: TruthSection,
    pub spacecraft: SpacecraftSection,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    pub measurements: MeasurementSection,
    pub stations: Vec<Station>,
    #[serde(default)]
    pub events: Vec<Event>,
    pub initial: InitialSection,
    pub process_noise: ProcessNoiseSection,
    #[serde(default)]
    pub espf: EspfSection,
    #[serde(default)]
    pub ukf: UkfSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSection {
    pub position_km: [f64; 3],
    pub velocity_km_s: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacecraftSection {
    pub mass_kg: f64,
    pub area_m2: f64,
    pub cd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsSection {
    pub j2: bool,
    pub drag: bool,
    /// Largest RK4 substep.
    pub step_s: f64,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self {
            j2: true,
            drag: true,
            step_s: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSection {
    pub cadence_s: f64,
    pub duration_s: f64,
}

/// Initial filter belief. Both filters are centred on truth + `offset`,
/// plus `sigma ⊙ z` with `z ~ N(0, I)` when `draw` is set; the UKF
/// covariance is `diag(sigma²)` and the ESPF box spans `± box_sigmas · sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSection {
    /// Misinitialization, km and km/s.
    #[serde(default)]
    pub offset: [f64; 6],
    pub sigma: [f64; 6],
    #[serde(default = "three")]
    pub box_sigmas: f64,
    /// Draw the initial estimate error from the scenario seed.
    #[serde(default)]
    pub draw: bool,
}

/// Per-interval process noise: UKF `Q = diag(sigma²)`, ESPF noise box
/// `± box_sigmas · sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessNoiseSection {
    pub sigma: [f64; 6],
    #[serde(default = "three")]
    pub box_sigmas: f64,
}

fn three() -> f64 {
    3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationKind {
    Axis,
    Smolyak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompatibilityName {
    Binary,
    Graded,
}

/// ESPF settings; mirrors [`EspfConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EspfSection {
    pub eta: f64,
    pub s_threshold: f64,
    pub epsilon: f64,
    pub sigma0: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub lambda_d: f64,
    pub lambda_s: f64,
    pub lambda_t: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub s_ref: f64,
    pub s0: f64,
    pub alpha: f64,
    pub generation: GenerationKind,
    pub smolyak_level: usize,
    /// 0 selects the default of `n + 1`.
    pub min_survivors: usize,
    pub compatibility: CompatibilityName,
    pub necessity_floor: f64,
    pub regularization: f64,
    pub radius_floor: f64,
    /// Box growth per axis after total falsification.
    pub reset_factor: f64,
}

impl Default for EspfSection {
    fn default() -> Self {
        let d = EspfConfig::default();
        let (generation, smolyak_level) = match d.generation {
            SupportGeneration::Axis => (GenerationKind::Axis, 2),
            SupportGeneration::Smolyak { level } => (GenerationKind::Smolyak, level),
        };
        Self {
            eta: d.eta,
            s_threshold: d.s_threshold,
            epsilon: d.epsilon,
            sigma0: d.sigma0,
            sigma_min: d.sigma_min,
            sigma_max: d.sigma_max,
            lambda_d: d.lambda_d,
            lambda_s: d.lambda_s,
            lambda_t: d.lambda_t,
            lambda_plus: d.lambda_plus,
            lambda_minus: d.lambda_minus,
            s_ref: d.s_ref,
            s0: d.s0,
            alpha: d.alpha,
            generation,
            smolyak_level,
            min_survivors: 0,
            compatibility: CompatibilityName::Binary,
            necessity_floor: d.necessity_floor,
            regularization: d.regularization,
            radius_floor: d.radius_floor,
            reset_factor: 2.0,
        }
    }
}

impl EspfSection {
    pub fn to_config(&self) -> EspfConfig {
        EspfConfig {
            eta: self.eta,
            s_threshold: self.s_threshold,
            epsilon: self.epsilon,
            sigma0: self.sigma0,
            sigma_min: self.sigma_min,
            sigma_max: self.sigma_max,
            lambda_d: self.lambda_d,
            lambda_s: self.lambda_s,
            lambda_t: self.lambda_t,
            lambda_plus: self.lambda_plus,
            lambda_minus: self.lambda_minus,
            s_ref: self.s_ref,
            s0: self.s0,
            alpha: self.alpha,
            generation: match self.generation {
                GenerationKind::Axis => SupportGeneration::Axis,
                GenerationKind::Smolyak => SupportGeneration::Smolyak {
                    level: self.smolyak_level,
                },
            },
            min_survivors: (self.min_survivors > 0).then_some(self.min_survivors),
            compatibility: match self.compatibility {
                CompatibilityName::Binary => CompatibilityKind::Binary,
                CompatibilityName::Graded => CompatibilityKind::Graded,
            },
            fusion: FusionRule::Minimum,
            unscented: UnscentedParams::default(),
            necessity_floor: self.necessity_floor,
            regularization: self.regularization,
            radius_floor: self.radius_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UkfSection {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UkfSection {
    fn default() -> Self {
        let p = UnscentedParams::default();
        Self {
            alpha: p.alpha,
            beta: p.beta,
            kappa: p.kappa,
        }
    }
}

impl UkfSection {
    pub fn params(&self) -> UnscentedParams {
        UnscentedParams {
            alpha: self.alpha,
            beta: self.beta,
            kappa: self.kappa,
        }
    }
}

impl ScenarioSpec {
    /// Parses TOML text. Keys the schema does not know are returned so the
    /// caller can warn about them; they are otherwise ignored.
    pub fn parse(text: &str) -> Result<(Self, Vec<String>), HarnessError> {
        let raw: toml::Table =
            toml::from_str(text).map_err(|e| HarnessError::Spec(e.to_string()))?;
        let spec: ScenarioSpec = toml::Value::Table(raw.clone())
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Spec(e.to_string()))?;
        let known = leaf_keys(&spec.to_value()?);
        let unknown = leaf_keys(&toml::Value::Table(raw))
            .into_iter()
            .filter(|k| !known.contains(k))
            .collect();
        spec.validate()?;
        Ok((spec, unknown))
    }

    /// Reads a scenario file; `path` may omit the `.toml` extension.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let resolved = resolve_path(path);
        let text = std::fs::read_to_string(&resolved).map_err(|source| HarnessError::Io {
            path: resolved.clone(),
            source,
        })?;
        let (spec, unknown) = Self::parse(&text)?;
        for key in unknown {
            log::warn!("{}: unknown key `{key}` ignored", resolved.display());
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::Spec(msg));
        if !(self.measurements.cadence_s > 0.0) {
            return fail(format!(
                "measurements.cadence_s must be > 0, got {}",
                self.measurements.cadence_s
            ));
        }
        if !(self.measurements.duration_s > 0.0) {
            return fail(format!(
                "measurements.duration_s must be > 0, got {}",
                self.measurements.duration_s
            ));
        }
        if self.measurements.duration_s < self.measurements.cadence_s {
            return fail("measurements.duration_s is shorter than one cadence".into());
        }
        if !(self.dynamics.step_s > 0.0) {
            return fail("dynamics.step_s must be > 0".into());
        }
        if self.stations.is_empty() {
            return fail("at least one station is required".into());
        }
        for s in &self.stations {
            s.validate()
                .map_err(|e| HarnessError::Spec(e.to_string()))?;
            if !(s.noise_sigma_arcsec > 0.0) {
                return fail(format!(
                    "station {}: noise_sigma_arcsec must be > 0 for filtering",
                    s.name
                ));
            }
        }
        espf_orbit::SpacecraftParams::new(
            self.spacecraft.mass_kg,
            self.spacecraft.area_m2,
            self.spacecraft.cd,
        )
        .map_err(|e| HarnessError::Spec(e.to_string()))?;
        if self.initial.sigma.iter().any(|s| !(*s > 0.0)) || !(self.initial.box_sigmas > 0.0) {
            return fail("initial.sigma and initial.box_sigmas must be positive".into());
        }
        if self.process_noise.sigma.iter().any(|s| !(*s >= 0.0))
            || !(self.process_noise.box_sigmas >= 0.0)
        {
            return fail(
                "process_noise.sigma and process_noise.box_sigmas must be non-negative".into(),
            );
        }
        if !(self.espf.reset_factor > 1.0) {
            return fail("espf.reset_factor must exceed 1".into());
        }
        self.espf
            .to_config()
            .validate()
            .map_err(|e| HarnessError::Spec(e.to_string()))?;
        Ok(())
    }

    pub fn to_value(&self) -> Result<toml::Value, HarnessError> {
        toml::Value::try_from(self).map_err(|e| HarnessError::Spec(e.to_string()))
    }

    /// The fully resolved scenario, defaults included, as TOML.
    pub fn resolved_text(&self) -> Result<String, HarnessError> {
        toml::to_string_pretty(self).map_err(|e| HarnessError::Spec(e.to_string()))
    }

    /// Every key accepted by [`ScenarioSpec::with_overrides`].
    pub fn valid_keys(&self) -> Result<Vec<String>, HarnessError> {
        Ok(leaf_keys(&self.to_value()?).into_iter().collect())
    }

    /// Applies `key=value` overrides in order (last wins). Keys are dotted
    /// paths; array elements are addressed by index (`stations.0.ra_bias_arcsec`).
    /// Values are TOML literals; anything that does not parse is taken as
    /// a string.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self, HarnessError> {
        let mut value = self.to_value()?;
        let valid = leaf_keys(&value);
        for (key, raw) in overrides {
            if !valid.contains(key) {
                return Err(HarnessError::InvalidOverride {
                    key: key.clone(),
                    valid: valid.iter().cloned().collect(),
                });
            }
            let parsed = parse_literal(raw);
            let slot = lookup_mut(&mut value, key).expect("valid keys resolve");
            *slot = parsed;
        }
        let spec: ScenarioSpec = value
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Spec(format!("override rejected: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses `key=value` as given on the command line.
pub fn split_override(arg: &str) -> Result<(String, String), HarnessError> {
    match arg.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(HarnessError::Spec(format!(
            "override `{arg}` is not of the form key=value"
        ))),
    }
}

fn resolve_path(path: &Path) -> PathBuf {
    if path.exists() || path.extension().is_some() {
        return path.to_path_buf();
    }
    let with_ext = path.with_extension("toml");
    if with_ext.exists() {
        with_ext
    } else {
        path.to_path_buf()
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn leaf_keys(value: &toml::Value) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_leaves(value, String::new(), &mut out);
    out
}

fn collect_leaves(value: &toml::Value, prefix: String, out: &mut BTreeSet<String>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                collect_leaves(v, join(k), out);
            }
        }
        toml::Value::Array(items) if !items.is_empty() && items.iter().all(|v| v.is_table()) => {
            for (i, v) in items.iter().enumerate() {
                collect_leaves(v, join(&i.to_string()), out);
            }
        }
        _ => {
            out.insert(prefix);
        }
    }
}

fn lookup_mut<'a>(value: &'a mut toml::Value, key: &str) -> Option<&'a mut toml::Value> {
    let mut cur = value;
    for part in key.split('.') {
        cur = match cur {
            toml::Value::Table(t) => t.get_mut(part)?,
            toml::Value::Array(items) => items.get_mut(part.parse::<usize>().ok()?)?,
            _ => return None,
        };
    }
    Some(cur)
}
