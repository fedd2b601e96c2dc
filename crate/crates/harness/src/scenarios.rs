//! The scenario files shipped in `scenarios/`, compiled in.

use crate::spec::ScenarioSpec;
use crate::HarnessError;

pub const LEO_NOMINAL: &str = include_str!("../../../scenarios/leo_nominal.toml");
pub const LEO_BIAS: &str = include_str!("../../../scenarios/leo_bias.toml");
pub const GEO_AREA_CHANGE: &str = include_str!("../../../scenarios/geo_area_change.toml");

pub const NAMES: [&str; 3] = ["leo_nominal", "leo_bias", "geo_area_change"];

pub fn builtin(name: &str) -> Result<ScenarioSpec, HarnessError> {
    let text = match name {
        "leo_nominal" => LEO_NOMINAL,
        "leo_bias" => LEO_BIAS,
        "geo_area_change" => GEO_AREA_CHANGE,
        other => {
            return Err(HarnessError::Spec(format!(
                "no built-in scenario `{other}`"
            )))
        }
    };
    let (spec, unknown) = ScenarioSpec::parse(text)?;
    debug_assert!(unknown.is_empty(), "{name}: {unknown:?}");
    Ok(spec)
}
