//! Scheduled changes to spacecraft parameters.

use serde::{Deserialize, Serialize};

use crate::dynamics::SpacecraftParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    AreaChange { area_m2: f64 },
}

/// An event fires once the measurement epoch with index `at_measurement`
/// (0-based) is reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub at_measurement: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

pub fn apply_event(params: &SpacecraftParams, event: &Event) -> SpacecraftParams {
    match event.kind {
        EventKind::AreaChange { area_m2 } => SpacecraftParams {
            area: area_m2,
            ..*params
        },
    }
}
