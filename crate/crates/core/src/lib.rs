//! Longitudinal platoon simulation: vehicle dynamics, a four-mode adaptive
//! cruise controller, a V2V channel model and connected add-ons.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cacc;
pub mod connectivity;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod metrics;
pub mod scenario;
pub mod trace;

pub use controller::{AccConfig, AccController, ControlMode};
pub use dynamics::{LagModel, VehicleState};
pub use error::{Result, SimError};
pub use metrics::MetricsReport;
pub use scenario::{build_braking_scenario, build_oscillatory_scenario, run, ControllerKind, ScenarioKind, ScenarioSpec};
pub use trace::{SimTrace, TraceMeta};
