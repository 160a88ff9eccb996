//! Scenario files, the multi-rate co-simulation loop, metrics and output
//! files.
//!
//! One scenario runs on one thread from start to finish; the result is a pure
//! function of the scenario and its seed.

mod corridor;
mod geo;
mod metrics;
mod output;
mod plot;
mod run;
mod scenario;
mod trace;

use std::path::PathBuf;

use thiserror::Error;

pub use corridor::{evaluate_dlc, CorridorSection, DlcCorridor, DlcResult};
pub use geo::{read_waypoints, LocalTangentPlane, WaypointFormat};
pub use metrics::{
    cacc_metrics, path_metrics, replay_metrics, settling_time, CaccMetrics, CommsCounters, Metrics, PathMetrics,
    ReplayMetrics, RunResult, SETTLE_THRESHOLD,
};
pub use output::{emit_outputs, OutputFiles};
pub use plot::{plot_trace, polyline_points, Figure};
pub use run::{run_scenario, trace_columns, RunOutput};
pub use scenario::{
    load_scenario, load_scenario_with, parse_scenario, EgoSpec, LeadSpec, OutputOptions, PathSpec, Profile, ReplaySpec,
    Scenario, ScenarioKind, Timing,
};
pub use trace::Trace;

use crate::comms::CommsError;
use crate::config::ConfigError;
use crate::dynamics::DynamicsError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Invalid(String),
    #[error("trace schema: {0}")]
    Schema(String),
    #[error("run aborted at t = {time} s: {source}")]
    Divergence {
        time: f64,
        source: DynamicsError,
        /// Rows recorded before the failure.
        trace: Box<Trace>,
    },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Comms(#[from] CommsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}
