//! Deterministic scenario engine.
//!
//! A run is a pure function of the scenario document: keys, sealing
//! randomness and vote randomness come from per-module ChaCha20 streams split
//! off the scenario seed, and time only moves when a step is scheduled later
//! than the current clock or an `advance_clock` action runs.

mod engine;
pub mod metrics;
pub mod scenario;

pub use engine::{run, run_detailed, RunOutput};
pub use metrics::{report, Format, MetricRow, MetricsReport, ReportError};
pub use scenario::{load_scenario, Action, Agent, Behavior, Direction, Scenario, ScenarioConfig, ScenarioError, Step, Strategy};
