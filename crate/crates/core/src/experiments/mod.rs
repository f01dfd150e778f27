//! Named scenarios that combine the band model, the exact dynamics and the
//! analytic solver, with reproducible file outputs.

pub mod config;
pub mod lobes;
pub mod numeric;
pub mod output;
pub mod runners;
pub mod validation;

pub use config::{Angle, Grid, ScenarioConfig, ScenarioKind};
pub use numeric::{run_numeric, NumericOutcome, NumericRun};
pub use output::OutputSink;
pub use runners::{run_as, run_kind, run_scenario, snapshot_profiles, RunOptions, ScenarioResult};
