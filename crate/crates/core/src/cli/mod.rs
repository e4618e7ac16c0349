//! Configuration, scenario execution, artifact serialization, validation
//! suites and plots behind the `teichflow` binary.

pub mod config;
pub mod plot;
pub mod scenario;
pub mod validate;

pub use config::{parse_config, ScenarioConfig, PRESETS};
pub use scenario::{run_scenario, RunArtifacts, OUTPUT_ROOT_ENV};
pub use validate::{run_validation, ValidationReport};
