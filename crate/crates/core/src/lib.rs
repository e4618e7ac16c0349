//! Simulator and diagnostics for Teichmüller harmonic map flow from the torus
//! into warped-product targets built over closed curves in moduli space.
//!
//! The flow is reduced to three unknowns: the target coordinate `z` of the
//! map `u(x, y) = (x, y, z)` and the point `(a, b)` of the upper half-plane
//! labelling the flat domain metric.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod moduli;
pub mod target;

pub use cli::{parse_config, run_scenario, ScenarioConfig};
pub use diagnostics::{
    l2_length, limit_analysis, lojasiewicz_fit, pull_back, tracking_residual, winding_index, LimitReport,
    LojasiewiczFit, TraceRecord,
};
pub use error::{ConfigError, DiagnosticsError, FlowError, ModuliError, RunError, TargetError};
pub use flow::{integrate, FlowConfig, FlowState, FlowSystem, FlowTrace};
pub use moduli::{MappingClass, TeichPoint};
pub use target::{CouplingProfile, ModuliCurve};
