use thiserror::Error;

use crate::flow::FlowState;

/// Errors raised when constructing or transforming moduli-space objects.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModuliError {
    #[error("invalid Teichmüller point ({a}, {b}): need finite a and b > 0")]
    InvalidPoint { a: f64, b: f64 },
    #[error("mapping class {entries:?} has determinant {det}, expected +1 (orientation preserving)")]
    NotOrientationPreserving { entries: [[i64; 2]; 2], det: i64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TargetError {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("invalid coupling profile: {0}")]
    InvalidProfile(String),
    #[error(transparent)]
    Moduli(#[from] ModuliError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid flow state: {0}")]
    InvalidState(String),
    #[error("step size underflow at t = {t}: required h = {h:e} < min_step = {min_step:e}")]
    StepUnderflow {
        t: f64,
        h: f64,
        min_step: f64,
        last_good: FlowState,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("interval [{t0}, {t1}] lies outside the trace span [{start}, {end}]")]
    Range {
        t0: f64,
        t1: f64,
        start: f64,
        end: f64,
    },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("malformed run directory: {0}")]
    Malformed(String),
}

impl RunError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
