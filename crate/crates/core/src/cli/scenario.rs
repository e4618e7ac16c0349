//! Running a configured scenario and reading its artifacts back.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{parse_config, ScenarioConfig};
use super::plot::emit_plots;
use crate::diagnostics::{
    l2_length, limit_analysis, lojasiewicz_fit, tail_lengths, tracking_residual, TraceRecord,
};
use crate::error::{DiagnosticsError, FlowError, RunError};
use crate::flow::{integrate, Event, FlowSystem, FlowTrace, TraceStatus};
use crate::moduli::{L2_METRIC_FACTOR, QUAD_DIFF_NORM_CONSTANT, WP_SCALE};

/// Environment variable overriding the output root (default `runs`).
pub const OUTPUT_ROOT_ENV: &str = "TEICHFLOW_OUTPUT_ROOT";

pub const CONFIG_FILE: &str = "config.txt";
pub const TRACE_FILE: &str = "trace.csv";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const REPORT_FILE: &str = "report.jsonl";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub const TRACE_COLUMNS: [&str; 12] = [
    "t",
    "z",
    "a",
    "b",
    "energy",
    "decay_rate",
    "tau_norm_sq",
    "phi_norm_sq",
    "wp_to_curve",
    "inj_radius",
    "winding_index",
    "reduced_z",
];

pub const EVENT_COLUMNS: [&str; 5] = ["kind", "t", "j", "offset", "value"];

/// Slack allowed in the tracking bound `d_WP ≤ 2√2 (E − 1)^{1/2}`.
pub const TRACKING_SLACK: f64 = 1e-8;

/// Final velocity norm below which a run is reported as converged.
pub const CONVERGED_SPEED: f64 = 1e-8;

/// Relative energy increase between consecutive records treated as rounding.
pub const ENERGY_MONOTONE_TOL: f64 = 1e-12;

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

/// `C(η) = η/2`: `‖∂_t g‖ ≤ C(η)·(−dE/dt)^{1/2}` along the flow.
pub fn metric_constraint_constant(eta: f64) -> f64 {
    eta / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InvariantSummary {
    /// Largest `d_WP − 2√2 (E − 1)^{1/2}` over the records.
    pub tracking_max_excess: f64,
    pub tracking_violations: usize,
    /// Largest relative energy increase between consecutive records.
    pub max_energy_increase: f64,
    pub monotonicity_violations: usize,
}

impl InvariantSummary {
    pub fn violations(&self) -> usize {
        self.tracking_violations + self.monotonicity_violations
    }
}

pub fn check_invariants(records: &[TraceRecord]) -> InvariantSummary {
    let mut s = InvariantSummary {
        tracking_max_excess: f64::NEG_INFINITY,
        ..InvariantSummary::default()
    };
    for r in records {
        let (lhs, rhs) = tracking_residual(r);
        s.tracking_max_excess = s.tracking_max_excess.max(lhs - rhs);
        if lhs > rhs + TRACKING_SLACK {
            s.tracking_violations += 1;
        }
    }
    for w in records.windows(2) {
        let rise = (w[1].energy - w[0].energy) / w[0].energy;
        s.max_energy_increase = s.max_energy_increase.max(rise);
        if rise > ENERGY_MONOTONE_TOL {
            s.monotonicity_violations += 1;
        }
    }
    s
}

/// One row of `events.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub kind: String,
    pub t: f64,
    pub j: Option<i64>,
    pub offset: Option<f64>,
    /// Energy at a level crossing; velocity norm at a small-velocity minimum.
    pub value: f64,
}

impl From<&Event> for EventRow {
    fn from(e: &Event) -> Self {
        match *e {
            Event::LevelCrossing {
                t, offset, j, energy, ..
            } => Self {
                kind: "level_crossing".into(),
                t,
                j: Some(j),
                offset: Some(offset),
                value: energy,
            },
            Event::SmallVelocity { t, value } => Self {
                kind: "small_velocity".into(),
                t,
                j: None,
                offset: None,
                value,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub trace: PathBuf,
    pub events: PathBuf,
    pub report: PathBuf,
    pub manifest: PathBuf,
    pub plots: Vec<PathBuf>,
    pub invariants: InvariantSummary,
    pub status: TraceStatus,
    pub warnings: Vec<String>,
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    std::fs::write(path, contents).map_err(|e| RunError::io(path, e))
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<(), RunError> {
    let csv_err = |e| RunError::Csv {
        path: path.display().to_string(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if records.is_empty() {
        w.write_record(TRACE_COLUMNS).map_err(csv_err)?;
    }
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, RunError> {
    let csv_err = |e| RunError::Csv {
        path: path.display().to_string(),
        source: e,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header != TRACE_COLUMNS {
        return Err(RunError::Malformed(format!(
            "{} has columns {header:?}, expected {TRACE_COLUMNS:?}",
            path.display()
        )));
    }
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

fn jsonl<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(&row).expect("report rows serialize"));
        out.push('\n');
    }
    out
}

struct Outcome {
    trace: FlowTrace,
    invariants: InvariantSummary,
    plots: Vec<PathBuf>,
    warnings: Vec<String>,
}

fn analyze_and_write(config: &ScenarioConfig, dir: &Path) -> Result<Outcome, RunError> {
    let curve = config.curve()?;
    let system = FlowSystem::new(config.coupling()?, curve.clone(), config.flow.eta);
    let trace = integrate(&system, &config.flow, config.initial_state()?)?;
    let mut warnings = trace.warnings.clone();

    write_trace(&dir.join(TRACE_FILE), &trace.records)?;
    write_file(&dir.join(EVENTS_FILE), &jsonl(trace.events.iter().map(EventRow::from)))?;

    let invariants = check_invariants(&trace.records);
    let limits = limit_analysis(&curve, &trace, &config.flow.level_offsets);
    let eta = config.flow.eta;
    let min_speed = trace.records.iter().map(|r| r.total_speed(eta)).fold(f64::INFINITY, f64::min);
    let tails = tail_lengths(&trace);
    let tail_length_decreasing = tails.windows(2).all(|w| w[1].1 <= w[0].1);
    let length = l2_length(&trace, trace.start_time(), trace.end_time()).ok();
    let final_speed = trace.last().map(|r| r.total_speed(eta));
    let verdict = if final_speed.is_some_and(|v| v <= CONVERGED_SPEED) {
        "converged"
    } else if limits.applicable {
        "winding"
    } else {
        "undetermined"
    };
    if trace.records.iter().any(|r| r.winding_index < 0) {
        warnings.push("negative winding indices occur along the trace".into());
    }

    let mut report = vec![json!({
        "section": "summary",
        "scenario": config.scenario,
        "status": trace.status,
        "accepted_steps": trace.accepted_steps,
        "rejected_steps": trace.rejected_steps,
        "records": trace.records.len(),
        "final": trace.last(),
        "verdict": verdict,
        "final_total_speed": final_speed,
        "min_total_speed": min_speed,
        "max_abs_a": trace.records.iter().map(|r| r.a.abs()).fold(0.0, f64::max),
        "min_inj_radius": trace.records.iter().map(|r| r.inj_radius).fold(f64::INFINITY, f64::min),
        "max_winding_index": trace.records.iter().map(|r| r.winding_index).max(),
        "l2_length": length,
        "tail_length_decreasing": tail_length_decreasing,
    })];
    report.push(json!({ "section": "invariants", "invariants": invariants }));
    report.push(json!({
        "section": "limits",
        "applicable": limits.applicable,
        "note": limits.note,
        "separations": limits.separations,
    }));
    for o in &limits.offsets {
        report.push(json!({ "section": "limit", "limit": o }));
    }
    report.push(match lojasiewicz_fit(&trace, config.output.tail_fraction, config.flow.abs_tol) {
        Ok(fit) => json!({
            "section": "lojasiewicz",
            "status": "ok",
            "alpha_hat": fit.alpha_hat,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "residual_rms": fit.residual_rms,
            "max_abs_residual": fit.max_abs_residual,
            "energy_limit": fit.energy_limit,
            "decades": fit.decades,
            "points": fit.points.len(),
        }),
        Err(e) => {
            let status = match e {
                DiagnosticsError::NotApplicable(_) => "not_applicable",
                _ => "degenerate",
            };
            json!({ "section": "lojasiewicz", "status": status, "reason": e.to_string() })
        }
    });
    write_file(&dir.join(REPORT_FILE), &jsonl(report))?;

    let mut plots = Vec::new();
    if config.output.plots {
        let (files, w) = emit_plots(dir, &trace, config.output.tail_fraction, config.flow.abs_tol)?;
        plots = files;
        warnings.extend(w);
    }
    Ok(Outcome {
        trace,
        invariants,
        plots,
        warnings,
    })
}

fn manifest(config: &ScenarioConfig, outcome: &Result<Outcome, RunError>) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "teichflow run manifest");
    let _ = writeln!(m, "version: {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "scenario: {}", config.scenario);
    let _ = writeln!(m, "quad_diff_norm_constant: {QUAD_DIFF_NORM_CONSTANT:?}");
    let _ = writeln!(
        m,
        "metric_constraint_constant: {:?}",
        metric_constraint_constant(config.flow.eta)
    );
    let _ = writeln!(m, "l2_metric_factor: {L2_METRIC_FACTOR:?}");
    let _ = writeln!(m, "wp_scale: {WP_SCALE:?}");
    match outcome {
        Ok(o) => {
            let status = if o.invariants.violations() > 0 {
                "invariant_violation"
            } else {
                "ok"
            };
            let _ = writeln!(m, "status: {status}");
            let _ = writeln!(m, "trace_status: {:?}", o.trace.status);
            let _ = writeln!(m, "accepted_steps: {}", o.trace.accepted_steps);
            let _ = writeln!(m, "rejected_steps: {}", o.trace.rejected_steps);
            let _ = writeln!(m, "records: {}", o.trace.records.len());
            let _ = writeln!(m, "tracking_violations: {}", o.invariants.tracking_violations);
            let _ = writeln!(m, "monotonicity_violations: {}", o.invariants.monotonicity_violations);
            let mut files = vec![CONFIG_FILE, TRACE_FILE, EVENTS_FILE, REPORT_FILE].join(", ");
            for p in &o.plots {
                let _ = write!(files, ", {}", p.file_name().map_or(String::new(), |n| n.to_string_lossy().into_owned()));
            }
            let _ = writeln!(m, "files: {files}");
            for w in &o.warnings {
                let _ = writeln!(m, "warning: {w}");
            }
        }
        Err(e) => {
            let _ = writeln!(m, "status: failed");
            let _ = writeln!(m, "error: {e}");
            if let RunError::Flow(FlowError::StepUnderflow { last_good: s, .. }) = e {
                let _ = writeln!(m, "last_good_state: t={:?} z={:?} a={:?} b={:?}", s.t, s.z, s.a, s.b);
            }
        }
    }
    let _ = writeln!(m, "--- config ---");
    m.push_str(&config.to_text());
    m
}

/// Integrates the scenario, writes every artifact under `root/<output.dir>`
/// and returns their locations. The manifest is written even when the run fails.
pub fn run_scenario(config: &ScenarioConfig, root: &Path) -> Result<RunArtifacts, RunError> {
    config.validate()?;
    let dir = root.join(&config.output.dir);
    std::fs::create_dir_all(&dir).map_err(|e| RunError::io(&dir, e))?;
    let config_path = dir.join(CONFIG_FILE);
    write_file(&config_path, &config.to_text())?;
    let outcome = analyze_and_write(config, &dir);
    let manifest_path = dir.join(MANIFEST_FILE);
    write_file(&manifest_path, &manifest(config, &outcome))?;
    let o = outcome?;
    Ok(RunArtifacts {
        config: config_path,
        trace: dir.join(TRACE_FILE),
        events: dir.join(EVENTS_FILE),
        report: dir.join(REPORT_FILE),
        manifest: manifest_path,
        dir,
        plots: o.plots,
        invariants: o.invariants,
        status: o.trace.status,
        warnings: o.warnings,
    })
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    Ok(parse_config(&text)?)
}

/// Rebuilds the trace of a finished run (records only; events are not needed
/// by the plots).
pub fn load_run(dir: &Path) -> Result<(ScenarioConfig, FlowTrace), RunError> {
    let config = load_config(&dir.join(CONFIG_FILE))?;
    let records = read_trace(&dir.join(TRACE_FILE))?;
    let trace = FlowTrace {
        eta: config.flow.eta,
        records,
        events: vec![],
        status: TraceStatus::Completed,
        warnings: vec![],
        accepted_steps: 0,
        rejected_steps: 0,
    };
    Ok((config, trace))
}

/// Regenerates the plots of a finished run.
pub fn plot_run(dir: &Path) -> Result<(Vec<PathBuf>, Vec<String>), RunError> {
    let (config, trace) = load_run(dir)?;
    emit_plots(dir, &trace, config.output.tail_fraction, config.flow.abs_tol)
}

/// Human-readable summary of `report.jsonl` and the manifest status.
pub fn summarize_run(dir: &Path) -> Result<String, RunError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = std::fs::read_to_string(&manifest_path).map_err(|e| RunError::io(&manifest_path, e))?;
    let mut out = String::new();
    for line in manifest.lines().take_while(|l| !l.starts_with("---")) {
        if ["scenario:", "status:", "error:", "trace_status:", "records:"].iter().any(|k| line.starts_with(k)) {
            let _ = writeln!(out, "{line}");
        }
    }
    let report_path = dir.join(REPORT_FILE);
    let Ok(report) = std::fs::read_to_string(&report_path) else {
        let _ = writeln!(out, "no report (run failed before analysis)");
        return Ok(out);
    };
    for line in report.lines() {
        let v: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| RunError::Malformed(format!("{}: {e}", report_path.display())))?;
        match v["section"].as_str() {
            Some("summary") => {
                let _ = writeln!(out, "verdict: {}", v["verdict"].as_str().unwrap_or("?"));
                let f = &v["final"];
                let _ = writeln!(
                    out,
                    "final: t = {} z = {} (a, b) = ({}, {}) E = {}",
                    f["t"], f["z"], f["a"], f["b"], f["energy"]
                );
                let _ = writeln!(
                    out,
                    "max winding index {}, max |a| {}, min injectivity radius {}, min speed {}",
                    v["max_winding_index"], v["max_abs_a"], v["min_inj_radius"], v["min_total_speed"]
                );
            }
            Some("invariants") => {
                let i = &v["invariants"];
                let _ = writeln!(
                    out,
                    "tracking violations {}, monotonicity violations {}",
                    i["tracking_violations"], i["monotonicity_violations"]
                );
            }
            Some("limits") => {
                if v["applicable"] == false {
                    let _ = writeln!(out, "limits: {}", v["note"].as_str().unwrap_or(""));
                }
                for s in v["separations"].as_array().into_iter().flatten() {
                    let _ = writeln!(
                        out,
                        "limit separation {}: observed {} expected {}",
                        s["offsets"], s["observed"], s["expected"]
                    );
                }
            }
            Some("limit") => {
                let l = &v["limit"];
                let last = l["samples"].as_array().and_then(|s| s.last()).map(|s| s["distance"].clone());
                let _ = writeln!(
                    out,
                    "offset {}: {} ({} samples, last distance {})",
                    l["offset"],
                    l["verdict"].as_str().unwrap_or("?"),
                    l["samples"].as_array().map_or(0, |s| s.len()),
                    last.unwrap_or(serde_json::Value::Null)
                );
            }
            Some("lojasiewicz") => match v["status"].as_str() {
                Some("ok") => {
                    let _ = writeln!(
                        out,
                        "lojasiewicz: alpha = {} (rms residual {}, {} points)",
                        v["alpha_hat"], v["residual_rms"], v["points"]
                    );
                }
                _ => {
                    let _ = writeln!(out, "lojasiewicz: {}", v["reason"].as_str().unwrap_or(""));
                }
            },
            _ => {}
        }
    }
    Ok(out)
}

/// Runs every config matching `pattern` in parallel; each run goes to
/// `root/<config file stem>`.
pub fn sweep(pattern: &str, root: &Path) -> Result<Vec<(PathBuf, Result<RunArtifacts, RunError>)>, RunError> {
    let paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| RunError::Malformed(format!("bad glob `{pattern}`: {e}")))?
        .filter_map(Result::ok)
        .collect();
    Ok(paths
        .into_par_iter()
        .map(|path| {
            let result = load_config(&path).and_then(|mut c| {
                c.output.dir = path
                    .file_stem()
                    .map_or_else(|| c.output.dir.clone(), |s| s.to_string_lossy().into_owned());
                run_scenario(&c, root)
            });
            (path, result)
        })
        .collect())
}
