//! Adaptive integration of the reduced flow with event detection.

use serde::{Deserialize, Serialize};

use super::dopri::{dopri_step, hermite, initial_step, Controller, VectorField};
use super::{FlowConfig, FlowState, FlowSystem};
use crate::diagnostics::TraceRecord;
use crate::error::FlowError;

/// Admissible range for `b`; leaving it signals a numerical failure since the
/// torus flow cannot degenerate in finite time.
pub const B_GUARD: (f64, f64) = (1e-6, 1e6);

/// Event bisection stops once the bracket is shorter than this.
const EVENT_TIME_TOL: f64 = 1e-10;

const MAX_STEPS: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// `z(t) = offset + j`, with the interpolated state at that time.
    LevelCrossing {
        t: f64,
        offset: f64,
        j: i64,
        z: f64,
        a: f64,
        b: f64,
        energy: f64,
    },
    /// Local minimum of `‖∂_t(u, g)‖` below the configured threshold.
    SmallVelocity { t: f64, value: f64 },
}

impl Event {
    pub fn t(&self) -> f64 {
        match self {
            Event::LevelCrossing { t, .. } | Event::SmallVelocity { t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Completed,
    /// Integration stopped because `b` left [`B_GUARD`].
    GuardHit,
    StepBudgetExhausted,
}

/// Output of [`integrate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub eta: f64,
    pub records: Vec<TraceRecord>,
    pub events: Vec<Event>,
    pub status: TraceStatus,
    pub warnings: Vec<String>,
    /// Accepted steps before any thinning.
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl FlowTrace {
    pub fn start_time(&self) -> f64 {
        self.records.first().map_or(0.0, |r| r.t)
    }

    pub fn end_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn level_crossings(&self) -> impl Iterator<Item = &Event> {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::LevelCrossing { .. }))
    }
}

fn bisect_level(
    t0: f64,
    y0: &[f64; 3],
    f0: &[f64; 3],
    t1: f64,
    y1: &[f64; 3],
    f1: &[f64; 3],
    level: f64,
) -> (f64, [f64; 3]) {
    let g = |t: f64| hermite(t0, y0, f0, t1, y1, f1, t)[0] - level;
    let (mut lo, mut hi) = (t0, t1);
    let mut glo = y0[0] - level;
    while hi - lo > EVENT_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if (gm <= 0.0) == (glo <= 0.0) && gm != 0.0 {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    (t, hermite(t0, y0, f0, t1, y1, f1, t))
}

/// Integer `j` range of levels `offset + j` crossed when `z` moves from `z0`
/// to `z1` (levels equal to `z0` are not counted, levels equal to `z1` are).
fn crossed_levels(z0: f64, z1: f64, offset: f64) -> std::ops::RangeInclusive<i64> {
    if z1 > z0 {
        ((z0 - offset).floor() as i64 + 1)..=((z1 - offset).floor() as i64)
    } else if z1 < z0 {
        ((z1 - offset).ceil() as i64)..=((z0 - offset).ceil() as i64 - 1)
    } else {
        1..=0
    }
}

/// Uniform-in-`t` thinning down to at most `cap` records, keeping both ends.
fn thin(records: Vec<TraceRecord>, cap: usize) -> Vec<TraceRecord> {
    if records.len() <= cap {
        return records;
    }
    let (t0, t1) = (records[0].t, records[records.len() - 1].t);
    let mut keep = Vec::with_capacity(cap);
    let mut idx = 0usize;
    for k in 0..cap {
        let target = t0 + (t1 - t0) * k as f64 / (cap - 1) as f64;
        while idx + 1 < records.len() && (records[idx + 1].t - target).abs() <= (records[idx].t - target).abs() {
            idx += 1;
        }
        if keep.last() != Some(&idx) {
            keep.push(idx);
        }
    }
    let mut out = Vec::with_capacity(keep.len());
    let mut it = keep.into_iter().peekable();
    for (i, r) in records.into_iter().enumerate() {
        if it.peek() == Some(&i) {
            out.push(r);
            it.next();
        }
    }
    out
}

/// Integrates the reduced flow from `initial` up to `config.t_max`, recording
/// every accepted step together with level-crossing and small-velocity events.
pub fn integrate(system: &FlowSystem, config: &FlowConfig, initial: FlowState) -> Result<FlowTrace, FlowError> {
    config.validate()?;
    initial.check()?;
    let tol = config.tolerances();
    let mut warnings = Vec::new();
    let mut status = TraceStatus::Completed;

    let mut t = initial.t;
    let mut y = initial.vector();
    let mut k = system.eval(&y);
    let mut h = initial_step(&y, &k, &tol);
    let mut controller = Controller::new();

    let mut records = vec![TraceRecord::from_state(system, &initial)];
    let mut speeds = vec![system.total_speed(&initial)];
    let mut events = Vec::new();
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let t_end = initial.t + config.t_max;

    while t < t_end {
        if accepted + rejected >= MAX_STEPS {
            status = TraceStatus::StepBudgetExhausted;
            warnings.push(format!("step budget of {MAX_STEPS} exhausted at t = {t}"));
            break;
        }
        // absorb a remainder shorter than min_step into this step
        let last_step = t + h >= t_end - tol.min_step;
        let h_try = if last_step { t_end - t } else { h };
        let out = dopri_step(system, &y, &k, h_try, &tol).map_err(|h| FlowError::StepUnderflow {
            t,
            h,
            min_step: tol.min_step,
            last_good: FlowState::from_vector(t, y),
        })?;
        if !out.accepted {
            rejected += 1;
            h = controller.rejected(h_try, out.error);
            if h < tol.min_step {
                return Err(FlowError::StepUnderflow {
                    t,
                    h,
                    min_step: tol.min_step,
                    last_good: FlowState::from_vector(t, y),
                });
            }
            continue;
        }
        accepted += 1;
        let t_new = if last_step { t_end } else { t + h_try };
        let h_next = controller.accepted(h_try, out.error).min(tol.max_step);

        for &offset in &config.level_offsets {
            for j in crossed_levels(y[0], out.y[0], offset) {
                let level = offset + j as f64;
                let (te, ye) = bisect_level(t, &y, &k, t_new, &out.y, &out.k_end, level);
                let state = FlowState::from_vector(te, ye);
                events.push(Event::LevelCrossing {
                    t: te,
                    offset,
                    j,
                    z: ye[0],
                    a: ye[1],
                    b: ye[2],
                    energy: system.energy(&state),
                });
            }
        }

        t = t_new;
        y = out.y;
        k = out.k_end;
        if !last_step {
            h = h_next;
        }
        let state = FlowState::from_vector(t, y);
        records.push(TraceRecord::from_state(system, &state));
        speeds.push(system.total_speed(&state));

        if !(B_GUARD.0..=B_GUARD.1).contains(&y[2]) {
            status = TraceStatus::GuardHit;
            warnings.push(format!(
                "b = {} left [{:e}, {:e}] at t = {t}; integration stopped",
                y[2], B_GUARD.0, B_GUARD.1
            ));
            break;
        }
    }

    for i in 1..speeds.len().saturating_sub(1) {
        let v = speeds[i];
        if v < config.velocity_threshold && v < speeds[i - 1] && v <= speeds[i + 1] {
            events.push(Event::SmallVelocity {
                t: records[i].t,
                value: v,
            });
        }
    }
    events.sort_by(|x, y| x.t().total_cmp(&y.t()));

    Ok(FlowTrace {
        eta: system.eta,
        records: thin(records, config.max_records),
        events,
        status,
        warnings,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}
