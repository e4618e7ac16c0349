//! Post-processing of flow traces: winding indices, pulled-back states,
//! tracking residuals, L² lengths, limits at level-crossing times and
//! Łojasiewicz exponent estimates.

use serde::{Deserialize, Serialize};

use crate::error::DiagnosticsError;
use crate::flow::{Event, FlowState, FlowSystem, FlowTrace};
use crate::moduli::{hyperbolic_distance, injectivity_radius, mapping_class_apply, wp_distance, TeichPoint};
use crate::target::{curve_eval, ModuliCurve};

/// Distance below which a pulled-back sequence counts as converged.
pub const LIMIT_TOLERANCE: f64 = 1e-2;

/// `2√2`: with `d_WP = 2 d_ℍ = 2 arcosh 𝓔` and `arcosh x ≤ √2 (x − 1)^{1/2}`.
pub const TRACKING_CONSTANT: f64 = 2.0 * std::f64::consts::SQRT_2;

/// One row of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub z: f64,
    pub a: f64,
    pub b: f64,
    pub energy: f64,
    pub decay_rate: f64,
    pub tau_norm_sq: f64,
    pub phi_norm_sq: f64,
    pub wp_to_curve: f64,
    pub inj_radius: f64,
    pub winding_index: i64,
    pub reduced_z: f64,
    /// `E − 1` evaluated without cancellation. Not part of the CSV schema;
    /// records read back from CSV carry 0 here and fall back to `energy − 1`.
    #[serde(skip)]
    pub energy_excess: f64,
}

impl TraceRecord {
    pub fn from_state(system: &FlowSystem, s: &FlowState) -> Self {
        let p = s.point();
        let (n, r) = winding_index(s.z);
        Self {
            t: s.t,
            z: s.z,
            a: s.a,
            b: s.b,
            energy: system.energy(s),
            decay_rate: system.decay_rate(s),
            tau_norm_sq: system.tau_norm_sq(s),
            phi_norm_sq: system.phi_norm_sq(s),
            wp_to_curve: wp_distance(p, curve_eval(&system.curve, s.z)),
            inj_radius: injectivity_radius(p),
            winding_index: n,
            reduced_z: r,
            energy_excess: system.energy_excess(s),
        }
    }

    /// `E − 1`, from the accurate value when available.
    pub fn excess(&self) -> f64 {
        self.energy_excess.max(self.energy - 1.0)
    }

    pub fn state(&self) -> FlowState {
        FlowState {
            t: self.t,
            z: self.z,
            a: self.a,
            b: self.b,
        }
    }

    /// `‖∂_t u‖_{L²} = |ż|`.
    pub fn map_speed(&self) -> f64 {
        self.tau_norm_sq.sqrt()
    }

    /// `‖∂_t g‖_{L²}`. With `∂_t g = (η²/4) Re Φ` and `‖Φ‖² = 2‖Re Φ‖²` for
    /// constant differentials, `‖∂_t g‖² = (η⁴/32)·‖P_gΦ‖²/4`.
    pub fn metric_speed(&self, eta: f64) -> f64 {
        (eta.powi(4) / 128.0 * self.phi_norm_sq).sqrt()
    }

    pub fn total_speed(&self, eta: f64) -> f64 {
        self.map_speed().hypot(self.metric_speed(eta))
    }

    /// `(‖τ‖² + ‖P_gΦ‖²)^{1/2}`, the right-hand side of the Łojasiewicz inequality.
    pub fn gradient_norm(&self) -> f64 {
        (self.tau_norm_sq + self.phi_norm_sq).sqrt()
    }
}

/// `(n, z − n)` with `n = ⌊z⌋`. Negative `n` is allowed.
pub fn winding_index(z: f64) -> (i64, f64) {
    let n = z.floor();
    let r = z - n;
    if r >= 1.0 {
        // z is a tiny negative number and z − ⌊z⌋ rounded up to 1
        (n as i64 + 1, 0.0)
    } else {
        (n as i64, r)
    }
}

/// Pulls `(z, p)` back by the `n`-th power of the deck transformation,
/// `n = ⌊z⌋`: returns `(deckⁿ·p, z − n)`.
pub fn pull_back(curve: &ModuliCurve, z: f64, p: TeichPoint) -> (TeichPoint, f64) {
    let (n, r) = winding_index(z);
    (mapping_class_apply(&curve.deck.pow(n), p), r)
}

/// `(d_WP(g, G_z), 2√2 (E − 1)^{1/2})`; the first never exceeds the second.
pub fn tracking_residual(record: &TraceRecord) -> (f64, f64) {
    let gap = record.excess().max(0.0);
    (record.wp_to_curve, TRACKING_CONSTANT * gap.sqrt())
}

/// L² lengths of the map component, the metric component and the pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Length {
    pub map: f64,
    pub metric: f64,
    pub total: f64,
}

fn speeds(r: &TraceRecord, eta: f64) -> [f64; 3] {
    [r.map_speed(), r.metric_speed(eta), r.total_speed(eta)]
}

/// Trapezoid quadrature of the L² speeds over `[t0, t1]`, linearly
/// interpolating the speeds at interval ends that fall between records.
pub fn l2_length(trace: &FlowTrace, t0: f64, t1: f64) -> Result<L2Length, DiagnosticsError> {
    let (start, end) = (trace.start_time(), trace.end_time());
    if trace.records.is_empty() || t0 < start || t1 > end || t0 > t1 {
        return Err(DiagnosticsError::Range { t0, t1, start, end });
    }
    let eta = trace.eta;
    let recs = &trace.records;
    let mut acc = [0.0; 3];
    for w in recs.windows(2) {
        let (r0, r1) = (&w[0], &w[1]);
        let lo = r0.t.max(t0);
        let hi = r1.t.min(t1);
        if hi <= lo {
            continue;
        }
        let (s0, s1) = (speeds(r0, eta), speeds(r1, eta));
        let span = r1.t - r0.t;
        for k in 0..3 {
            let at = |t: f64| s0[k] + (s1[k] - s0[k]) * (t - r0.t) / span;
            acc[k] += 0.5 * (at(lo) + at(hi)) * (hi - lo);
        }
    }
    Ok(L2Length {
        map: acc[0],
        metric: acc[1],
        total: acc[2],
    })
}

/// Remaining total L² length `∫_{t_i}^{t_end} ‖∂_t(u,g)‖ dt` at every record.
pub fn tail_lengths(trace: &FlowTrace) -> Vec<(f64, f64)> {
    let eta = trace.eta;
    let recs = &trace.records;
    let mut out = vec![(0.0, 0.0); recs.len()];
    let mut acc = 0.0;
    for i in (0..recs.len()).rev() {
        if i + 1 < recs.len() {
            let (r0, r1) = (&recs[i], &recs[i + 1]);
            acc += 0.5 * (r0.total_speed(eta) + r1.total_speed(eta)) * (r1.t - r0.t);
        }
        out[i] = (recs[i].t, acc);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSample {
    pub j: i64,
    pub t: f64,
    /// `(deckʲ)·g(t_jᶻ)`.
    pub pulled_back: TeichPoint,
    /// Hyperbolic distance from the pulled-back metric to `G_{z*}`.
    pub distance: f64,
    pub energy_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitVerdict {
    Converged,
    NotConverged,
    InsufficientCrossings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetLimit {
    pub offset: f64,
    /// `G_{z*}`, the expected limit.
    pub target: TeichPoint,
    pub samples: Vec<LimitSample>,
    pub verdict: LimitVerdict,
    /// Least-squares slope of `log distance` against `j`, when defined.
    pub log_distance_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSeparation {
    pub offsets: (f64, f64),
    /// Distance between the last pulled-back samples of the two sequences.
    pub observed: f64,
    /// Distance between `G_{z₁}` and `G_{z₂}`.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub applicable: bool,
    pub offsets: Vec<OffsetLimit>,
    pub separations: Vec<LimitSeparation>,
    pub note: String,
}

fn slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let m = sxy / sxx;
    Some((m, my - m * mx))
}

/// Pulled-back metrics at the times `z(t) = z* + j`, for each offset `z*`.
pub fn limit_analysis(curve: &ModuliCurve, trace: &FlowTrace, offsets: &[f64]) -> LimitReport {
    let mut per_offset = Vec::new();
    for &offset in offsets {
        let target = curve_eval(curve, offset);
        let mut samples: Vec<LimitSample> = Vec::new();
        for e in trace.level_crossings() {
            if let Event::LevelCrossing {
                t,
                offset: o,
                j,
                a,
                b,
                energy,
                ..
            } = *e
            {
                if o != offset || samples.iter().any(|s| s.j == j) {
                    continue;
                }
                let Ok(p) = TeichPoint::new(a, b) else { continue };
                let pulled_back = mapping_class_apply(&curve.deck.pow(j), p);
                samples.push(LimitSample {
                    j,
                    t,
                    pulled_back,
                    distance: hyperbolic_distance(pulled_back, target),
                    energy_gap: energy - 1.0,
                });
            }
        }
        samples.sort_by_key(|s| s.j);
        let verdict = if samples.len() < 3 {
            LimitVerdict::InsufficientCrossings
        } else {
            let d: Vec<f64> = samples.iter().rev().take(3).map(|s| s.distance).collect();
            if d[0] < LIMIT_TOLERANCE && d[0] < d[1] && d[1] < d[2] {
                LimitVerdict::Converged
            } else {
                LimitVerdict::NotConverged
            }
        };
        let fit: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| s.distance > 0.0)
            .map(|s| (s.j as f64, s.distance.ln()))
            .collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = fit.into_iter().unzip();
        per_offset.push(OffsetLimit {
            offset,
            target,
            samples,
            verdict,
            log_distance_rate: slope(&xs, &ys).map(|(m, _)| m),
        });
    }
    let mut separations = Vec::new();
    for i in 0..per_offset.len() {
        for k in i + 1..per_offset.len() {
            let (x, y) = (&per_offset[i], &per_offset[k]);
            if let (Some(sx), Some(sy)) = (x.samples.last(), y.samples.last()) {
                separations.push(LimitSeparation {
                    offsets: (x.offset, y.offset),
                    observed: hyperbolic_distance(sx.pulled_back, sy.pulled_back),
                    expected: hyperbolic_distance(x.target, y.target),
                });
            }
        }
    }
    let applicable = per_offset
        .iter()
        .any(|o| o.verdict != LimitVerdict::InsufficientCrossings);
    let note = if applicable {
        String::new()
    } else {
        "not applicable: fewer than 3 level crossings for every offset".to_string()
    };
    LimitReport {
        applicable,
        offsets: per_offset,
        separations,
        note,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LojasiewiczFit {
    /// Estimated exponent `α` in `|E − E_∞|^{1−α} ≤ C ‖∇E‖`.
    pub alpha_hat: f64,
    /// Slope of `log(E − E_∞)` against `log ‖∇E‖`.
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub max_abs_residual: f64,
    pub energy_limit: f64,
    /// Decades of `E − E_∞` covered by the fitted points.
    pub decades: f64,
    /// `(log ‖∇E‖, log(E − E_∞))` for every fitted record.
    pub points: Vec<(f64, f64)>,
}

/// Maximum `z` excursion for a trace to count as converging rather than winding.
const CONVERGING_Z_RANGE: f64 = 1.5;

/// Fits the Łojasiewicz exponent on the last `tail_fraction` of the records.
/// `E_∞` is the final energy; records with `E − E_∞ ≤ 10·abs_tol` are dropped.
pub fn lojasiewicz_fit(trace: &FlowTrace, tail_fraction: f64, abs_tol: f64) -> Result<LojasiewiczFit, DiagnosticsError> {
    let recs = &trace.records;
    let Some(last) = recs.last() else {
        return Err(DiagnosticsError::DegenerateFit("empty trace".into()));
    };
    let (zmin, zmax) = recs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.z), hi.max(r.z)));
    if zmax - zmin > CONVERGING_Z_RANGE {
        return Err(DiagnosticsError::NotApplicable(format!(
            "map component sweeps {:.3} periods; the trace winds rather than converges",
            zmax - zmin
        )));
    }
    let e_inf = last.excess();
    let start = ((1.0 - tail_fraction.clamp(0.0, 1.0)) * recs.len() as f64).floor() as usize;
    let points: Vec<(f64, f64)> = recs[start..]
        .iter()
        .filter(|r| r.excess() - e_inf > 10.0 * abs_tol && r.gradient_norm() > 0.0)
        .map(|r| (r.gradient_norm().ln(), (r.excess() - e_inf).ln()))
        .collect();
    if points.len() < 20 {
        return Err(DiagnosticsError::DegenerateFit(format!(
            "only {} tail records above the noise floor, need 20",
            points.len()
        )));
    }
    let (ymin, ymax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    let decades = (ymax - ymin) / std::f64::consts::LN_10;
    if decades < 1.0 {
        return Err(DiagnosticsError::DegenerateFit(format!(
            "energy gap spans {decades:.2} decades, need at least one"
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let (m, c) = slope(&xs, &ys)
        .ok_or_else(|| DiagnosticsError::DegenerateFit("gradient norm is constant over the tail".into()))?;
    let residuals: Vec<f64> = points.iter().map(|(x, y)| y - (m * x + c)).collect();
    let residual_rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    let max_abs_residual = residuals.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
    Ok(LojasiewiczFit {
        alpha_hat: 1.0 - 1.0 / m,
        slope: m,
        intercept: c,
        residual_rms,
        max_abs_residual,
        energy_limit: 1.0 + e_inf,
        decades,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::TraceStatus;
    use crate::moduli::MappingClass;

    fn synthetic(records: Vec<TraceRecord>) -> FlowTrace {
        FlowTrace {
            eta: 1.0,
            records,
            events: vec![],
            status: TraceStatus::Completed,
            warnings: vec![],
            accepted_steps: 0,
            rejected_steps: 0,
        }
    }

    #[test]
    fn winding_examples() {
        assert_eq!(winding_index(0.0), (0, 0.0));
        assert_eq!(winding_index(2.5), (2, 0.5));
        assert_eq!(winding_index(-0.25), (-1, 0.75));
        let (n, r) = winding_index(-1e-20);
        assert!(r >= 0.0 && r < 1.0 && n == 0);
        for z in [0.0, 0.3, 1.7, 5.999, 12.25] {
            let (n, r) = winding_index(z);
            assert_eq!(n as f64 + r, z);
            let y = z.exp();
            let yhat = y * (-(n as f64)).exp();
            assert!(yhat >= 1.0 - 1e-15 && yhat < std::f64::consts::E);
        }
    }

    #[test]
    fn pull_back_examples() {
        let dehn = ModuliCurve::dehn_twist(1.0).unwrap();
        let p = TeichPoint::new(0.3, 1.2).unwrap();
        assert_eq!(pull_back(&dehn, 0.4, p), (p, 0.4));
        let on = curve_eval(&dehn, 3.25);
        let (q, r) = pull_back(&dehn, 3.25, on);
        assert_eq!(r, 0.25);
        assert!(hyperbolic_distance(q, curve_eval(&dehn, 0.25)) < 1e-10);
        let loop_ = ModuliCurve::closed_loop(TeichPoint::new(0.0, 2.0).unwrap(), 0.5).unwrap();
        let (q, r) = pull_back(&loop_, 4.75, p);
        assert_eq!((q, r), (p, 0.75));
    }

    #[test]
    fn tracking_examples() {
        let r = TraceRecord {
            energy: 1.0,
            wp_to_curve: 0.0,
            ..TraceRecord::default()
        };
        assert_eq!(tracking_residual(&r), (0.0, 0.0));
        let r = TraceRecord {
            energy: 1.3,
            wp_to_curve: 0.0,
            ..TraceRecord::default()
        };
        let (l, rhs) = tracking_residual(&r);
        assert!(l <= rhs);
    }

    #[test]
    fn l2_length_of_constant_trace_is_zero() {
        let recs = (0..10)
            .map(|i| TraceRecord {
                t: i as f64,
                energy: 1.0,
                ..TraceRecord::default()
            })
            .collect();
        let tr = synthetic(recs);
        let l = l2_length(&tr, 0.0, 9.0).unwrap();
        assert_eq!((l.map, l.metric, l.total), (0.0, 0.0, 0.0));
        assert!(l2_length(&tr, -1.0, 3.0).is_err());
        assert!(l2_length(&tr, 1.0, 9.5).is_err());
    }

    #[test]
    fn l2_length_integrates_linear_speed_exactly() {
        // |ż| = t on [0, 4]: length 8, also over a sub-interval between records.
        let recs = (0..=4)
            .map(|i| TraceRecord {
                t: i as f64,
                tau_norm_sq: (i as f64).powi(2),
                ..TraceRecord::default()
            })
            .collect();
        let tr = synthetic(recs);
        assert!((l2_length(&tr, 0.0, 4.0).unwrap().map - 8.0).abs() < 1e-14);
        assert!((l2_length(&tr, 0.5, 2.5).unwrap().map - 3.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_gradient_flow_gives_half() {
        // E = 1 + x²/2, ẋ = −x: x = e^{−t}, ‖∇E‖ = |x|.
        let recs = (0..=300)
            .map(|i| {
                let t = i as f64 * 0.1;
                let x = (-t).exp();
                TraceRecord {
                    t,
                    z: x,
                    energy: 1.0 + 0.5 * x * x,
                    tau_norm_sq: x * x,
                    ..TraceRecord::default()
                }
            })
            .collect();
        let fit = lojasiewicz_fit(&synthetic(recs), 1.0, 1e-12).unwrap();
        assert!((fit.alpha_hat - 0.5).abs() < 0.02, "{}", fit.alpha_hat);
    }

    #[test]
    fn winding_trace_is_refused() {
        let recs = (0..100)
            .map(|i| TraceRecord {
                t: i as f64,
                z: i as f64 * 0.1,
                energy: 1.0 + 1.0 / (1.0 + i as f64),
                tau_norm_sq: 1.0,
                ..TraceRecord::default()
            })
            .collect();
        assert!(matches!(
            lojasiewicz_fit(&synthetic(recs), 0.5, 1e-12),
            Err(DiagnosticsError::NotApplicable(_))
        ));
    }

    #[test]
    fn flat_tail_is_degenerate() {
        let recs = (0..100)
            .map(|i| TraceRecord {
                t: i as f64,
                energy: 1.0 + 1e-6 * (2.0 - i as f64 / 100.0),
                tau_norm_sq: 1.0 / (1.0 + i as f64),
                ..TraceRecord::default()
            })
            .collect();
        // E − E_∞ above 10·abs_tol only spans 4.9e−7 .. 1e−7
        assert!(matches!(
            lojasiewicz_fit(&synthetic(recs), 0.5, 1e-8),
            Err(DiagnosticsError::DegenerateFit(_))
        ));
    }

    #[test]
    fn synthetic_on_curve_crossings_have_zero_distance() {
        let dehn = ModuliCurve::dehn_twist(1.0).unwrap();
        let mut events = Vec::new();
        for j in 1..6 {
            for off in [0.0, 0.5] {
                let z = off + j as f64;
                let g = curve_eval(&dehn, z);
                events.push(Event::LevelCrossing {
                    t: z,
                    offset: off,
                    j,
                    z,
                    a: g.a(),
                    b: g.b(),
                    energy: 1.0,
                });
            }
        }
        let mut tr = synthetic(vec![]);
        tr.events = events;
        let rep = limit_analysis(&dehn, &tr, &[0.0, 0.5]);
        assert!(rep.applicable);
        for o in &rep.offsets {
            assert!(o.samples.iter().all(|s| s.distance == 0.0));
            assert_eq!(o.samples.len(), 5);
        }
        let sep = rep.separations[0];
        assert!((sep.expected - 1.125f64.acosh()).abs() < 1e-14);
        assert!((sep.observed - sep.expected).abs() < 1e-14);
    }

    #[test]
    fn no_crossings_is_not_applicable() {
        let c = ModuliCurve::constant(TeichPoint::square());
        let rep = limit_analysis(&c, &synthetic(vec![]), &[0.0, 0.5]);
        assert!(!rep.applicable);
        assert!(rep.note.contains("not applicable"));
        assert_eq!(c.deck, MappingClass::identity());
    }
}
