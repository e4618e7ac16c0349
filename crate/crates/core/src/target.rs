//! Target geometry: the prescribed curve of flat metrics `G_s`, the staircase
//! `ρ`, the coupling function `f` and its restriction `f₀(z) = f(1, e^z)`.
//!
//! The target `R × T²` carries the warped metric `dz² + f₀(z) G_z`, so a map
//! `(z, id)` from `(T², g)` has energy `f₀(z)·𝓔(g, G_z)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::TargetError;
use crate::moduli::{
    hyperbolic_distance, identity_energy, identity_energy_excess, mapping_class_apply,
    mapping_class_push, MappingClass, TeichPoint,
};

/// Shape of the prescribed curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveKind {
    /// Horizontal line `G_s = (s + shift, height)`; its moduli projection is
    /// periodic under the Dehn twist.
    DehnTwist { shift: f64, height: f64 },
    /// Circle `G_s = center + radius·(cos 2πs, sin 2πs)`. A zero radius gives
    /// the constant curve.
    ClosedLoop { center: TeichPoint, radius: f64 },
    /// Cubic Hermite spline through `points` at knots `i/m`, `i = 0..=m`, on
    /// the base period `[0, 1]`, extended to all `s` by the deck action.
    Spline { points: Vec<TeichPoint> },
}

/// A curve `s ↦ G_s` in Teichmüller space together with the mapping class
/// `deck` satisfying `deck · G_{s+1} = G_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuliCurve {
    pub kind: CurveKind,
    pub deck: MappingClass,
}

impl ModuliCurve {
    pub fn dehn_twist(height: f64) -> Result<Self, TargetError> {
        Self::new(
            CurveKind::DehnTwist { shift: 0.0, height },
            MappingClass::translation(-1),
        )
    }

    pub fn closed_loop(center: TeichPoint, radius: f64) -> Result<Self, TargetError> {
        Self::new(CurveKind::ClosedLoop { center, radius }, MappingClass::identity())
    }

    pub fn constant(point: TeichPoint) -> Self {
        Self {
            kind: CurveKind::ClosedLoop {
                center: point,
                radius: 0.0,
            },
            deck: MappingClass::identity(),
        }
    }

    pub fn spline(points: Vec<TeichPoint>, deck: MappingClass) -> Result<Self, TargetError> {
        Self::new(CurveKind::Spline { points }, deck)
    }

    pub fn new(kind: CurveKind, deck: MappingClass) -> Result<Self, TargetError> {
        match &kind {
            CurveKind::DehnTwist { shift, height } => {
                if !shift.is_finite() || !(height.is_finite() && *height > 0.0) {
                    return Err(TargetError::InvalidCurve(format!(
                        "dehn_twist needs finite shift and height > 0, got ({shift}, {height})"
                    )));
                }
            }
            CurveKind::ClosedLoop { center, radius } => {
                if !(radius.is_finite() && *radius >= 0.0 && center.b() - radius > 0.0) {
                    return Err(TargetError::InvalidCurve(format!(
                        "closed_loop needs 0 ≤ radius < center height, got radius {radius} at {center}"
                    )));
                }
            }
            CurveKind::Spline { points } => {
                if points.len() < 3 {
                    return Err(TargetError::InvalidCurve(format!(
                        "spline needs at least 3 control points, got {}",
                        points.len()
                    )));
                }
            }
        }
        Ok(Self { kind, deck })
    }

    pub fn eval(&self, s: f64) -> TeichPoint {
        curve_eval(self, s)
    }

    pub fn deriv(&self, s: f64) -> (f64, f64) {
        curve_deriv(self, s)
    }
}

fn pt(a: f64, b: f64) -> TeichPoint {
    // Curve formulas keep b > 0 on valid curves.
    TeichPoint::new(a, b).expect("curve left the upper half-plane")
}

/// Catmull–Rom tangents in `s`, with neighbours across the seam obtained
/// through the deck action.
fn spline_tangent(points: &[TeichPoint], deck: &MappingClass, i: usize) -> (f64, f64) {
    let m = points.len() - 1;
    let prev = if i == 0 {
        mapping_class_apply(deck, points[m - 1])
    } else {
        points[i - 1]
    };
    let next = if i == m {
        mapping_class_apply(&deck.inverse(), points[1])
    } else {
        points[i + 1]
    };
    let h = 2.0 / m as f64;
    ((next.a() - prev.a()) / h, (next.b() - prev.b()) / h)
}

/// Spline on its base period, `r ∈ [0, 1]`: value and derivative.
fn spline_raw(points: &[TeichPoint], deck: &MappingClass, r: f64) -> ((f64, f64), (f64, f64)) {
    let m = points.len() - 1;
    let x = (r * m as f64).clamp(0.0, m as f64);
    let i = (x.floor() as usize).min(m - 1);
    let u = x - i as f64;
    let dt = 1.0 / m as f64;
    let (p0, p1) = (points[i], points[i + 1]);
    let (m0, m1) = (spline_tangent(points, deck, i), spline_tangent(points, deck, i + 1));
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    let d00 = 6.0 * u2 - 6.0 * u;
    let d10 = 3.0 * u2 - 4.0 * u + 1.0;
    let d01 = -6.0 * u2 + 6.0 * u;
    let d11 = 3.0 * u2 - 2.0 * u;
    let val = |a0: f64, a1: f64, t0: f64, t1: f64| h00 * a0 + h10 * dt * t0 + h01 * a1 + h11 * dt * t1;
    let der = |a0: f64, a1: f64, t0: f64, t1: f64| {
        (d00 * a0 + d10 * dt * t0 + d01 * a1 + d11 * dt * t1) / dt
    };
    (
        (val(p0.a(), p1.a(), m0.0, m1.0), val(p0.b(), p1.b(), m0.1, m1.1)),
        (der(p0.a(), p1.a(), m0.0, m1.0), der(p0.b(), p1.b(), m0.1, m1.1)),
    )
}

/// `G_s` for any real `s`.
pub fn curve_eval(curve: &ModuliCurve, s: f64) -> TeichPoint {
    match &curve.kind {
        CurveKind::DehnTwist { shift, height } => pt(s + shift, *height),
        CurveKind::ClosedLoop { center, radius } => {
            let (sin, cos) = (2.0 * PI * s).sin_cos();
            pt(center.a() + radius * cos, center.b() + radius * sin)
        }
        CurveKind::Spline { points } => {
            let n = s.floor();
            let ((a, b), _) = spline_raw(points, &curve.deck, s - n);
            // G_{r+n} = (deck⁻¹)ⁿ G_r
            mapping_class_apply(&curve.deck.pow(-(n as i64)), pt(a, b))
        }
    }
}

/// `dG_s/ds` as `(dα/ds, dβ/ds)`.
pub fn curve_deriv(curve: &ModuliCurve, s: f64) -> (f64, f64) {
    match &curve.kind {
        CurveKind::DehnTwist { .. } => (1.0, 0.0),
        CurveKind::ClosedLoop { radius, .. } => {
            let (sin, cos) = (2.0 * PI * s).sin_cos();
            (-2.0 * PI * radius * sin, 2.0 * PI * radius * cos)
        }
        CurveKind::Spline { points } => {
            let n = s.floor();
            let ((a, b), d) = spline_raw(points, &curve.deck, s - n);
            mapping_class_push(&curve.deck.pow(-(n as i64)), pt(a, b), d)
        }
    }
}

/// Outcome of [`validate_curve`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveValidation {
    pub passed: bool,
    /// Largest hyperbolic distance between `G_{s+1}` and `deck⁻¹·G_s`.
    pub max_violation: f64,
    /// Parameter value where the largest violation occurs.
    pub at_s: f64,
    pub min_height: f64,
    pub messages: Vec<String>,
}

/// Checks the periodicity identity `deck · G_{s+1} = G_s` and that the curve
/// stays inside the upper half-plane, on a grid of `grid_size` points in
/// `[0, 1)`. Spline curves are also checked at the seam `s = 1`.
pub fn validate_curve(curve: &ModuliCurve, grid_size: usize, tolerance: f64) -> CurveValidation {
    let grid_size = grid_size.max(2);
    let inv = curve.deck.inverse();
    let mut max_violation = 0.0f64;
    let mut at_s = 0.0;
    let mut min_height = f64::INFINITY;
    let mut messages = Vec::new();
    for k in 0..grid_size {
        let s = k as f64 / grid_size as f64;
        let here = curve_eval(curve, s);
        min_height = min_height.min(here.b());
        let v = hyperbolic_distance(curve_eval(curve, s + 1.0), mapping_class_apply(&inv, here));
        if v > max_violation {
            max_violation = v;
            at_s = s;
        }
    }
    if let CurveKind::Spline { points } = &curve.kind {
        let last = *points.last().expect("spline has points");
        let v = hyperbolic_distance(last, mapping_class_apply(&inv, points[0]));
        if v > max_violation {
            max_violation = v;
            at_s = 1.0;
        }
        for p in points {
            min_height = min_height.min(p.b());
        }
    }
    if max_violation > tolerance {
        messages.push(format!(
            "periodicity violated: max distance {max_violation:e} at s = {at_s}"
        ));
    }
    if min_height <= 0.0 {
        messages.push(format!("curve leaves the upper half-plane (min b = {min_height})"));
    }
    CurveValidation {
        passed: messages.is_empty(),
        max_violation,
        at_s,
        min_height,
        messages,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// Smooth staircase `ρ`, flat near every integer.
    Staircase,
    /// `ρ(s) = s`; the coupling `f` is then real analytic on `x > 0`.
    AnalyticStrip,
    /// `f₀(z) = 1 + w²/(1 + w²)`, `w = z − center`: a single nondegenerate well.
    ConvergingWell,
}

/// Coupling data `ρ`, `f`, `f₀`.
///
/// For the staircase and analytic kinds,
/// `f(x, y) = 1 + exp(−(y e^{−ρ(log x)})^rate)` for `x > 0` and `1` otherwise,
/// so `f₀(z) = 1 + exp(−e^{rate·z})`. `rate = 1` is the classical choice;
/// smaller rates slow the double-exponential decay of `f₀ − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingProfile {
    pub kind: ProfileKind,
    /// Half-width of the flat neighbourhoods of the integers in `ρ`.
    pub width: f64,
    pub rate: f64,
    /// Location of the well minimum for `ConvergingWell`.
    pub center: f64,
}

impl Default for CouplingProfile {
    fn default() -> Self {
        Self {
            kind: ProfileKind::Staircase,
            width: 0.1,
            rate: 1.0,
            center: 0.0,
        }
    }
}

/// `exp(−1/t)` for `t > 0`, else 0.
fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn bump_deriv(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp() / (t * t)
    } else {
        0.0
    }
}

/// Smooth step: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let (l, r) = (bump(t), bump(1.0 - t));
        l / (l + r)
    }
}

fn smooth_step_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let (l, r) = (bump(t), bump(1.0 - t));
        let (dl, dr) = (bump_deriv(t), bump_deriv(1.0 - t));
        (dl * r + l * dr) / ((l + r) * (l + r))
    }
}

impl CouplingProfile {
    pub fn staircase(width: f64, rate: f64) -> Result<Self, TargetError> {
        Self::new(ProfileKind::Staircase, width, rate, 0.0)
    }

    pub fn analytic_strip(rate: f64) -> Result<Self, TargetError> {
        Self::new(ProfileKind::AnalyticStrip, 0.1, rate, 0.0)
    }

    pub fn converging_well(center: f64) -> Result<Self, TargetError> {
        Self::new(ProfileKind::ConvergingWell, 0.1, 1.0, center)
    }

    pub fn new(kind: ProfileKind, width: f64, rate: f64, center: f64) -> Result<Self, TargetError> {
        if !(width > 0.0 && width < 0.5) {
            return Err(TargetError::InvalidProfile(format!(
                "staircase width must lie in (0, 1/2), got {width}"
            )));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(TargetError::InvalidProfile(format!("rate must be > 0, got {rate}")));
        }
        if !center.is_finite() {
            return Err(TargetError::InvalidProfile(format!("center must be finite, got {center}")));
        }
        Ok(Self {
            kind,
            width,
            rate,
            center,
        })
    }

    pub fn rho(&self, s: f64) -> f64 {
        match self.kind {
            ProfileKind::Staircase => {
                let n = s.floor();
                n + smooth_step((s - n - self.width) / (1.0 - 2.0 * self.width))
            }
            ProfileKind::AnalyticStrip | ProfileKind::ConvergingWell => s,
        }
    }

    pub fn rho_deriv(&self, s: f64) -> f64 {
        match self.kind {
            ProfileKind::Staircase => {
                let n = s.floor();
                let span = 1.0 - 2.0 * self.width;
                smooth_step_deriv((s - n - self.width) / span) / span
            }
            ProfileKind::AnalyticStrip | ProfileKind::ConvergingWell => 1.0,
        }
    }

    /// `f(x, y)`; depends on `(x, y)` only through `y e^{−ρ(log x)}`, which
    /// makes it invariant under `(x, y) ↦ (ex, ey)`.
    pub fn f(&self, x: f64, y: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let log_scaled = y.ln() - self.rho(x.ln());
        1.0 + self.f0_excess(log_scaled)
    }

    pub fn f0(&self, z: f64) -> f64 {
        1.0 + self.f0_excess(z)
    }

    /// `f₀(z) − 1`, evaluated without cancellation.
    pub fn f0_excess(&self, z: f64) -> f64 {
        match self.kind {
            ProfileKind::Staircase | ProfileKind::AnalyticStrip => (-(self.rate * z).exp()).exp(),
            ProfileKind::ConvergingWell => {
                let w = z - self.center;
                let w2 = w * w;
                w2 / (1.0 + w2)
            }
        }
    }

    pub fn f0_deriv(&self, z: f64) -> f64 {
        match self.kind {
            ProfileKind::Staircase | ProfileKind::AnalyticStrip => {
                let e = (self.rate * z).exp();
                -self.rate * e * (-e).exp()
            }
            ProfileKind::ConvergingWell => {
                let w = z - self.center;
                let d = 1.0 + w * w;
                2.0 * w / (d * d)
            }
        }
    }
}

pub fn rho_eval(profile: &CouplingProfile, s: f64) -> f64 {
    profile.rho(s)
}

pub fn rho_deriv(profile: &CouplingProfile, s: f64) -> f64 {
    profile.rho_deriv(s)
}

pub fn f_eval(profile: &CouplingProfile, x: f64, y: f64) -> f64 {
    profile.f(x, y)
}

pub fn f0_eval(profile: &CouplingProfile, z: f64) -> f64 {
    profile.f0(z)
}

pub fn f0_deriv(profile: &CouplingProfile, z: f64) -> f64 {
    profile.f0_deriv(z)
}

/// `E = f₀(z)·𝓔(p, G_z)`.
pub fn potential_energy(profile: &CouplingProfile, curve: &ModuliCurve, z: f64, p: TeichPoint) -> f64 {
    profile.f0(z) * identity_energy(p, curve_eval(curve, z))
}

/// `E − 1 = (f₀ − 1)𝓔 + (𝓔 − 1)`, accurate when both excesses are tiny.
pub fn potential_excess(profile: &CouplingProfile, curve: &ModuliCurve, z: f64, p: TeichPoint) -> f64 {
    let e_ex = identity_energy_excess(p, curve_eval(curve, z));
    profile.f0_excess(z) * (1.0 + e_ex) + e_ex
}
