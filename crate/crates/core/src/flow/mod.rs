//! Reduced Teichmüller harmonic map flow.
//!
//! For maps `u = (z, id)` from `(T², g_{a,b})` into `R × T²` with metric
//! `dz² + f₀(z) G_z`, the flow reduces to an ODE for `(z, a, b)`:
//!
//! * `ż = −∂_z E`, the tension of the spatially constant first component;
//! * `∂_t g = (η²/4) Re Φ`, reduced to `(ȧ, ḃ)` by solving
//!   `(∂_a g) ȧ + (∂_b g) ḃ = (η²/4) Re Φ`.
//!
//! Here `E(z, a, b) = f₀(z)·𝓔(g_{a,b}, G_z)`.

mod dopri;
mod integrate;

use serde::{Deserialize, Serialize};

pub use dopri::{dopri_step, hermite, StepOutcome, Tolerances, VectorField};
pub use integrate::{integrate, Event, FlowTrace, TraceStatus, B_GUARD};

use crate::error::FlowError;
use crate::moduli::{
    hopf_coefficient, identity_energy, identity_energy_excess, identity_energy_grad,
    metric_from_point, metric_l2_speed, metric_partials, quad_diff_l2_norm_sq, QuadDiffCoeff,
    TeichPoint,
};
use crate::target::{curve_deriv, curve_eval, CouplingProfile, ModuliCurve};

/// Reduced flow variables at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub t: f64,
    pub z: f64,
    pub a: f64,
    pub b: f64,
}

impl FlowState {
    pub fn new(t: f64, z: f64, a: f64, b: f64) -> Result<Self, FlowError> {
        let s = Self { t, z, a, b };
        s.check()?;
        Ok(s)
    }

    /// Initial data on the curve: `(z₀, G_{z₀})` at `t = 0`.
    pub fn on_curve(curve: &ModuliCurve, z0: f64) -> Self {
        let g = curve_eval(curve, z0);
        Self {
            t: 0.0,
            z: z0,
            a: g.a(),
            b: g.b(),
        }
    }

    pub fn check(&self) -> Result<(), FlowError> {
        if [self.t, self.z, self.a, self.b].iter().all(|v| v.is_finite()) && self.b > 0.0 {
            Ok(())
        } else {
            Err(FlowError::InvalidState(format!("{self:?}")))
        }
    }

    pub fn point(&self) -> TeichPoint {
        TeichPoint::new(self.a, self.b).expect("flow state with b <= 0")
    }

    pub fn vector(&self) -> [f64; 3] {
        [self.z, self.a, self.b]
    }

    pub fn from_vector(t: f64, y: [f64; 3]) -> Self {
        Self {
            t,
            z: y[0],
            a: y[1],
            b: y[2],
        }
    }
}

/// Integration and event settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub eta: f64,
    pub t_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Offsets `z* ∈ [0, 1)`; crossings of `z = z* + j` are recorded.
    pub level_offsets: Vec<f64>,
    /// Local minima of the velocity norm below this value are recorded.
    pub velocity_threshold: f64,
    /// Records beyond this count are thinned uniformly in `t`.
    pub max_records: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            eta: 1.0,
            t_max: 100.0,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            min_step: 1e-12,
            max_step: 10.0,
            level_offsets: vec![0.0, 0.5],
            velocity_threshold: 1e-6,
            max_records: 1_000_000,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: String| Err(FlowError::InvalidConfig(m));
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return bad(format!("eta must be > 0, got {}", self.eta));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return bad(format!("t_max must be > 0, got {}", self.t_max));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be > 0".into());
        }
        if !(self.min_step > 0.0 && self.max_step >= self.min_step && self.max_step.is_finite()) {
            return bad(format!(
                "need 0 < min_step <= max_step, got {} and {}",
                self.min_step, self.max_step
            ));
        }
        if let Some(o) = self.level_offsets.iter().find(|o| !(**o >= 0.0 && **o < 1.0)) {
            return bad(format!("level offsets must lie in [0, 1), got {o}"));
        }
        if !(self.velocity_threshold >= 0.0) {
            return bad("velocity_threshold must be >= 0".into());
        }
        if self.max_records < 2 {
            return bad("max_records must be at least 2".into());
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            min_step: self.min_step,
            max_step: self.max_step,
        }
    }
}

/// The reduced vector field for one target and coupling `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSystem {
    pub profile: CouplingProfile,
    pub curve: ModuliCurve,
    pub eta: f64,
}

impl FlowSystem {
    pub fn new(profile: CouplingProfile, curve: ModuliCurve, eta: f64) -> Self {
        Self { profile, curve, eta }
    }

    pub fn energy(&self, s: &FlowState) -> f64 {
        self.profile.f0(s.z) * identity_energy(s.point(), curve_eval(&self.curve, s.z))
    }

    /// `E − 1` without cancellation.
    pub fn energy_excess(&self, s: &FlowState) -> f64 {
        let e_ex = identity_energy_excess(s.point(), curve_eval(&self.curve, s.z));
        self.profile.f0_excess(s.z) * (1.0 + e_ex) + e_ex
    }

    /// `(∂_z E, ∂_a E, ∂_b E)` from the closed forms.
    pub fn energy_gradient(&self, s: &FlowState) -> [f64; 3] {
        let p = s.point();
        let g = curve_eval(&self.curve, s.z);
        let (dalpha, dbeta) = curve_deriv(&self.curve, s.z);
        let grad = identity_energy_grad(p, g);
        let f0 = self.profile.f0(s.z);
        let dz = f0 * (grad.d_alpha * dalpha + grad.d_beta * dbeta)
            + self.profile.f0_deriv(s.z) * identity_energy(p, g);
        [dz, f0 * grad.d_a, f0 * grad.d_b]
    }

    /// `ż = −f₀(z) D_G𝓔(dG_z/dz) − f₀′(z) 𝓔(g, G_z)`.
    pub fn map_velocity(&self, s: &FlowState) -> f64 {
        let p = s.point();
        let g = curve_eval(&self.curve, s.z);
        let (dalpha, dbeta) = curve_deriv(&self.curve, s.z);
        let grad = identity_energy_grad(p, g);
        -self.profile.f0(s.z) * (grad.d_alpha * dalpha + grad.d_beta * dbeta)
            - self.profile.f0_deriv(s.z) * identity_energy(p, g)
    }

    /// Hopf coefficient of `(z, id): (T², g) → (R × T², dz² + f₀ G_z)`.
    pub fn hopf(&self, s: &FlowState) -> QuadDiffCoeff {
        hopf_coefficient(s.point(), curve_eval(&self.curve, s.z), self.profile.f0(s.z))
    }

    /// `(ȧ, ḃ)` solving `(∂_a g) ȧ + (∂_b g) ḃ = (η²/4) Re Φ`.
    pub fn metric_velocity(&self, s: &FlowState) -> (f64, f64) {
        let p = s.point();
        let phi = self.hopf(s).value;
        // Re(φ dz²) in the conformal chart w = T x, pulled back to x.
        let rw = [[phi.re, -phi.im], [-phi.im, -phi.re]];
        let t = p.frame();
        let c = 0.25 * self.eta * self.eta;
        let mut rhs = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        acc += t[k][i] * rw[k][l] * t[l][j];
                    }
                }
                rhs[i][j] = c * acc;
            }
        }
        let ginv = metric_from_point(p).inverse();
        let (ga, gb) = metric_partials(p);
        let inner = |h: &[[f64; 2]; 2], k: &[[f64; 2]; 2]| {
            let x = mat_mul(&ginv, h);
            let y = mat_mul(&ginv, k);
            x[0][0] * y[0][0] + x[0][1] * y[1][0] + x[1][0] * y[0][1] + x[1][1] * y[1][1]
        };
        let (gaa, gab, gbb) = (inner(&ga, &ga), inner(&ga, &gb), inner(&gb, &gb));
        let (ra, rb) = (inner(&ga, &rhs), inner(&gb, &rhs));
        let det = gaa * gbb - gab * gab;
        assert!(
            det > 0.0 && det.is_finite(),
            "metric tangent frame degenerate at {p}"
        );
        ((gbb * ra - gab * rb) / det, (gaa * rb - gab * ra) / det)
    }

    pub fn velocity(&self, s: &FlowState) -> [f64; 3] {
        let (da, db) = self.metric_velocity(s);
        [self.map_velocity(s), da, db]
    }

    /// `‖τ‖²_{L²}`: the tension is spatially constant and the domain has unit area.
    pub fn tau_norm_sq(&self, s: &FlowState) -> f64 {
        self.map_velocity(s).powi(2)
    }

    /// `‖P_g Φ‖²_{L²}`.
    pub fn phi_norm_sq(&self, s: &FlowState) -> f64 {
        quad_diff_l2_norm_sq(self.hopf(s), s.point())
    }

    /// `dE/dt = −‖τ‖² − (η²/32)‖P_g Φ‖²`.
    pub fn decay_rate(&self, s: &FlowState) -> f64 {
        -self.tau_norm_sq(s) - self.eta * self.eta / 32.0 * self.phi_norm_sq(s)
    }

    /// `‖∂_t g‖_{L²}`.
    pub fn metric_speed(&self, s: &FlowState) -> f64 {
        let (da, db) = self.metric_velocity(s);
        metric_l2_speed(s.point(), da, db)
    }

    /// `‖∂_t (u, g)‖_{L²} = (‖∂_t u‖² + ‖∂_t g‖²)^{1/2}`.
    pub fn total_speed(&self, s: &FlowState) -> f64 {
        self.map_velocity(s).hypot(self.metric_speed(s))
    }

    /// One Dormand–Prince 5(4) step from `state`.
    pub fn step(&self, state: &FlowState, h: f64, tol: &Tolerances) -> Result<(FlowState, f64, bool), FlowError> {
        let y = state.vector();
        let k1 = self.eval(&y);
        let out = dopri_step(self, &y, &k1, h, tol).map_err(|h| FlowError::StepUnderflow {
            t: state.t,
            h,
            min_step: tol.min_step,
            last_good: *state,
        })?;
        let next = if out.accepted {
            FlowState::from_vector(state.t + h, out.y)
        } else {
            *state
        };
        Ok((next, out.error, out.accepted))
    }
}

impl VectorField<3> for FlowSystem {
    fn eval(&self, y: &[f64; 3]) -> [f64; 3] {
        // Trial stages outside the half-plane poison the error estimate so
        // the step is rejected.
        if !(y[2] > 0.0 && y.iter().all(|v| v.is_finite())) {
            return [f64::NAN; 3];
        }
        self.velocity(&FlowState::from_vector(0.0, *y))
    }
}

fn mat_mul(x: &[[f64; 2]; 2], y: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [
            x[0][0] * y[0][0] + x[0][1] * y[1][0],
            x[0][0] * y[0][1] + x[0][1] * y[1][1],
        ],
        [
            x[1][0] * y[0][0] + x[1][1] * y[1][0],
            x[1][0] * y[0][1] + x[1][1] * y[1][1],
        ],
    ]
}
