//! Teichmüller space of the flat unit-area torus.
//!
//! A point `(a, b)` of the upper half-plane labels the flat metric
//! `g_{a,b} = Tᵀ T` on `R²/Z²`, where `T` sends `(1,0) ↦ (1,0)/√b` and
//! `(0,1) ↦ (a,b)/√b`. Under this identification the energy of the identity
//! map between two such tori is the hyperbolic cosine of their hyperbolic
//! distance, and mapping classes act by Möbius transformations.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ModuliError;

/// Norm constant of constant quadratic differentials on a unit-area torus:
/// `‖φ dz²‖²_{L²} = κ |φ|²` with the Hopf coefficient normalised as in
/// [`hopf_coefficient`]. Fixed so that the energy-decay identity of the flow
/// holds exactly; see `flow::FlowSystem::decay_rate`.
pub const QUAD_DIFF_NORM_CONSTANT: f64 = 16.0;

/// `‖∂g‖²_{L²} = L2_METRIC_FACTOR · (da² + db²) / b²` for tangent vectors to
/// the family of flat metrics, using `⟨h,k⟩ = ∫ tr(g⁻¹ h g⁻¹ k) dv_g`.
/// The L² metric is therefore √2 times the hyperbolic metric.
pub const L2_METRIC_FACTOR: f64 = 2.0;

/// Ratio between the Weil–Petersson distance and the hyperbolic distance.
pub const WP_SCALE: f64 = 2.0;

/// A point of the upper half-plane parametrising the flat metric `g_{a,b}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeichPoint {
    a: f64,
    b: f64,
}

impl TeichPoint {
    pub fn new(a: f64, b: f64) -> Result<Self, ModuliError> {
        if a.is_finite() && b.is_finite() && b > 0.0 {
            Ok(Self { a, b })
        } else {
            Err(ModuliError::InvalidPoint { a, b })
        }
    }

    /// The base point `(0, 1)`, the square torus.
    pub const fn square() -> Self {
        Self { a: 0.0, b: 1.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn tau(&self) -> Complex64 {
        Complex64::new(self.a, self.b)
    }

    pub fn from_tau(tau: Complex64) -> Result<Self, ModuliError> {
        Self::new(tau.re, tau.im)
    }

    /// Matrix of `T_{a,b}`: its columns span the lattice of the flat torus.
    pub fn frame(&self) -> [[f64; 2]; 2] {
        let s = 1.0 / self.b.sqrt();
        [[s, self.a * s], [0.0, self.b * s]]
    }
}

impl fmt::Display for TeichPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

/// Symmetric positive definite 2×2 metric tensor with unit determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatMetric {
    pub coefficients: [[f64; 2]; 2],
}

impl FlatMetric {
    pub fn det(&self) -> f64 {
        let m = &self.coefficients;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn inverse(&self) -> [[f64; 2]; 2] {
        let m = &self.coefficients;
        let d = self.det();
        [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
    }

    /// `g(v, v)` for a vector in torus coordinates.
    pub fn norm_sq(&self, v: [f64; 2]) -> f64 {
        let m = &self.coefficients;
        m[0][0] * v[0] * v[0] + 2.0 * m[0][1] * v[0] * v[1] + m[1][1] * v[1] * v[1]
    }
}

/// Orientation-preserving mapping class of the torus, an element of SL(2,Z).
///
/// The matrix `[[p, q], [r, s]]` acts on the upper half-plane by
/// `τ ↦ (pτ + q)/(rτ + s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MappingClass {
    entries: [[i64; 2]; 2],
}

impl MappingClass {
    pub fn new(entries: [[i64; 2]; 2]) -> Result<Self, ModuliError> {
        let det = entries[0][0] * entries[1][1] - entries[0][1] * entries[1][0];
        if det == 1 {
            Ok(Self { entries })
        } else {
            Err(ModuliError::NotOrientationPreserving { entries, det })
        }
    }

    pub const fn identity() -> Self {
        Self {
            entries: [[1, 0], [0, 1]],
        }
    }

    /// `τ ↦ τ + n`; `translation(1)` is the Dehn twist.
    pub const fn translation(n: i64) -> Self {
        Self {
            entries: [[1, n], [0, 1]],
        }
    }

    /// `τ ↦ −1/τ`.
    pub const fn inversion() -> Self {
        Self {
            entries: [[0, -1], [1, 0]],
        }
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        self.entries
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn inverse(&self) -> Self {
        let [[p, q], [r, s]] = self.entries;
        Self {
            entries: [[s, -q], [-r, p]],
        }
    }

    /// `self^n` for any integer `n`, negative powers via the inverse.
    pub fn pow(&self, n: i64) -> Self {
        let mut base = if n < 0 { self.inverse() } else { *self };
        let mut e = n.unsigned_abs();
        let mut acc = Self::identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    /// Integer matrix `P` with `Pᵀ g_τ P = g_{A·τ}`: the change of lattice
    /// basis realising this mapping class on the torus. For `A = [[p,q],[r,s]]`
    /// this is `[[s, q], [r, p]]`.
    pub fn lattice_matrix(&self) -> [[i64; 2]; 2] {
        let [[p, q], [r, s]] = self.entries;
        [[s, q], [r, p]]
    }
}

impl Mul for MappingClass {
    type Output = MappingClass;

    fn mul(self, rhs: MappingClass) -> MappingClass {
        let x = self.entries;
        let y = rhs.entries;
        let mut out = [[0i64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
            }
        }
        MappingClass { entries: out }
    }
}

impl fmt::Display for MappingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [[p, q], [r, s]] = self.entries;
        write!(f, "[[{p}, {q}], [{r}, {s}]]")
    }
}

/// Constant coefficient of a quadratic differential in the conformal chart of
/// the domain torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadDiffCoeff {
    pub value: Complex64,
}

impl QuadDiffCoeff {
    pub fn zero() -> Self {
        Self {
            value: Complex64::new(0.0, 0.0),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            value: self.value * s,
        }
    }

    pub fn modulus_sq(&self) -> f64 {
        self.value.norm_sqr()
    }
}

pub fn metric_from_point(p: TeichPoint) -> FlatMetric {
    let (a, b) = (p.a, p.b);
    FlatMetric {
        coefficients: [[1.0 / b, a / b], [a / b, (a * a + b * b) / b]],
    }
}

/// Partial derivatives `(∂_a g, ∂_b g)` of the metric coefficients.
pub fn metric_partials(p: TeichPoint) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    let (a, b) = (p.a, p.b);
    let b2 = b * b;
    let da = [[0.0, 1.0 / b], [1.0 / b, 2.0 * a / b]];
    let db = [[-1.0 / b2, -a / b2], [-a / b2, 1.0 - a * a / b2]];
    (da, db)
}

/// Upper half-plane distance, evaluated as `2 asinh(|τ−σ| / (2√(bβ)))` so
/// that nearby points keep full relative precision.
pub fn hyperbolic_distance(p: TeichPoint, q: TeichPoint) -> f64 {
    let chord = ((p.a - q.a).powi(2) + (p.b - q.b).powi(2)).sqrt();
    2.0 * (chord / (2.0 * (p.b * q.b).sqrt())).asinh()
}

pub fn wp_distance(p: TeichPoint, q: TeichPoint) -> f64 {
    WP_SCALE * hyperbolic_distance(p, q)
}

/// `𝓔(p, q) − 1` for the identity map from `(T², g_p)` to `(T², g_q)`.
pub fn identity_energy_excess(p: TeichPoint, q: TeichPoint) -> f64 {
    ((p.a - q.a).powi(2) + (p.b - q.b).powi(2)) / (2.0 * p.b * q.b)
}

/// Dirichlet energy of the identity map from `(T², g_p)` to `(T², g_q)`.
pub fn identity_energy(p: TeichPoint, q: TeichPoint) -> f64 {
    1.0 + identity_energy_excess(p, q)
}

/// Partial derivatives of [`identity_energy`] in the domain slots `(a, b)`
/// and the target slots `(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyGradient {
    pub d_a: f64,
    pub d_b: f64,
    pub d_alpha: f64,
    pub d_beta: f64,
}

pub fn identity_energy_grad(p: TeichPoint, q: TeichPoint) -> EnergyGradient {
    let (a, b, alpha, beta) = (p.a, p.b, q.a, q.b);
    let da = a - alpha;
    let db = b - beta;
    let s = da * da + db * db;
    let bb = b * beta;
    EnergyGradient {
        d_a: da / bb,
        d_b: db / bb - s / (2.0 * b * bb),
        d_alpha: -da / bb,
        d_beta: -db / bb - s / (2.0 * beta * bb),
    }
}

/// Hopf coefficient of `id: (T², g_p) → (T², scale·g_q)`.
///
/// In the chart `w = T_p x` the domain metric is Euclidean and the pulled-back
/// target metric has constant matrix `M`; the coefficient is
/// `φ = ¼ (M₁₁ − M₂₂ − 2i M₁₂)`.
pub fn hopf_coefficient(p: TeichPoint, q: TeichPoint, scale: f64) -> QuadDiffCoeff {
    let m = pulled_back_target(p, q, scale);
    QuadDiffCoeff {
        value: Complex64::new(0.25 * (m[0][0] - m[1][1]), -0.5 * m[0][1]),
    }
}

/// `scale · T_p⁻ᵀ g_q T_p⁻¹`, the target metric in the conformal chart of `p`.
pub(crate) fn pulled_back_target(p: TeichPoint, q: TeichPoint, scale: f64) -> [[f64; 2]; 2] {
    let s = 1.0 / p.b.sqrt();
    // T_p⁻¹ = (1/√b) [[b, −a], [0, 1]]
    let inv = [[p.b * s, -p.a * s], [0.0, s]];
    let g = metric_from_point(q).coefficients;
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    acc += inv[k][i] * g[k][l] * inv[l][j];
                }
            }
            out[i][j] = scale * acc;
        }
    }
    out
}

/// Squared L² norm of the constant quadratic differential `φ dz²` on the
/// unit-area torus `(T², g_p)`. Constant coefficients in the conformal chart
/// make the norm independent of `p`.
pub fn quad_diff_l2_norm_sq(phi: QuadDiffCoeff, _p: TeichPoint) -> f64 {
    QUAD_DIFF_NORM_CONSTANT * phi.modulus_sq()
}

/// Möbius action of a mapping class on the upper half-plane.
pub fn mapping_class_apply(class: &MappingClass, p: TeichPoint) -> TeichPoint {
    let [[pp, qq], [rr, ss]] = class.entries;
    let (pp, qq, rr, ss) = (pp as f64, qq as f64, rr as f64, ss as f64);
    let dr = rr * p.a + ss;
    let di = rr * p.b;
    let den = dr * dr + di * di;
    let nr = pp * p.a + qq;
    TeichPoint {
        a: (nr * dr + pp * rr * p.b * p.b) / den,
        b: p.b / den,
    }
}

/// Derivative of the Möbius action: pushes a tangent vector `(da, db)` at `p`
/// forward through `class`.
pub fn mapping_class_push(class: &MappingClass, p: TeichPoint, v: (f64, f64)) -> (f64, f64) {
    let [[_, _], [rr, ss]] = class.entries;
    let d = Complex64::new(rr as f64 * p.a + ss as f64, rr as f64 * p.b);
    let w = Complex64::new(v.0, v.1) / (d * d);
    (w.re, w.im)
}

/// Reduces `p` into `{|a| ≤ ½, a² + b² ≥ 1}`, returning the reduced point and
/// the mapping class `A` with `A·p` equal to it. Boundary points are sent to
/// the representative with `a ≤ 0`.
pub fn reduce_to_fundamental_domain(p: TeichPoint) -> (TeichPoint, MappingClass) {
    let mut acc = MappingClass::identity();
    let mut cur = p;
    // Each inversion strictly increases b, so this terminates; the cap only
    // guards against non-finite input slipping through.
    for _ in 0..10_000 {
        let n = (cur.a + 0.5).floor();
        if n != 0.0 {
            let shift = MappingClass::translation(-(n as i64));
            cur = TeichPoint {
                a: cur.a - n,
                b: cur.b,
            };
            acc = shift * acc;
        }
        let r2 = cur.a * cur.a + cur.b * cur.b;
        if r2 < 1.0 {
            cur = mapping_class_apply(&MappingClass::inversion(), cur);
            acc = MappingClass::inversion() * acc;
            continue;
        }
        if r2 == 1.0 && cur.a > 0.0 {
            cur = TeichPoint {
                a: -cur.a,
                b: cur.b,
            };
            acc = MappingClass::inversion() * acc;
        }
        break;
    }
    (cur, acc)
}

/// Half the length of the shortest nonzero vector of the lattice spanned by
/// the columns of `T_{a,b}`.
pub fn injectivity_radius(p: TeichPoint) -> f64 {
    // For a reduced τ the shortest lattice vector is 1/√b.
    let (reduced, _) = reduce_to_fundamental_domain(p);
    0.5 / reduced.b.sqrt()
}

/// L² speed `‖∂_t g‖` of a curve in the family of flat metrics moving with
/// coordinate velocity `(da, db)` at `p`.
pub fn metric_l2_speed(p: TeichPoint, da: f64, db: f64) -> f64 {
    (L2_METRIC_FACTOR * (da * da + db * db)).sqrt() / p.b
}
