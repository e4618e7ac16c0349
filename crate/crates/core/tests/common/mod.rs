//! Oracles written from the definitions, independently of the library's
//! closed forms, plus seeded samplers shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use teichflow::flow::{FlowState, FlowSystem};
use teichflow::moduli::TeichPoint;
use teichflow::target::{potential_excess, CouplingProfile, ModuliCurve};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(r: &mut ChaCha8Rng) -> TeichPoint {
    TeichPoint::new(r.gen_range(-3.0..3.0), r.gen_range(0.1..10.0)).unwrap()
}

/// `T = (1/√b) [[1, a], [0, b]]`.
pub fn frame(a: f64, b: f64) -> [[f64; 2]; 2] {
    let s = 1.0 / b.sqrt();
    [[s, a * s], [0.0, b * s]]
}

/// `g_ij = ⟨T e_i, T e_j⟩`.
pub fn metric(a: f64, b: f64) -> [[f64; 2]; 2] {
    let t = frame(a, b);
    let col = |j: usize| [t[0][j], t[1][j]];
    let dot = |u: [f64; 2], v: [f64; 2]| u[0] * v[0] + u[1] * v[1];
    [[dot(col(0), col(0)), dot(col(0), col(1))], [dot(col(1), col(0)), dot(col(1), col(1))]]
}

/// `cosh d_ℍ` from the cross ratio, with `1 − r` computed from
/// `|τ − σ̄|² − |τ − σ|² = 4bβ` to avoid cancellation.
pub fn cosh_hyperbolic(p: TeichPoint, q: TeichPoint) -> f64 {
    let near = (p.a() - q.a()).hypot(p.b() - q.b());
    let far = (p.a() - q.a()).hypot(p.b() + q.b());
    let r = near / far;
    let one_minus = 4.0 * p.b() * q.b() / (far * (far + near));
    let ratio = (1.0 + r) / one_minus;
    0.5 * (ratio + 1.0 / ratio)
}

/// Gauss–Legendre nodes and weights on [0, 1], 4 points.
fn gauss4() -> [(f64, f64); 4] {
    let (x1, x2) = (0.3399810435848563, 0.8611363115940526);
    let (w1, w2) = (0.6521451548625461, 0.3478548451374538);
    [
        (0.5 * (1.0 - x2), 0.5 * w2),
        (0.5 * (1.0 - x1), 0.5 * w1),
        (0.5 * (1.0 + x1), 0.5 * w1),
        (0.5 * (1.0 + x2), 0.5 * w2),
    ]
}

/// Tensor Gauss quadrature over the unit square.
pub fn integrate_unit_square(f: impl Fn(f64, f64) -> f64) -> f64 {
    let g = gauss4();
    let mut acc = 0.0;
    for &(x, wx) in &g {
        for &(y, wy) in &g {
            acc += wx * wy * f(x, y);
        }
    }
    acc
}

/// Central-difference Jacobian of a map of the plane.
pub fn jacobian(u: impl Fn([f64; 2]) -> [f64; 2], x: [f64; 2]) -> [[f64; 2]; 2] {
    let h = 1e-4;
    let mut j = [[0.0; 2]; 2];
    for c in 0..2 {
        let (mut lo, mut hi) = (x, x);
        lo[c] -= h;
        hi[c] += h;
        let (ul, uh) = (u(lo), u(hi));
        for r in 0..2 {
            j[r][c] = (uh[r] - ul[r]) / (2.0 * h);
        }
    }
    j
}

/// `½ ∫_{T²} |du|²_{g_p, g_q} dv_{g_p}` for `u = id`, by quadrature.
pub fn identity_energy_quadrature(p: TeichPoint, q: TeichPoint) -> f64 {
    let gp = metric(p.a(), p.b());
    let gq = metric(q.a(), q.b());
    let det = gp[0][0] * gp[1][1] - gp[0][1] * gp[1][0];
    let inv = [[gp[1][1] / det, -gp[0][1] / det], [-gp[1][0] / det, gp[0][0] / det]];
    integrate_unit_square(|x, y| {
        let du = jacobian(|v| v, [x, y]);
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        acc += inv[i][j] * gq[k][l] * du[k][i] * du[l][j];
                    }
                }
            }
        }
        0.5 * acc * det.sqrt()
    })
}

/// `φ = (u*h)(∂_w, ∂_w)` with `w = T_p x` the conformal coordinate,
/// `u = id`, `h = scale·g_q`, averaged over the unit cell of `w`.
pub fn hopf_quadrature(p: TeichPoint, q: TeichPoint, scale: f64) -> (f64, f64) {
    let t = frame(p.a(), p.b());
    let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
    let to_x = |w: [f64; 2]| [(t[1][1] * w[0] - t[0][1] * w[1]) / det, (t[0][0] * w[1] - t[1][0] * w[0]) / det];
    let gq = metric(q.a(), q.b());
    let h = |w: [f64; 2]| {
        let j = jacobian(to_x, w);
        let mut m = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        m[r][c] += scale * j[k][r] * gq[k][l] * j[l][c];
                    }
                }
            }
        }
        m
    };
    // ∂_w = ½(∂_1 − i ∂_2): h(∂_w, ∂_w) = ¼(h₁₁ − h₂₂ − 2i h₁₂)
    let re = integrate_unit_square(|x, y| {
        let m = h([x, y]);
        0.25 * (m[0][0] - m[1][1])
    });
    let im = integrate_unit_square(|x, y| -0.5 * h([x, y])[0][1]);
    (re, im)
}

/// Half the shortest nonzero vector `T (m, n)`, searching `|m|, |n| ≤ 50`.
pub fn brute_force_injectivity(p: TeichPoint) -> f64 {
    let t = frame(p.a(), p.b());
    let mut best = f64::INFINITY;
    for m in -50i32..=50 {
        for n in -50i32..=50 {
            if (m, n) == (0, 0) {
                continue;
            }
            let v = [t[0][0] * m as f64 + t[0][1] * n as f64, t[1][0] * m as f64 + t[1][1] * n as f64];
            best = best.min(v[0].hypot(v[1]));
        }
    }
    0.5 * best
}

/// Preset-like systems used by the flow tests.
pub fn winding_systems(eta: f64) -> Vec<FlowSystem> {
    let stair = CouplingProfile::staircase(0.1, 0.3).unwrap();
    vec![
        FlowSystem::new(stair, ModuliCurve::dehn_twist(1.0).unwrap(), eta),
        FlowSystem::new(
            stair,
            ModuliCurve::closed_loop(TeichPoint::new(0.0, 2.0).unwrap(), 0.5).unwrap(),
            eta,
        ),
        FlowSystem::new(CouplingProfile::staircase(0.1, 1.0).unwrap(), ModuliCurve::dehn_twist(1.0).unwrap(), eta),
    ]
}

/// A state with `z ∈ [0, 3)` and a metric displaced from `G_z`.
pub fn random_state(r: &mut ChaCha8Rng, sys: &FlowSystem) -> FlowState {
    let z = r.gen_range(0.0..3.0);
    let g = sys.curve.eval(z);
    let sign = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
    let a = g.a() + sign * r.gen_range(0.05..0.5);
    let b = g.b() * r.gen_range(-0.5f64..0.5).exp();
    FlowState::new(0.0, z, a, b).unwrap()
}

fn shifted(s: &FlowState, v: [f64; 3], c: f64) -> (f64, TeichPoint) {
    (s.z + c * v[0], TeichPoint::new(s.a + c * v[1], s.b + c * v[2]).unwrap())
}

/// Directional derivative of `potential_energy` along `v` at `s`, by
/// Richardson-extrapolated central differences of the energy excess.
pub fn directional_derivative(sys: &FlowSystem, s: &FlowState, v: [f64; 3], h: f64) -> f64 {
    let e = |c: f64| {
        let (z, p) = shifted(s, v, c);
        potential_excess(&sys.profile, &sys.curve, z, p)
    };
    let d = |h: f64| (e(h) - e(-h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// `(∂_a E, ∂_b E)` of `potential_energy` by central differences.
pub fn metric_gradient_fd(sys: &FlowSystem, s: &FlowState) -> (f64, f64) {
    let h = 1e-5 * s.b;
    let ea = directional_derivative(sys, s, [0.0, 1.0, 0.0], h);
    let eb = directional_derivative(sys, s, [0.0, 0.0, 1.0], h);
    (ea, eb)
}

/// Classical RK4 with `n` substeps over `[0, h]` (`h` may be negative).
pub fn rk4(sys: &FlowSystem, s: &FlowState, h: f64, n: usize) -> FlowState {
    let dt = h / n as f64;
    let mut y = *s;
    let add = |y: &FlowState, k: [f64; 3], c: f64| FlowState {
        t: y.t,
        z: y.z + c * k[0],
        a: y.a + c * k[1],
        b: y.b + c * k[2],
    };
    for _ in 0..n {
        let k1 = sys.velocity(&y);
        let k2 = sys.velocity(&add(&y, k1, dt / 2.0));
        let k3 = sys.velocity(&add(&y, k2, dt / 2.0));
        let k4 = sys.velocity(&add(&y, k3, dt));
        let k = [0, 1, 2].map(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0);
        y = add(&y, k, dt);
        y.t += dt;
    }
    y
}

/// `dE/dt` by central differences of the energy excess along the flow map,
/// with the flow map evaluated by fine RK4, then Richardson-extrapolated.
pub fn flow_energy_rate(sys: &FlowSystem, s: &FlowState) -> f64 {
    let rate = sys.decay_rate(s);
    let v = sys.velocity(s);
    let speed = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    // The backward flow amplifies the fast metric relaxation mode, so the
    // step also stays well below its O(1) time scale.
    let h = (1e-3 * (sys.energy_excess(s) / rate.abs()).min(s.b / speed)).min(1e-2);
    let e = |c: f64| sys.energy_excess(&rk4(sys, s, c, 16));
    let d = |h: f64| (e(h) - e(-h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

pub fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(1e-300)
}
