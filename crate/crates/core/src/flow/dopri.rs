//! Embedded Dormand–Prince 5(4) step for autonomous systems (stage nodes
//! are therefore not needed).

/// Autonomous right-hand side `y' = F(y)`.
pub trait VectorField<const N: usize> {
    fn eval(&self, y: &[f64; N]) -> [f64; N];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub min_step: f64,
    pub max_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome<const N: usize> {
    /// Fifth-order solution at `t + h`.
    pub y: [f64; N],
    /// `F(y)` at the new point; reused as the first stage of the next step.
    pub k_end: [f64; N],
    /// Scaled RMS error estimate; the step is accepted when it is ≤ 1.
    pub error: f64,
    pub accepted: bool,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// One step of size `h` from `y` with `k1 = F(y)`. Returns `Err(h)` when
/// `h < min_step`.
pub fn dopri_step<F: VectorField<N>, const N: usize>(
    f: &F,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    tol: &Tolerances,
) -> Result<StepOutcome<N>, f64> {
    if !(h >= tol.min_step) {
        return Err(h);
    }
    let k2 = f.eval(&axpy(y, h, &[(A21, k1)]));
    let k3 = f.eval(&axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f.eval(&axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f.eval(&axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f.eval(&axpy(
        y,
        h,
        &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ));
    let y_new = axpy(
        y,
        h,
        &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
    );
    let k7 = f.eval(&y_new);
    let mut sum = 0.0;
    for i in 0..N {
        let err = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = tol.abs_tol + tol.rel_tol * y[i].abs().max(y_new[i].abs());
        sum += (err / scale).powi(2);
    }
    let error = (sum / N as f64).sqrt();
    Ok(StepOutcome {
        y: y_new,
        k_end: k7,
        error,
        accepted: error <= 1.0 && y_new.iter().all(|v| v.is_finite()),
    })
}

/// Cubic Hermite interpolant between `(t0, y0, f0)` and `(t1, y1, f1)`.
pub fn hermite<const N: usize>(
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    t1: f64,
    y1: &[f64; N],
    f1: &[f64; N],
    t: f64,
) -> [f64; N] {
    let h = t1 - t0;
    let u = (t - t0) / h;
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
    out
}

/// Step-size controller (PI form): proposes the next step from the current
/// and previous accepted error norms.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Controller {
    prev_error: f64,
}

impl Controller {
    const SAFETY: f64 = 0.9;
    const ALPHA: f64 = 0.7 / 5.0;
    const BETA: f64 = 0.4 / 5.0;
    const MIN_FACTOR: f64 = 0.2;
    const MAX_FACTOR: f64 = 5.0;

    pub(crate) fn new() -> Self {
        Self { prev_error: 1e-4 }
    }

    pub(crate) fn accepted(&mut self, h: f64, error: f64) -> f64 {
        let err = error.max(1e-10);
        let factor = Self::SAFETY * err.powf(-Self::ALPHA) * self.prev_error.powf(Self::BETA);
        self.prev_error = err;
        h * factor.clamp(Self::MIN_FACTOR, Self::MAX_FACTOR)
    }

    pub(crate) fn rejected(&self, h: f64, error: f64) -> f64 {
        if !error.is_finite() {
            return h * Self::MIN_FACTOR;
        }
        h * (Self::SAFETY * error.powf(-0.2)).clamp(Self::MIN_FACTOR, 1.0)
    }
}

/// Initial step guess from the scaled sizes of `y` and `F(y)`.
pub(crate) fn initial_step<const N: usize>(y: &[f64; N], k: &[f64; N], tol: &Tolerances) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = tol.abs_tol + tol.rel_tol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (k[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
    let h = if d1 <= 1e-15 {
        tol.max_step
    } else {
        0.01 * d0.max(1e-5) / d1
    };
    h.clamp(tol.min_step, tol.max_step)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl VectorField<1> for Decay {
        fn eval(&self, y: &[f64; 1]) -> [f64; 1] {
            [-y[0]]
        }
    }

    struct Oscillator;
    impl VectorField<2> for Oscillator {
        fn eval(&self, y: &[f64; 2]) -> [f64; 2] {
            [y[1], -y[0]]
        }
    }

    fn tol() -> Tolerances {
        Tolerances {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            min_step: 1e-12,
            max_step: 1.0,
        }
    }

    #[test]
    fn fifth_order_local_error() {
        // Local error of a fifth-order step scales like h⁶.
        let y = [1.0];
        let k = Decay.eval(&y);
        let e1 = (dopri_step(&Decay, &y, &k, 0.2, &tol()).unwrap().y[0] - (-0.2f64).exp()).abs();
        let e2 = (dopri_step(&Decay, &y, &k, 0.1, &tol()).unwrap().y[0] - (-0.1f64).exp()).abs();
        let order = (e1 / e2).log2();
        assert!(order > 5.5 && order < 6.6, "observed {order}");
    }

    #[test]
    fn oscillator_preserves_energy() {
        let mut y = [1.0, 0.0];
        let mut k = Oscillator.eval(&y);
        for _ in 0..100 {
            let out = dopri_step(&Oscillator, &y, &k, 0.05, &tol()).unwrap();
            y = out.y;
            k = out.k_end;
        }
        assert!(((y[0] * y[0] + y[1] * y[1]) - 1.0).abs() < 1e-9);
        assert!((y[0] - 5f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn underflow_is_reported() {
        let y = [1.0];
        let k = Decay.eval(&y);
        assert_eq!(dopri_step(&Decay, &y, &k, 1e-13, &tol()), Err(1e-13));
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| t * t * t - 2.0 * t + 1.0;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let v = hermite(0.5, &[f(0.5)], &[df(0.5)], 2.0, &[f(2.0)], &[df(2.0)], 1.3);
        assert!((v[0] - f(1.3)).abs() < 1e-14);
    }
}
