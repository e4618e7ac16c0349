mod common;

use teichflow::diagnostics::{l2_length, tail_lengths, TraceRecord};
use teichflow::flow::{integrate, FlowConfig, FlowState, FlowSystem, FlowTrace, TraceStatus};
use teichflow::moduli::TeichPoint;
use teichflow::target::{CouplingProfile, ModuliCurve};
use teichflow::FlowError;

fn winding_config(t_max: f64) -> FlowConfig {
    FlowConfig {
        eta: 2.0,
        t_max,
        ..FlowConfig::default()
    }
}

fn well() -> FlowSystem {
    FlowSystem::new(
        CouplingProfile::converging_well(0.0).unwrap(),
        ModuliCurve::constant(TeichPoint::square()),
        2.0,
    )
}

#[test]
fn decay_rate_matches_flow_derivative() {
    let mut rng = common::rng(11);
    for sys in common::winding_systems(2.0) {
        for _ in 0..20 {
            let s = common::random_state(&mut rng, &sys);
            let fd = common::flow_energy_rate(&sys, &s);
            let rate = sys.decay_rate(&s);
            assert!(rate < 0.0);
            assert!(common::rel(fd, rate) < 1e-6, "fd {fd} vs {rate} at {s:?}");
        }
    }
}

#[test]
fn decay_rate_is_directional_derivative() {
    let mut rng = common::rng(12);
    for sys in common::winding_systems(1.5) {
        for _ in 0..30 {
            let s = common::random_state(&mut rng, &sys);
            let v = sys.velocity(&s);
            let speed = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dd = common::directional_derivative(&sys, &s, v, 1e-4 / speed);
            assert!(common::rel(dd, sys.decay_rate(&s)) < 1e-6);
        }
    }
}

#[test]
fn metric_velocity_is_scaled_hyperbolic_gradient() {
    let mut rng = common::rng(13);
    let mut ratios = Vec::new();
    for eta in [0.5, 1.0, 2.0, 3.0] {
        for sys in common::winding_systems(eta) {
            for _ in 0..10 {
                let s = common::random_state(&mut rng, &sys);
                let (da, db) = sys.metric_velocity(&s);
                let (ga, gb) = common::metric_gradient_fd(&sys, &s);
                // hyperbolic gradient is b² times the Euclidean one
                let (ha, hb) = (s.b * s.b * ga, s.b * s.b * gb);
                let c = -(da * ha + db * hb) / (ha * ha + hb * hb);
                let perp = (da * hb - db * ha).abs() / (da.hypot(db) * ha.hypot(hb));
                assert!(perp < 1e-6, "not anti-parallel: {perp}");
                ratios.push(c / (eta * eta));
            }
        }
    }
    for r in &ratios {
        assert!((r - 0.125).abs() < 1e-6, "ratio {r}");
    }
}

#[test]
fn metric_speed_obeys_constraint() {
    let mut rng = common::rng(14);
    for eta in [0.5, 2.0, 4.0] {
        for sys in common::winding_systems(eta) {
            for _ in 0..20 {
                let s = common::random_state(&mut rng, &sys);
                let lhs = sys.metric_speed(&s);
                let rhs = 0.5 * eta * (-sys.decay_rate(&s)).sqrt();
                assert!(lhs <= rhs * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn on_curve_map_velocity() {
    let mut rng = common::rng(15);
    let sys = &common::winding_systems(2.0)[0];
    for _ in 0..1000 {
        use rand::Rng;
        let z = rng.gen_range(-2.0..10.0);
        let s = FlowState::on_curve(&sys.curve, z);
        let k: f64 = 0.3;
        let expect = k * (k * z).exp() * (-(k * z).exp()).exp();
        let zdot = sys.map_velocity(&s);
        assert!(zdot > 0.0);
        assert!((zdot - expect).abs() <= 1e-10 * expect.max(1e-300));
        let (da, db) = sys.metric_velocity(&s);
        assert!(da.abs() < 1e-12 && db.abs() < 1e-12);
    }
}

#[test]
fn converging_well_invariant() {
    let sys = well();
    let cfg = FlowConfig {
        eta: 2.0,
        t_max: 3.0,
        max_step: 0.1,
        ..FlowConfig::default()
    };
    let trace = integrate(&sys, &cfg, FlowState::new(0.0, 1.0, 0.0, 1.0).unwrap()).unwrap();
    let inv = |t: f64, z: f64| z.ln() + z * z + z.powi(4) / 4.0 + 2.0 * t;
    let c0 = inv(0.0, 1.0);
    for r in &trace.records {
        assert!((inv(r.t, r.z) - c0).abs() < 1e-7, "t = {}", r.t);
        assert_eq!((r.a, r.b), (0.0, 1.0));
    }
}

#[test]
fn tolerance_halving_self_convergence() {
    let sys = &common::winding_systems(2.0)[0];
    let s0 = FlowState::on_curve(&sys.curve, 0.0);
    let run = |tol: f64| {
        let cfg = FlowConfig {
            rel_tol: tol,
            abs_tol: tol * 1e-2,
            ..winding_config(200.0)
        };
        integrate(sys, &cfg, s0).unwrap().last().unwrap().state()
    };
    let (coarse, mid, fine) = (run(1e-6), run(1e-8), run(1e-10));
    let diff = |x: FlowState, y: FlowState| ((x.z - y.z).powi(2) + (x.a - y.a).powi(2) + (x.b - y.b).powi(2)).sqrt();
    let (e1, e2) = (diff(coarse, fine), diff(mid, fine));
    assert!(e2 < e1, "{e1} {e2}");
    assert!(e2 < 1e-5, "{e2}");
}

#[test]
fn accepted_steps_do_not_raise_energy() {
    for sys in common::winding_systems(2.0) {
        let cfg = winding_config(500.0);
        let trace = integrate(&sys, &cfg, FlowState::on_curve(&sys.curve, 0.0)).unwrap();
        assert_eq!(trace.status, TraceStatus::Completed);
        for w in trace.records.windows(2) {
            assert!(w[1].excess() <= w[0].excess() + 10.0 * cfg.abs_tol);
        }
    }
}

fn sampled_trace(n: usize) -> FlowTrace {
    // map speed e^{−t} and metric speed 2e^{−t} on [0, 4]
    let records = (0..=n)
        .map(|i| {
            let t = 4.0 * i as f64 / n as f64;
            let v = (-t).exp();
            TraceRecord {
                t,
                tau_norm_sq: v * v,
                phi_norm_sq: 128.0 * 4.0 * v * v,
                ..TraceRecord::default()
            }
        })
        .collect();
    FlowTrace {
        eta: 1.0,
        records,
        events: vec![],
        status: TraceStatus::Completed,
        warnings: vec![],
        accepted_steps: n,
        rejected_steps: 0,
    }
}

#[test]
fn l2_length_is_second_order_in_step() {
    let exact = 1.0 - (-4.0f64).exp();
    let err = |n: usize| {
        let l = l2_length(&sampled_trace(n), 0.0, 4.0).unwrap();
        assert!((l.metric - 2.0 * l.map).abs() < 1e-12);
        assert!((l.total - 5f64.sqrt() * l.map).abs() < 1e-12);
        l.map - exact
    };
    for n in [20, 40, 80] {
        let ratio = err(n) / err(2 * n);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }
    let part = l2_length(&sampled_trace(400), 0.5, 2.25).unwrap().map;
    assert!((part - ((-0.5f64).exp() - (-2.25f64).exp())).abs() < 1e-4);
}

#[test]
fn l2_length_converges_along_flow() {
    let sys = well();
    let s0 = FlowState::new(0.0, 1.0, 0.3, 1.4).unwrap();
    let len = |h: f64| {
        let cfg = FlowConfig {
            eta: 2.0,
            t_max: 8.0,
            max_step: h,
            ..FlowConfig::default()
        };
        l2_length(&integrate(&sys, &cfg, s0).unwrap(), 0.0, 8.0).unwrap().total
    };
    let (l1, l2, l3) = (len(0.004), len(0.002), len(0.001));
    assert!((l2 - l3).abs() < (l1 - l2).abs());
    assert!((l2 - l3).abs() < 1e-5);
}

#[test]
fn tail_length_decreases() {
    let sys = well();
    let cfg = FlowConfig {
        eta: 2.0,
        t_max: 30.0,
        max_step: 1.0,
        ..FlowConfig::default()
    };
    let trace = integrate(&sys, &cfg, FlowState::new(0.0, 1.0, 0.3, 1.4).unwrap()).unwrap();
    let tail = tail_lengths(&trace);
    assert!(tail.windows(2).all(|w| w[1].1 <= w[0].1));
    assert_eq!(tail.last().unwrap().1, 0.0);
}

#[test]
fn underflow_carries_last_good_state() {
    let sys = &common::winding_systems(2.0)[0];
    let cfg = FlowConfig {
        rel_tol: 1e-14,
        abs_tol: 1e-300,
        min_step: 1.0,
        max_step: 2.0,
        ..winding_config(100.0)
    };
    let s0 = FlowState::new(0.0, 0.0, 2.0, 0.5).unwrap();
    match integrate(sys, &cfg, s0) {
        Err(FlowError::StepUnderflow { last_good, .. }) => assert!(last_good.check().is_ok()),
        other => panic!("expected underflow, got {other:?}"),
    }
}

#[test]
fn metric_length_constraint_on_windows() {
    let sys = &common::winding_systems(2.0)[0];
    let trace = integrate(sys, &winding_config(2000.0), FlowState::on_curve(&sys.curve, 0.0)).unwrap();
    let c = teichflow::cli::scenario::metric_constraint_constant(2.0);
    let recs = &trace.records;
    for (i, j) in [(0, recs.len() - 1), (0, recs.len() / 3), (recs.len() / 3, recs.len() / 2)] {
        let (r0, r1) = (&recs[i], &recs[j]);
        let len = l2_length(&trace, r0.t, r1.t).unwrap().metric;
        let drop = r0.excess() - r1.excess();
        let sharp = c * drop.sqrt() * (r1.t - r0.t).sqrt();
        assert!(len <= sharp * (1.0 + 1e-3), "{len} > {sharp}");
        assert!(len <= c * r0.energy.sqrt() * (r1.t - r0.t).sqrt());
    }
}
