mod common;

use rand::Rng;
use teichflow::diagnostics::{limit_analysis, lojasiewicz_fit, pull_back};
use teichflow::flow::{integrate, FlowConfig, FlowState};
use teichflow::moduli::{hyperbolic_distance, mapping_class_apply, TeichPoint};
use teichflow::{DiagnosticsError, ScenarioConfig};

#[test]
fn pull_back_is_equivariant() {
    let mut r = common::rng(31);
    for sys in common::winding_systems(1.0) {
        for _ in 0..200 {
            let z: f64 = r.gen_range(-5.0..5.0);
            let p = common::random_point(&mut r);
            let (q, rz) = pull_back(&sys.curve, z, p);
            let (q1, rz1) = pull_back(&sys.curve, z + 1.0, mapping_class_apply(&sys.curve.deck.inverse(), p));
            assert!((rz - rz1).abs() < 1e-12);
            assert!(hyperbolic_distance(q, q1) < 1e-9);
            // the curve itself pulls back onto the base period
            let (g, _) = pull_back(&sys.curve, z, sys.curve.eval(z));
            assert!(hyperbolic_distance(g, sys.curve.eval(rz)) < 1e-9);
        }
    }
}

fn preset_trace(name: &str) -> (ScenarioConfig, teichflow::FlowTrace, teichflow::FlowSystem) {
    let c = ScenarioConfig::preset(name).unwrap();
    let sys = teichflow::FlowSystem::new(c.coupling().unwrap(), c.curve().unwrap(), c.flow.eta);
    let trace = integrate(&sys, &c.flow, c.initial_state().unwrap()).unwrap();
    (c, trace, sys)
}

#[test]
fn winding_run_refuses_lojasiewicz_fit() {
    let (c, trace, _) = preset_trace("winding-dehn");
    assert!(matches!(
        lojasiewicz_fit(&trace, c.output.tail_fraction, c.flow.abs_tol),
        Err(DiagnosticsError::NotApplicable(_))
    ));
}

#[test]
fn converging_run_has_no_limit_sequences() {
    let (_, trace, sys) = preset_trace("analytic-converging");
    let rep = limit_analysis(&sys.curve, &trace, &[0.0, 0.5]);
    assert!(!rep.applicable);
    let s = trace.last().unwrap().state();
    assert!(s.z.abs() < 1e-8 && hyperbolic_distance(s.point(), TeichPoint::square()) < 1e-8);
}

#[test]
fn loop_limits_separate() {
    let (c, trace, sys) = preset_trace("winding-loop");
    let rep = limit_analysis(&sys.curve, &trace, &c.flow.level_offsets);
    assert!(rep.applicable);
    let sep = &rep.separations[0];
    // G_0 = (0.5, 2), G_{1/2} = (-0.5, 2): cosh d = 1 + 1/8
    assert!((sep.expected - 1.125f64.acosh()).abs() < 1e-12);
    assert!((sep.observed - sep.expected).abs() < 1e-2);
}

#[test]
fn sparse_trace_gives_degenerate_fit() {
    let (_, _, sys) = preset_trace("analytic-converging");
    let cfg = FlowConfig {
        eta: 2.0,
        t_max: 20.0,
        max_records: 10,
        ..FlowConfig::default()
    };
    let trace = integrate(&sys, &cfg, FlowState::new(0.0, 1.0, 0.3, 1.4).unwrap()).unwrap();
    assert!(matches!(lojasiewicz_fit(&trace, 0.5, 1e-12), Err(DiagnosticsError::DegenerateFit(_))));
}
