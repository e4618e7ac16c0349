mod common;

use std::fs;

use rand::Rng;
use teichflow::cli::config::{CurveChoice, CurveParams, PRESETS};
use teichflow::cli::scenario::{read_trace, EventRow, TRACE_COLUMNS};
use teichflow::moduli::MappingClass;
use teichflow::target::{CouplingProfile, ProfileKind};
use teichflow::{parse_config, run_scenario, ConfigError, RunError, ScenarioConfig};

fn random_config(r: &mut rand_chacha::ChaCha8Rng) -> ScenarioConfig {
    let mut c = ScenarioConfig::preset(PRESETS[r.gen_range(0..3)]).unwrap();
    if r.gen_bool(0.5) {
        c = ScenarioConfig::custom();
    }
    c.seed = r.gen_range(0..=i64::MAX as u64);
    c.curve = match r.gen_range(0..3) {
        0 => CurveParams {
            kind: CurveChoice::DehnTwist,
            shift: r.gen_range(-1.0..1.0),
            height: r.gen_range(0.2..5.0),
            ..CurveParams::default()
        },
        1 => CurveParams {
            kind: CurveChoice::ClosedLoop,
            center_a: r.gen_range(-1.0..1.0),
            center_b: r.gen_range(1.0..3.0),
            radius: r.gen_range(0.0..0.9),
            deck: MappingClass::identity().entries(),
            ..CurveParams::default()
        },
        _ => CurveParams {
            kind: CurveChoice::Constant,
            center_a: r.gen_range(-1.0..1.0),
            center_b: r.gen_range(0.5..3.0),
            deck: MappingClass::identity().entries(),
            ..CurveParams::default()
        },
    };
    let kind = [ProfileKind::Staircase, ProfileKind::AnalyticStrip, ProfileKind::ConvergingWell][r.gen_range(0..3)];
    c.profile = CouplingProfile::new(kind, r.gen_range(0.01..0.49), r.gen_range(0.1..2.0), r.gen_range(-2.0..2.0)).unwrap();
    c.flow.eta = r.gen_range(0.1..4.0);
    c.flow.t_max = r.gen_range(1.0..1e4);
    c.flow.rel_tol = 10f64.powf(r.gen_range(-12.0..-4.0));
    c.flow.abs_tol = 10f64.powf(r.gen_range(-15.0..-6.0));
    c.flow.max_step = r.gen_range(0.01..20.0);
    c.flow.level_offsets = (0..r.gen_range(0..4)).map(|_| r.gen_range(0.0..1.0)).collect();
    c.flow.velocity_threshold = r.gen_range(0.0..1e-3);
    c.flow.max_records = r.gen_range(2..100_000);
    c.initial.z0 = r.gen_range(-2.0..2.0);
    c.initial.metric = r.gen_bool(0.5).then(|| (r.gen_range(-2.0..2.0), r.gen_range(0.1..5.0)));
    c.output.dir = format!("run-{}", r.gen::<u16>());
    c.output.plots = r.gen();
    c.output.tail_fraction = r.gen_range(0.05..1.0);
    c
}

#[test]
fn random_configs_round_trip() {
    let mut r = common::rng(21);
    for _ in 0..100 {
        let c = random_config(&mut r);
        c.validate().unwrap();
        let text = c.to_text();
        assert_eq!(parse_config(&text).unwrap(), c, "{text}");
    }
}

#[test]
fn presets_parse_from_name_alone() {
    for name in PRESETS {
        let c = parse_config(&format!("scenario = \"{name}\"\n")).unwrap();
        assert_eq!(c, ScenarioConfig::preset(name).unwrap());
    }
}

#[test]
fn config_errors_name_the_key() {
    match parse_config("scenario = \"winding-dehn\"\n[flow]\netaa = 2\n") {
        Err(ConfigError::UnknownKey { line, key }) => {
            assert_eq!(line, 3);
            assert_eq!(key, "flow.etaa");
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_config("[curve]\ndeck = [[1, 0], [0, -1]]\n"), Err(ConfigError::Invalid { .. })));
    assert!(matches!(parse_config("flow.eta = -1\n"), Err(ConfigError::Invalid { .. })));
    assert!(matches!(parse_config("flow.eta = \n"), Err(ConfigError::Parse { .. })));
    let mut c = ScenarioConfig::custom();
    c.seed = u64::MAX;
    assert!(matches!(c.validate(), Err(ConfigError::Invalid { key, .. }) if key == "seed"));
}

fn short(name: &str) -> ScenarioConfig {
    let mut c = ScenarioConfig::preset(name).unwrap();
    c.flow.t_max = c.flow.t_max.min(300.0);
    c
}

#[test]
fn reruns_are_byte_identical() {
    let root = tempfile::tempdir().unwrap();
    for name in PRESETS {
        let mut c = short(name);
        c.output.dir = format!("{name}-1");
        let a = run_scenario(&c, root.path()).unwrap();
        c.output.dir = format!("{name}-2");
        let b = run_scenario(&c, root.path()).unwrap();
        for (x, y) in [(&a.trace, &b.trace), (&a.events, &b.events), (&a.report, &b.report)] {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
        }
    }
}

#[test]
fn artifact_schemas() {
    let root = tempfile::tempdir().unwrap();
    let run = run_scenario(&short("winding-dehn"), root.path()).unwrap();
    let text = fs::read_to_string(&run.trace).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "t,z,a,b,energy,decay_rate,tau_norm_sq,phi_norm_sq,wp_to_curve,inj_radius,winding_index,reduced_z"
    );
    assert_eq!(header.split(',').collect::<Vec<_>>(), TRACE_COLUMNS);
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 12));
    let records = read_trace(&run.trace).unwrap();
    assert!(records.len() > 10);

    let events: Vec<EventRow> = fs::read_to_string(&run.events)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(events.iter().any(|e| e.kind == "level_crossing" && e.j.is_some()));
    for line in fs::read_to_string(&run.events).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 5);
        for k in ["kind", "t", "j", "offset", "value"] {
            assert!(keys.iter().any(|x| x == k));
        }
    }

    let sections: Vec<String> = fs::read_to_string(&run.report)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["section"].as_str().unwrap().to_owned())
        .collect();
    for s in ["summary", "invariants", "limits", "lojasiewicz"] {
        assert!(sections.iter().any(|x| x == s), "missing {s}");
    }
    let manifest = fs::read_to_string(&run.manifest).unwrap();
    assert!(manifest.contains("status: ok"));
    assert!(manifest.contains("--- config ---"));
    assert_eq!(parse_config(&fs::read_to_string(&run.config).unwrap()).unwrap(), short("winding-dehn"));
}

#[test]
fn manifest_written_on_failure() {
    let root = tempfile::tempdir().unwrap();
    let mut c = ScenarioConfig::preset("winding-dehn").unwrap();
    c.flow.rel_tol = 1e-14;
    c.flow.abs_tol = 1e-300;
    c.flow.min_step = 1.0;
    c.flow.max_step = 2.0;
    c.initial.metric = Some((2.0, 0.5));
    let err = run_scenario(&c, root.path()).unwrap_err();
    assert!(matches!(err, RunError::Flow(_)), "{err:?}");
    let manifest = fs::read_to_string(root.path().join("winding-dehn/manifest.txt")).unwrap();
    assert!(manifest.contains("status: failed"));
    assert!(manifest.contains("last_good_state"));
}
